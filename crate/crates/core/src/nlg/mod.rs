//! Sentence generation.
