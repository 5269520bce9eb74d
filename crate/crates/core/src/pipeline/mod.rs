//! CLI orchestration.
