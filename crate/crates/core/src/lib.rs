//! Detection streams in, sentences out.
//!
//! This crate turns per-frame object-detection candidates into grammatical
//! English descriptions of the depicted event: detections are normalized and
//! composed into tracks by dynamic programming, person tracks are quantized
//! against a body-posture codebook, per-frame feature series drive a bank of
//! HMM event classifiers with agent/patient role assignment, and the winning
//! hypotheses are rendered through sentential templates with referring
//! expressions, adjectives, adverbs, and directional adjuncts.

pub mod classes;
pub mod features;
pub mod hmm;
pub mod ingest;
pub mod nlg;
pub mod pipeline;
pub mod posture;
pub mod tracker;

pub use ingest::{BBox, Detection, DetectionStream};
pub use tracker::{CoherenceParams, Track};
