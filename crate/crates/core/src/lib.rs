//! Soil-moisture time series analysis: ingest, weekly segmentation, prompt
//! construction, the report wire format, rule-based detectors, a synthetic
//! corpus generator and event-level evaluation.

pub mod detect;
pub mod eval;
pub mod ingest;
pub mod kv;
pub mod prompt;
pub mod report;
pub mod segment;
pub mod synth;
pub mod types;

pub use types::*;
