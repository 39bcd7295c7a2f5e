//! Toolkit for CLEVR-style scene-graph question answering with natural
//! language explanations: file ingestion, a traced program interpreter,
//! template-based explanation synthesis, corrupted-explanation probes,
//! multi-reference NLG metrics, and dataset statistics.

pub mod analysis;
pub mod explainer;
pub mod gen;
pub mod ingest;
pub mod interpreter;
pub mod metrics;
pub mod model;
pub mod probes;
pub mod stats;
