//! Core library for turning unlabeled triaxial-accelerometer recordings into
//! class annotations.
//!
//! The pipeline stages map onto the top-level modules:
//!
//! - [`ingest`]: dataset adapters, resampling, windowing, subject-wise splits
//! - [`numeric`]: dense math, distance metrics, FFT, optimizers, gradient checks
//! - [`ssl`]: contrastive pre-training (time-domain and time/frequency dual
//!   encoder) and embedding extraction
//! - [`projection`]: t-SNE and PCA reduction of embeddings to prompt dimension
//! - [`prompt`]: example selection, prompt template rendering, response
//!   parsing, and the deterministic nearest-example oracle annotator
//! - [`llm`]: chat-completion HTTP client with rate limiting, retries, resume,
//!   and an in-process mock backend
//! - [`eval`]: accuracy, confusion, response bias, consistency and cost reports
//! - [`synth`]: synthetic signal generator used by tests and demos

pub mod eval;
pub mod ingest;
pub mod llm;
pub mod numeric;
pub mod projection;
pub mod prompt;
pub mod ssl;
pub mod synth;
