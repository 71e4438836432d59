//! Cross-lingual voice conversion on phonetic posteriorgrams.
//!
//! The crate covers the full parameter-domain pipeline: waveform analysis
//! into MCEP / continuous log-F0 / band aperiodicity streams, loading and
//! merging per-language posteriorgram matrices, frame-wise regression
//! networks (feed-forward and bidirectional LSTM) trained from scratch,
//! adversarial training against a target-speech discriminator, and a
//! deterministic source-filter vocoder for resynthesis.

pub mod adversarial;
pub mod error;
pub mod eval;
pub mod features;
pub mod neural;
pub mod ppg;
pub mod vocoder;
pub mod wav;

pub use error::{Error, Result};
