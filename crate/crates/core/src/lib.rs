//! Pronunciation tutoring engine: per-phoneme forced-alignment scoring with
//! Likert feedback, speaker adaptation, graduated-interval scheduling,
//! game-session state machines, persistence, an HTTP API, and study
//! analytics.

pub mod adaptation;
pub mod aligner;
pub mod analytics;
pub mod curriculum;
pub mod dsp;
pub mod phoneme;
pub mod scheduler;
pub mod session;
pub mod config;
pub mod engine;
pub mod store;
pub mod simulate;
pub mod service;
