//! Decoding engine for small token-level language models.
//!
//! The crate builds up in layers: a probability substrate (`dist`), model
//! backends behind one trait (`lm`), baseline decoders (`strategies`), the
//! entropy-gated windowed-regeneration decoder (`reflection`), exact
//! sequence-level oracles (`oracle`), and a sweep harness (`harness`).

pub mod dist;
pub mod error;
pub mod harness;
pub mod lm;
pub mod oracle;
pub mod reflection;
pub mod seed;
pub mod strategies;
pub mod trace;
pub mod vocab;

pub use dist::{entropy, LogProb, NextTokenDistribution};
pub use error::Error;
pub use lm::{load_model, save_model, DirichletLm, LanguageModel, NGramLm, TableLm};
pub use trace::DecodeTrace;
pub use vocab::{TokenId, Vocabulary};
