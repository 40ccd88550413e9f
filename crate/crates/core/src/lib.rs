//! Morphology-aware neural named-entity recognition for agglutinative languages.

pub mod ablation;
pub mod archive;
pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod embeddings;
pub mod error;
pub mod evaluator;
pub mod features;
pub mod model;
pub mod network;
pub mod synth;
pub mod trainer;

pub use archive::{ModelArchive, TrainingMeta};
pub use corpus::{Sentence, Token, Vocabulary};
pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
