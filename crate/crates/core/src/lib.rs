//! Multilingual grapheme-to-phoneme conversion.
//!
//! A single attentional encoder-decoder is shared across languages; the
//! source language is identified by an artificial `<xxx>` token prepended to
//! the spelling. The crate covers lexicon handling, a small reverse-mode
//! tensor engine, the recurrent model, n-best beam decoding, the PER / WER /
//! WER-100 metrics and embedding introspection.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the two
//! precisions used in practice.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod translate;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{G2pError, Result};
pub use model::{Model, ModelConfig};
pub use scalar::Scalar;
pub use tensor::{Graph, NodeId, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = model::Model<f32>;
pub type Model64 = model::Model<f64>;
pub type Params32 = model::ModelParams<Tensor<f32>>;
pub type Params64 = model::ModelParams<Tensor<f64>>;
