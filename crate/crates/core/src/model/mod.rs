//! Attentional encoder-decoder: a stacked bidirectional LSTM encoder, a
//! stacked LSTM decoder with input feeding, bilinear global attention and a
//! softmax generator over the phoneme vocabulary.

mod forward;
mod params;
mod train;

#[cfg(test)]
mod oracle_tests;

pub use forward::{attend, pad_batch, Attended, Decoder, DecoderState, EncodedSource, PaddedBatch, Pair};
pub use params::{AttentionParams, CellParams, EncoderLayer, ModelParams};
pub use train::{
    encode_pairs, make_batches, train, EpochLog, EpochOutcome, LrDecay, Schedule, TrainOutcome,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{G2pError, Result};
use crate::scalar::Scalar;
use crate::tensor::{Graph, Tensor};

/// Uniform initialisation range for all weight matrices.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub src_embed: usize,
    pub tgt_embed: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub dropout: f64,
    /// Feed the previous attentional state into the first decoder layer.
    pub input_feeding: bool,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
}

impl ModelConfig {
    /// Default sizes: 2 layers, 150 hidden units, 150-dim embeddings.
    pub fn standard(src_vocab_size: usize, tgt_vocab_size: usize) -> Self {
        Self {
            hidden_size: 150,
            src_embed: 150,
            tgt_embed: 150,
            enc_layers: 2,
            dec_layers: 2,
            dropout: 0.3,
            input_feeding: true,
            src_vocab_size,
            tgt_vocab_size,
        }
    }

    /// Small configuration for tests: `hidden` units, embeddings of the same
    /// size, no dropout.
    pub fn tiny(src_vocab_size: usize, tgt_vocab_size: usize, hidden: usize) -> Self {
        Self {
            hidden_size: hidden,
            src_embed: hidden,
            tgt_embed: hidden,
            dropout: 0.0,
            ..Self::standard(src_vocab_size, tgt_vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("hidden_size", self.hidden_size),
            ("src_embed", self.src_embed),
            ("tgt_embed", self.tgt_embed),
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("src_vocab_size", self.src_vocab_size),
            ("tgt_vocab_size", self.tgt_vocab_size),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(G2pError::Config(format!("{name} must be at least 1")));
        }
        if self.hidden_size % 2 != 0 {
            return Err(G2pError::Config(format!(
                "hidden_size {} must be even to split across encoder directions",
                self.hidden_size
            )));
        }
        if self.enc_layers != self.dec_layers {
            return Err(G2pError::Config(
                "decoder is initialised from the encoder, so enc_layers must equal dec_layers".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(G2pError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Configuration plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<Tensor<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&config, INIT_SCALE, &mut rng);
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<Tensor<T>>) -> Result<Self> {
        config.validate()?;
        let expected = ModelParams::<Tensor<T>>::shapes(&config);
        for ((name, t), (_, shape)) in params.named().iter().zip(expected.named()) {
            if t.shape() != shape.as_slice() {
                return Err(G2pError::Config(format!(
                    "{name}: expected shape {shape:?}, found {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    /// Mean token cross-entropy of a batch without dropout or gradients.
    pub fn loss(&self, pairs: &[Pair]) -> Result<T> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g, false);
        let batch = pad_batch(pairs)?;
        let loss = forward::forward_loss(&mut g, &bound, &self.config, &batch, None)?;
        Ok(g.value(loss).item())
    }

    /// Loss and per-parameter gradients (in `named` order) for one batch.
    /// Dropout is applied when `dropout_rng` is given.
    pub fn loss_and_grads(
        &self,
        pairs: &[Pair],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(T, Vec<Tensor<T>>)> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g, true);
        let batch = pad_batch(pairs)?;
        let loss = forward::forward_loss(&mut g, &bound, &self.config, &batch, dropout_rng)?;
        let mut grads = g.backward(loss)?;
        let values: Vec<Tensor<T>> = bound
            .named()
            .into_iter()
            .zip(self.params.named())
            .map(|((_, &id), (_, t))| grads.take(id).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        Ok((g.value(loss).item(), values))
    }

    /// Inference session over these weights.
    pub fn decoder(&self) -> Decoder<'_, T> {
        Decoder::new(self)
    }

    /// Runs the encoder on one source sequence (no dropout).
    pub fn encode(&self, src_ids: &[usize]) -> Result<EncodedSource<T>> {
        self.decoder().encode(src_ids)
    }

    /// Decoder state before the first step.
    pub fn initial_state(&self, encoded: &EncodedSource<T>) -> DecoderState<T> {
        DecoderState {
            h: encoded.final_h.clone(),
            c: encoded.final_c.clone(),
            feed: Tensor::zeros(&[self.config.hidden_size]),
            attention: Vec::new(),
        }
    }

    /// One decoder step for a single hypothesis.
    pub fn decode_step(
        &self,
        prev_token: usize,
        state: &DecoderState<T>,
        encoded: &EncodedSource<T>,
    ) -> Result<(Vec<T>, DecoderState<T>)> {
        let mut out = self.decoder().step(&[prev_token], &[state], encoded)?;
        Ok(out.pop().expect("one row in, one row out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_sizes() {
        let c = ModelConfig::standard(100, 80);
        assert_eq!(
            (c.hidden_size, c.src_embed, c.tgt_embed, c.enc_layers, c.dec_layers),
            (150, 150, 150, 2, 2)
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::tiny(5, 5, 8);
        c.hidden_size = 7;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny(5, 5, 8);
        c.tgt_vocab_size = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny(5, 5, 8);
        c.dec_layers = 1;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny(5, 5, 8);
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn from_params_checks_shapes() {
        let m = Model::<f32>::new(ModelConfig::tiny(6, 6, 4), 0).unwrap();
        let other = ModelConfig::tiny(7, 6, 4);
        assert!(Model::from_params(other, m.params.clone()).is_err());
        assert!(Model::from_params(m.config.clone(), m.params).is_ok());
    }
}
