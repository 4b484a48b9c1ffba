use rand::Rng;

use super::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::{Graph, NodeId, Tensor};

/// Weights of one LSTM cell. Gate blocks are stacked in the order
/// input, forget, cell candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams<P> {
    /// `[4h × in]`
    pub input_weights: P,
    /// `[4h × h]`
    pub recurrent_weights: P,
    /// `[4h]`
    pub bias: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer<P> {
    pub forward: CellParams<P>,
    pub backward: CellParams<P>,
}

/// Bilinear ("general") attention plus the attentional-state projection.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<P> {
    /// `[h × h]`
    pub score_weights: P,
    /// `[h × 2h]`, applied to `[context; decoder_top]`.
    pub output_weights: P,
    /// `[h]`
    pub output_bias: P,
}

/// Every trainable weight of the model. `P` is [`Tensor`] for stored
/// weights and [`NodeId`] once bound into a [`Graph`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<P> {
    pub src_embedding: P,
    pub tgt_embedding: P,
    pub encoder: Vec<EncoderLayer<P>>,
    pub decoder: Vec<CellParams<P>>,
    pub attention: AttentionParams<P>,
    pub generator_weights: P,
    pub generator_bias: P,
}

impl<P> CellParams<P> {
    fn map<'a, Q>(&'a self, prefix: &str, f: &mut impl FnMut(&str, &'a P) -> Q) -> CellParams<Q> {
        CellParams {
            input_weights: f(&format!("{prefix}.input_weights"), &self.input_weights),
            recurrent_weights: f(&format!("{prefix}.recurrent_weights"), &self.recurrent_weights),
            bias: f(&format!("{prefix}.bias"), &self.bias),
        }
    }

    fn push_mut<'a>(&'a mut self, out: &mut Vec<&'a mut P>) {
        out.push(&mut self.input_weights);
        out.push(&mut self.recurrent_weights);
        out.push(&mut self.bias);
    }
}

impl<P> ModelParams<P> {
    /// Structure-preserving map; `f` sees each tensor with its stable name,
    /// always in the same order.
    pub fn map<'a, Q>(&'a self, mut f: impl FnMut(&str, &'a P) -> Q) -> ModelParams<Q> {
        ModelParams {
            src_embedding: f("src_embedding", &self.src_embedding),
            tgt_embedding: f("tgt_embedding", &self.tgt_embedding),
            encoder: self
                .encoder
                .iter()
                .enumerate()
                .map(|(l, layer)| EncoderLayer {
                    forward: layer.forward.map(&format!("encoder.{l}.forward"), &mut f),
                    backward: layer.backward.map(&format!("encoder.{l}.backward"), &mut f),
                })
                .collect(),
            decoder: self
                .decoder
                .iter()
                .enumerate()
                .map(|(l, cell)| cell.map(&format!("decoder.{l}"), &mut f))
                .collect(),
            attention: AttentionParams {
                score_weights: f("attention.score_weights", &self.attention.score_weights),
                output_weights: f("attention.output_weights", &self.attention.output_weights),
                output_bias: f("attention.output_bias", &self.attention.output_bias),
            },
            generator_weights: f("generator.weights", &self.generator_weights),
            generator_bias: f("generator.bias", &self.generator_bias),
        }
    }

    pub fn named(&self) -> Vec<(String, &P)> {
        let mut out = Vec::new();
        self.map(|name, p| out.push((name.to_string(), p)));
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.named().into_iter().map(|(n, _)| n).collect()
    }

    /// Mutable references in the same order as [`ModelParams::named`].
    pub fn values_mut(&mut self) -> Vec<&mut P> {
        let mut out = Vec::new();
        out.push(&mut self.src_embedding);
        out.push(&mut self.tgt_embedding);
        for layer in &mut self.encoder {
            layer.forward.push_mut(&mut out);
            layer.backward.push_mut(&mut out);
        }
        for cell in &mut self.decoder {
            cell.push_mut(&mut out);
        }
        out.push(&mut self.attention.score_weights);
        out.push(&mut self.attention.output_weights);
        out.push(&mut self.attention.output_bias);
        out.push(&mut self.generator_weights);
        out.push(&mut self.generator_bias);
        out
    }

    /// Rebuilds this structure from values listed in [`ModelParams::named`] order.
    pub fn with_values<Q>(&self, values: Vec<Q>) -> Option<ModelParams<Q>> {
        let expected = self.named().len();
        if values.len() != expected {
            return None;
        }
        let mut it = values.into_iter();
        Some(self.map(|_, _| it.next().expect("length checked")))
    }
}

impl<T: Scalar> ModelParams<Tensor<T>> {
    /// Expected shape of every tensor, in `named` order.
    pub fn shapes(config: &ModelConfig) -> ModelParams<Vec<usize>> {
        let h = config.hidden_size;
        let hd = h / 2;
        let cell = |input: usize, hidden: usize| CellParams {
            input_weights: vec![4 * hidden, input],
            recurrent_weights: vec![4 * hidden, hidden],
            bias: vec![4 * hidden],
        };
        let dec_in0 = config.tgt_embed + if config.input_feeding { h } else { 0 };
        ModelParams {
            src_embedding: vec![config.src_vocab_size, config.src_embed],
            tgt_embedding: vec![config.tgt_vocab_size, config.tgt_embed],
            encoder: (0..config.enc_layers)
                .map(|l| {
                    let input = if l == 0 { config.src_embed } else { h };
                    EncoderLayer {
                        forward: cell(input, hd),
                        backward: cell(input, hd),
                    }
                })
                .collect(),
            decoder: (0..config.dec_layers)
                .map(|l| cell(if l == 0 { dec_in0 } else { h }, h))
                .collect(),
            attention: AttentionParams {
                score_weights: vec![h, h],
                output_weights: vec![h, 2 * h],
                output_bias: vec![h],
            },
            generator_weights: vec![config.tgt_vocab_size, h],
            generator_bias: vec![config.tgt_vocab_size],
        }
    }

    /// Weights from `U(-scale, scale)`, biases zero, forget-gate biases 1.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, scale: f64, rng: &mut R) -> Self {
        Self::shapes(config).map(|name, shape| {
            if name.ends_with("bias") {
                let mut b = Tensor::zeros(shape);
                if name.starts_with("encoder") || name.starts_with("decoder") {
                    let hidden = shape[0] / 4;
                    for v in &mut b.data_mut()[hidden..2 * hidden] {
                        *v = T::one();
                    }
                }
                b
            } else {
                Tensor::uniform(shape, -scale, scale, rng)
            }
        })
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<Tensor<U>> {
        self.map(|_, t| t.cast())
    }

    pub fn num_values(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    /// Inserts every tensor into `graph`, as differentiable leaves when
    /// `trainable`, otherwise as constants.
    pub fn bind(&self, graph: &mut Graph<T>, trainable: bool) -> ModelParams<NodeId> {
        self.map(|_, t| {
            if trainable {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelConfig {
        ModelConfig::tiny(7, 9, 6)
    }

    #[test]
    fn names_are_unique_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelParams::<Tensor<f32>>::init(&tiny(), 0.1, &mut rng);
        let names = p.names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert_eq!(names[0], "src_embedding");
        assert_eq!(names[2], "encoder.0.forward.input_weights");
        assert_eq!(names.last().unwrap(), "generator.bias");
    }

    #[test]
    fn init_follows_conventions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = tiny();
        let p = ModelParams::<Tensor<f64>>::init(&cfg, 0.1, &mut rng);
        let hd = cfg.hidden_size / 2;
        let b = p.encoder[0].forward.bias.data();
        assert!(b[..hd].iter().all(|&v| v == 0.0));
        assert!(b[hd..2 * hd].iter().all(|&v| v == 1.0));
        assert!(b[2 * hd..].iter().all(|&v| v == 0.0));
        assert!(p.attention.output_bias.data().iter().all(|&v| v == 0.0));
        assert!(p.generator_bias.data().iter().all(|&v| v == 0.0));
        assert!(p.src_embedding.data().iter().all(|v| v.abs() <= 0.1));
        assert_eq!(p.encoder[1].forward.input_weights.shape(), [4 * hd, cfg.hidden_size]);
        assert_eq!(p.decoder[0].input_weights.shape(), [4 * cfg.hidden_size, cfg.tgt_embed + cfg.hidden_size]);
    }

    #[test]
    fn same_seed_same_weights_across_precisions() {
        let cfg = tiny();
        let a = ModelParams::<Tensor<f64>>::init(&cfg, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
        let b = ModelParams::<Tensor<f32>>::init(&cfg, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.cast::<f32>(), b);
    }

    #[test]
    fn values_mut_matches_named_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ModelParams::<Tensor<f64>>::init(&tiny(), 0.1, &mut rng);
        let shapes: Vec<Vec<usize>> = p.named().iter().map(|(_, t)| t.shape().to_vec()).collect();
        let mut_shapes: Vec<Vec<usize>> = p.values_mut().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, mut_shapes);
        let rebuilt = p.with_values(p.named().into_iter().map(|(_, t)| t.clone()).collect()).unwrap();
        assert_eq!(rebuilt, p);
    }
}
