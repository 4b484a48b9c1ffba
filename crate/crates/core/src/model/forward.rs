use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{AttentionParams, CellParams, ModelParams};
use super::{Model, ModelConfig};
use crate::corpus::{BOS, EOS, PAD};
use crate::error::{G2pError, Result};
use crate::scalar::Scalar;
use crate::tensor::{Graph, NodeId, Tensor};

/// Source ids (language token included when used) and phoneme ids without
/// BOS/EOS.
pub type Pair = (Vec<usize>, Vec<usize>);

/// A batch padded to rectangular shape with [`PAD`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedBatch {
    /// `[B][S]`
    pub src: Vec<Vec<usize>>,
    pub src_len: Vec<usize>,
    /// Decoder inputs `BOS y1 .. yn`, `[B][T]`.
    pub dec_in: Vec<Vec<usize>>,
    /// Decoder targets `y1 .. yn EOS`, `[B][T]`.
    pub dec_out: Vec<Vec<usize>>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Number of non-pad target positions.
    pub fn target_tokens(&self) -> usize {
        self.dec_out.iter().flatten().filter(|&&t| t != PAD).count()
    }
}

pub fn pad_batch(pairs: &[Pair]) -> Result<PaddedBatch> {
    if pairs.is_empty() {
        return Err(G2pError::EmptyInput("batch"));
    }
    if pairs.iter().any(|(s, _)| content_len(s) == 0) {
        return Err(G2pError::EmptySource);
    }
    let s_max = pairs.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
    let t_max = pairs.iter().map(|(_, t)| t.len() + 1).max().unwrap_or(1);
    let pad_to = |v: Vec<usize>, n: usize| {
        let mut v = v;
        v.resize(n, PAD);
        v
    };
    let mut batch = PaddedBatch {
        src: Vec::new(),
        src_len: Vec::new(),
        dec_in: Vec::new(),
        dec_out: Vec::new(),
    };
    for (s, t) in pairs {
        batch.src_len.push(content_len(s));
        batch.src.push(pad_to(s.clone(), s_max));
        let mut din = vec![BOS];
        din.extend_from_slice(t);
        batch.dec_in.push(pad_to(din, t_max));
        let mut dout = t.clone();
        dout.push(EOS);
        batch.dec_out.push(pad_to(dout, t_max));
    }
    Ok(batch)
}

/// Length without trailing padding; a PAD suffix is never encoded.
pub(crate) fn content_len(src: &[usize]) -> usize {
    src.iter().rposition(|&t| t != PAD).map_or(0, |i| i + 1)
}

fn column(rows: &[Vec<usize>], t: usize) -> Vec<usize> {
    rows.iter().map(|r| r[t]).collect()
}

/// Inverted dropout: zeroes each element with probability `p` and scales
/// survivors by `1 / (1 - p)`.
fn dropout<T: Scalar>(g: &mut Graph<T>, x: NodeId, p: f64, rng: &mut ChaCha8Rng) -> Result<NodeId> {
    let keep = T::from_f64_lossy(1.0 / (1.0 - p));
    let shape = g.value(x).shape().to_vec();
    let n: usize = shape.iter().product();
    let mask = (0..n)
        .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
        .collect();
    let mask = g.constant(Tensor::new(shape, mask)?);
    g.mul(x, mask)
}

pub(crate) fn cell_step<T: Scalar>(
    g: &mut Graph<T>,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    cell: &CellParams<NodeId>,
) -> Result<(NodeId, NodeId)> {
    let xi = g.matmul_nt(x, cell.input_weights)?;
    let hh = g.matmul_nt(h, cell.recurrent_weights)?;
    let sum = g.add(xi, hh)?;
    let gates = g.add_row(sum, cell.bias)?;
    let hidden = g.value(c).shape()[1];
    let i = g.slice_cols(gates, 0, hidden)?;
    let i = g.sigmoid(i)?;
    let f = g.slice_cols(gates, hidden, hidden)?;
    let f = g.sigmoid(f)?;
    let cand = g.slice_cols(gates, 2 * hidden, hidden)?;
    let cand = g.tanh(cand)?;
    let o = g.slice_cols(gates, 3 * hidden, hidden)?;
    let o = g.sigmoid(o)?;
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_new = g.add(keep, write)?;
    let squashed = g.tanh(c_new)?;
    let h_new = g.mul(o, squashed)?;
    Ok((h_new, c_new))
}

struct Direction {
    outputs: Vec<NodeId>,
    h: NodeId,
    c: NodeId,
}

/// Runs one encoder direction. Rows whose position `t` is padding keep
/// their previous state, so padding never leaks into either direction.
fn run_direction<T: Scalar>(
    g: &mut Graph<T>,
    cell: &CellParams<NodeId>,
    inputs: &[NodeId],
    valid: &[Vec<bool>],
    hidden: usize,
    reverse: bool,
) -> Result<Direction> {
    let b = valid[0].len();
    let mut h = g.constant(Tensor::zeros(&[b, hidden]));
    let mut c = g.constant(Tensor::zeros(&[b, hidden]));
    let mut outputs = vec![h; inputs.len()];
    let order: Vec<usize> = if reverse {
        (0..inputs.len()).rev().collect()
    } else {
        (0..inputs.len()).collect()
    };
    for t in order {
        let (mut hn, mut cn) = cell_step(g, inputs[t], h, c, cell)?;
        if valid[t].iter().any(|&v| !v) {
            hn = g.select_rows(&valid[t], hn, h)?;
            cn = g.select_rows(&valid[t], cn, c)?;
        }
        h = hn;
        c = cn;
        outputs[t] = h;
    }
    Ok(Direction { outputs, h, c })
}

pub(crate) struct GraphEncoding {
    /// `[S × B × h]`
    pub memory: NodeId,
    /// Row-major `[B × S]`, true at real (non-pad) positions.
    pub mask: Vec<bool>,
    pub final_h: Vec<NodeId>,
    pub final_c: Vec<NodeId>,
}

pub(crate) fn encode_graph<T: Scalar>(
    g: &mut Graph<T>,
    p: &ModelParams<NodeId>,
    cfg: &ModelConfig,
    src: &[Vec<usize>],
    src_len: &[usize],
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<GraphEncoding> {
    let s_len = src.first().map_or(0, Vec::len);
    if s_len == 0 || src_len.contains(&0) {
        return Err(G2pError::EmptySource);
    }
    let valid: Vec<Vec<bool>> = (0..s_len).map(|t| src_len.iter().map(|&n| t < n).collect()).collect();
    let mut inputs = Vec::with_capacity(s_len);
    for t in 0..s_len {
        inputs.push(g.embedding(p.src_embedding, &column(src, t))?);
    }
    let hd = cfg.hidden_size / 2;
    let mut final_h = Vec::new();
    let mut final_c = Vec::new();
    for (l, layer) in p.encoder.iter().enumerate() {
        let fwd = run_direction(g, &layer.forward, &inputs, &valid, hd, false)?;
        let bwd = run_direction(g, &layer.backward, &inputs, &valid, hd, true)?;
        let mut outs = Vec::with_capacity(s_len);
        for t in 0..s_len {
            let mut o = g.concat_cols(&[fwd.outputs[t], bwd.outputs[t]])?;
            if l + 1 < p.encoder.len() && cfg.dropout > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    o = dropout(g, o, cfg.dropout, r)?;
                }
            }
            outs.push(o);
        }
        final_h.push(g.concat_cols(&[fwd.h, bwd.h])?);
        final_c.push(g.concat_cols(&[fwd.c, bwd.c])?);
        inputs = outs;
    }
    let memory = g.stack(&inputs)?;
    let b = src.len();
    let mask = (0..b).flat_map(|bi| (0..s_len).map(move |t| (bi, t))).map(|(bi, t)| t < src_len[bi]).collect();
    Ok(GraphEncoding {
        memory,
        mask,
        final_h,
        final_c,
    })
}

pub(crate) struct GraphDecoderState {
    pub h: Vec<NodeId>,
    pub c: Vec<NodeId>,
    /// Previous attentional state (input feeding).
    pub feed: NodeId,
}

pub(crate) struct StepOutput {
    pub logits: NodeId,
    pub attn: NodeId,
    pub state: GraphDecoderState,
}

/// Bilinear attention: returns (context, weights).
pub(crate) fn attention_graph<T: Scalar>(
    g: &mut Graph<T>,
    att: &AttentionParams<NodeId>,
    top: NodeId,
    memory: NodeId,
    mask: &[bool],
) -> Result<(NodeId, NodeId)> {
    let q = g.matmul(top, att.score_weights)?;
    let scores = g.attn_scores(q, memory)?;
    let weights = g.masked_softmax(scores, mask)?;
    let context = g.attn_context(weights, memory)?;
    Ok((context, weights))
}

pub(crate) fn decoder_step_graph<T: Scalar>(
    g: &mut Graph<T>,
    p: &ModelParams<NodeId>,
    cfg: &ModelConfig,
    prev: &[usize],
    st: &GraphDecoderState,
    memory: NodeId,
    mask: &[bool],
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<StepOutput> {
    let emb = g.embedding(p.tgt_embedding, prev)?;
    let mut input = if cfg.input_feeding {
        g.concat_cols(&[emb, st.feed])?
    } else {
        emb
    };
    let mut h = Vec::with_capacity(p.decoder.len());
    let mut c = Vec::with_capacity(p.decoder.len());
    for (l, cell) in p.decoder.iter().enumerate() {
        let (hn, cn) = cell_step(g, input, st.h[l], st.c[l], cell)?;
        h.push(hn);
        c.push(cn);
        input = hn;
        if l + 1 < p.decoder.len() && cfg.dropout > 0.0 {
            if let Some(r) = rng.as_deref_mut() {
                input = dropout(g, input, cfg.dropout, r)?;
            }
        }
    }
    let top = *h.last().expect("at least one decoder layer");
    let (context, attn) = attention_graph(g, &p.attention, top, memory, mask)?;
    let joined = g.concat_cols(&[context, top])?;
    let proj = g.matmul_nt(joined, p.attention.output_weights)?;
    let proj = g.add_row(proj, p.attention.output_bias)?;
    let attentional = g.tanh(proj)?;
    let logits = g.matmul_nt(attentional, p.generator_weights)?;
    let logits = g.add_row(logits, p.generator_bias)?;
    Ok(StepOutput {
        logits,
        attn,
        state: GraphDecoderState {
            h,
            c,
            feed: attentional,
        },
    })
}

/// Teacher-forced mean cross-entropy over all non-pad target positions.
pub(crate) fn forward_loss<T: Scalar>(
    g: &mut Graph<T>,
    p: &ModelParams<NodeId>,
    cfg: &ModelConfig,
    batch: &PaddedBatch,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<NodeId> {
    let enc = encode_graph(g, p, cfg, &batch.src, &batch.src_len, rng.as_deref_mut())?;
    let b = batch.len();
    let mut state = GraphDecoderState {
        h: enc.final_h.clone(),
        c: enc.final_c.clone(),
        feed: g.constant(Tensor::zeros(&[b, cfg.hidden_size])),
    };
    let t_len = batch.dec_in[0].len();
    let mut logits = Vec::with_capacity(t_len);
    let mut targets = Vec::with_capacity(t_len * b);
    for t in 0..t_len {
        let out = decoder_step_graph(
            g,
            p,
            cfg,
            &column(&batch.dec_in, t),
            &state,
            enc.memory,
            &enc.mask,
            rng.as_deref_mut(),
        )?;
        logits.push(out.logits);
        targets.extend(column(&batch.dec_out, t));
        state = out.state;
    }
    let all = g.concat_rows(&logits)?;
    g.cross_entropy(all, &targets, PAD)
}

/// Encoder output for one source sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSource<T> {
    /// `[S × h]`, forward and backward halves concatenated per position.
    pub annotations: Tensor<T>,
    /// Decoder initial hidden state per layer, `[h]` each.
    pub final_h: Vec<Tensor<T>>,
    pub final_c: Vec<Tensor<T>>,
}

impl<T: Scalar> EncodedSource<T> {
    pub fn len(&self) -> usize {
        self.annotations.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Recurrent state carried between decoder steps for one hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState<T> {
    pub h: Vec<Tensor<T>>,
    pub c: Vec<Tensor<T>>,
    pub feed: Tensor<T>,
    /// Attention weights of the step that produced this state.
    pub attention: Vec<T>,
}

/// Stateful inference helper that binds the weights into a graph once and
/// reuses it for every step.
pub struct Decoder<'m, T: Scalar> {
    model: &'m Model<T>,
    graph: Graph<T>,
    bound: ModelParams<NodeId>,
    base_len: usize,
}

fn rows_to_matrix<T: Scalar>(rows: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let cols = rows[0].len();
    let data: Vec<T> = rows.iter().flat_map(|r| r.data().iter().copied()).collect();
    Tensor::new(vec![rows.len(), cols], data)
}

fn split_rows<T: Scalar>(m: &Tensor<T>) -> Vec<Tensor<T>> {
    let (rows, _) = m.matrix_dims().expect("matrix");
    (0..rows).map(|r| Tensor::vector(m.row(r).to_vec())).collect()
}

impl<'m, T: Scalar> Decoder<'m, T> {
    pub fn new(model: &'m Model<T>) -> Self {
        let mut graph = Graph::new();
        let bound = model.params.bind(&mut graph, false);
        let base_len = graph.len();
        Self {
            model,
            graph,
            bound,
            base_len,
        }
    }

    pub fn model(&self) -> &Model<T> {
        self.model
    }

    pub fn encode(&mut self, src_ids: &[usize]) -> Result<EncodedSource<T>> {
        let src_ids = &src_ids[..content_len(src_ids)];
        if src_ids.is_empty() {
            return Err(G2pError::EmptySource);
        }
        let cfg = &self.model.config;
        let g = &mut self.graph;
        let enc = encode_graph(g, &self.bound, cfg, &[src_ids.to_vec()], &[src_ids.len()], None)?;
        let h = cfg.hidden_size;
        let annotations = g.value(enc.memory).clone().reshape(&[src_ids.len(), h])?;
        let as_vec = |g: &Graph<T>, id: NodeId| Tensor::vector(g.value(id).data().to_vec());
        let out = EncodedSource {
            annotations,
            final_h: enc.final_h.iter().map(|&id| as_vec(g, id)).collect(),
            final_c: enc.final_c.iter().map(|&id| as_vec(g, id)).collect(),
        };
        g.truncate(self.base_len);
        Ok(out)
    }

    pub fn initial_state(&self, encoded: &EncodedSource<T>) -> DecoderState<T> {
        self.model.initial_state(encoded)
    }

    /// Log-probabilities over the target vocabulary and the successor state
    /// for each `(prev_token, state)` row.
    pub fn step(
        &mut self,
        prev_tokens: &[usize],
        states: &[&DecoderState<T>],
        encoded: &EncodedSource<T>,
    ) -> Result<Vec<(Vec<T>, DecoderState<T>)>> {
        if prev_tokens.len() != states.len() || states.is_empty() {
            return Err(G2pError::InvalidArgument("one state per previous token required".into()));
        }
        let cfg = &self.model.config;
        let b = states.len();
        let (s_len, h) = (encoded.len(), cfg.hidden_size);
        let g = &mut self.graph;

        let mut mem = Vec::with_capacity(s_len * b * h);
        for s in 0..s_len {
            for _ in 0..b {
                mem.extend_from_slice(encoded.annotations.row(s));
            }
        }
        let memory = g.constant(Tensor::new(vec![s_len, b, h], mem)?);
        let mask = vec![true; b * s_len];
        let layers = cfg.dec_layers;
        let mut gs = GraphDecoderState {
            h: Vec::with_capacity(layers),
            c: Vec::with_capacity(layers),
            feed: g.constant(rows_to_matrix(&states.iter().map(|s| &s.feed).collect::<Vec<_>>())?),
        };
        for l in 0..layers {
            gs.h.push(g.constant(rows_to_matrix(&states.iter().map(|s| &s.h[l]).collect::<Vec<_>>())?));
            gs.c.push(g.constant(rows_to_matrix(&states.iter().map(|s| &s.c[l]).collect::<Vec<_>>())?));
        }
        let out = decoder_step_graph(g, &self.bound, cfg, prev_tokens, &gs, memory, &mask, None)?;
        let log_probs = g.log_softmax(out.logits)?;

        let lp = split_rows(g.value(log_probs));
        let feed = split_rows(g.value(out.state.feed));
        let attn = split_rows(g.value(out.attn));
        let hs: Vec<Vec<Tensor<T>>> = out.state.h.iter().map(|&id| split_rows(g.value(id))).collect();
        let cs: Vec<Vec<Tensor<T>>> = out.state.c.iter().map(|&id| split_rows(g.value(id))).collect();
        let result = (0..b)
            .map(|r| {
                (
                    lp[r].data().to_vec(),
                    DecoderState {
                        h: (0..layers).map(|l| hs[l][r].clone()).collect(),
                        c: (0..layers).map(|l| cs[l][r].clone()).collect(),
                        feed: feed[r].clone(),
                        attention: attn[r].data().to_vec(),
                    },
                )
            })
            .collect();
        g.truncate(self.base_len);
        Ok(result)
    }
}

/// Output of [`attend`].
#[derive(Clone, Debug, PartialEq)]
pub struct Attended<T> {
    pub context: Tensor<T>,
    pub weights: Vec<T>,
    /// `tanh(W_out · [context; decoder_top] + b_out)`
    pub attentional: Tensor<T>,
}

/// General (bilinear) global attention of one decoder state over the
/// annotations `[S × h]`.
pub fn attend<T: Scalar>(
    decoder_top: &Tensor<T>,
    annotations: &Tensor<T>,
    params: &AttentionParams<Tensor<T>>,
) -> Result<Attended<T>> {
    let (s_len, h) = annotations.matrix_dims().ok_or(G2pError::EmptyInput("annotations"))?;
    if s_len == 0 {
        return Err(G2pError::EmptyInput("annotations"));
    }
    if decoder_top.len() != h {
        return Err(G2pError::Shape {
            op: "attend",
            left: decoder_top.shape().to_vec(),
            right: annotations.shape().to_vec(),
        });
    }
    let mut g = Graph::new();
    let att = AttentionParams {
        score_weights: g.constant(params.score_weights.clone()),
        output_weights: g.constant(params.output_weights.clone()),
        output_bias: g.constant(params.output_bias.clone()),
    };
    let top = g.constant(decoder_top.clone().reshape(&[1, h])?);
    let memory = g.constant(annotations.clone().reshape(&[s_len, 1, h])?);
    let (context, weights) = attention_graph(&mut g, &att, top, memory, &vec![true; s_len])?;
    let joined = g.concat_cols(&[context, top])?;
    let proj = g.matmul_nt(joined, att.output_weights)?;
    let proj = g.add_row(proj, att.output_bias)?;
    let attentional = g.tanh(proj)?;
    Ok(Attended {
        context: g.value(context).clone().reshape(&[h])?,
        weights: g.value(weights).data().to_vec(),
        attentional: g.value(attentional).clone().reshape(&[h])?,
    })
}
