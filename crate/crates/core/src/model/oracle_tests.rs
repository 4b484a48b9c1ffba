//! Scalar reference implementations written with plain loops, compared
//! against the graph-based model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{attention_graph, content_len, decoder_step_graph, encode_graph, GraphDecoderState};
use super::*;
use crate::corpus::{BOS, EOS, PAD};
use crate::tensor::{log_sum_exp, Graph, Tensor};

type Vec2 = Vec<Vec<f64>>;

fn mat(t: &Tensor<f64>) -> Vec2 {
    let (r, _) = t.matrix_dims().unwrap();
    (0..r).map(|i| t.row(i).to_vec()).collect()
}

fn matvec(w: &Tensor<f64>, x: &[f64]) -> Vec<f64> {
    mat(w).iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn cell(p: &CellParams<Tensor<f64>>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let a = matvec(&p.input_weights, x);
    let r = matvec(&p.recurrent_weights, h);
    let z: Vec<f64> = (0..4 * n).map(|k| a[k] + r[k] + p.bias.data()[k]).collect();
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for j in 0..n {
        let i = sig(z[j]);
        let f = sig(z[n + j]);
        let g = z[2 * n + j].tanh();
        let o = sig(z[3 * n + j]);
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

struct OracleEncoding {
    annotations: Vec2,
    h: Vec2,
    c: Vec2,
}

fn oracle_encode(m: &Model<f64>, src: &[usize]) -> OracleEncoding {
    let hd = m.config.hidden_size / 2;
    let mut inputs: Vec2 = src.iter().map(|&i| m.params.src_embedding.row(i).to_vec()).collect();
    let (mut fh, mut fc) = (Vec::new(), Vec::new());
    for layer in &m.params.encoder {
        let s = inputs.len();
        let mut fwd = vec![vec![]; s];
        let mut bwd = vec![vec![]; s];
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for t in 0..s {
            (h, c) = cell(&layer.forward, &inputs[t], &h, &c);
            fwd[t] = h.clone();
        }
        let (hf, cf) = (h, c);
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for t in (0..s).rev() {
            (h, c) = cell(&layer.backward, &inputs[t], &h, &c);
            bwd[t] = h.clone();
        }
        fh.push([hf, h].concat());
        fc.push([cf, c].concat());
        inputs = (0..s).map(|t| [fwd[t].clone(), bwd[t].clone()].concat()).collect();
    }
    OracleEncoding {
        annotations: inputs,
        h: fh,
        c: fc,
    }
}

struct OracleState {
    h: Vec2,
    c: Vec2,
    feed: Vec<f64>,
}

/// Returns (weights, context, attentional state).
fn oracle_attend(att: &AttentionParams<Tensor<f64>>, top: &[f64], ann: &Vec2) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = mat(&att.score_weights);
    let n = top.len();
    let scores: Vec<f64> = ann
        .iter()
        .map(|a| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += top[i] * w[i][j] * a[j];
                }
            }
            s
        })
        .collect();
    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
    let weights: Vec<f64> = scores.iter().map(|s| (s - mx).exp() / z).collect();
    let mut ctx = vec![0.0; n];
    for (a, wt) in ann.iter().zip(&weights) {
        for j in 0..n {
            ctx[j] += wt * a[j];
        }
    }
    let joined = [ctx.clone(), top.to_vec()].concat();
    let out: Vec<f64> = matvec(&att.output_weights, &joined)
        .iter()
        .zip(att.output_bias.data())
        .map(|(a, b)| (a + b).tanh())
        .collect();
    (weights, ctx, out)
}

fn oracle_step(m: &Model<f64>, prev: usize, st: &OracleState, ann: &Vec2) -> (Vec<f64>, OracleState) {
    let mut x = m.params.tgt_embedding.row(prev).to_vec();
    if m.config.input_feeding {
        x.extend_from_slice(&st.feed);
    }
    let (mut hs, mut cs) = (Vec::new(), Vec::new());
    for (l, p) in m.params.decoder.iter().enumerate() {
        let (h, c) = cell(p, &x, &st.h[l], &st.c[l]);
        x = h.clone();
        hs.push(h);
        cs.push(c);
    }
    let (_, _, att) = oracle_attend(&m.params.attention, hs.last().unwrap(), ann);
    let logits: Vec<f64> = matvec(&m.params.generator_weights, &att)
        .iter()
        .zip(m.params.generator_bias.data())
        .map(|(a, b)| a + b)
        .collect();
    let lse = log_sum_exp(&logits);
    (
        logits.iter().map(|l| l - lse).collect(),
        OracleState {
            h: hs,
            c: cs,
            feed: att,
        },
    )
}

fn oracle_nll(m: &Model<f64>, src: &[usize], tgt: &[usize]) -> (f64, usize) {
    let enc = oracle_encode(m, src);
    let mut st = OracleState {
        h: enc.h.clone(),
        c: enc.c.clone(),
        feed: vec![0.0; m.config.hidden_size],
    };
    let mut prev = BOS;
    let mut nll = 0.0;
    for &y in tgt.iter().chain([EOS].iter()) {
        let (lp, next) = oracle_step(m, prev, &st, &enc.annotations);
        nll -= lp[y];
        st = next;
        prev = y;
    }
    (nll, tgt.len() + 1)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_model(vs: usize, vt: usize, hidden: usize, seed: u64) -> Model<f64> {
    let mut m = Model::<f64>::new(ModelConfig::tiny(vs, vt, hidden), seed).unwrap();
    // Larger weights than the default init exercise the nonlinearities.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
    for t in m.params.values_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-0.6..0.6);
        }
    }
    m
}

fn random_ids(rng: &mut ChaCha8Rng, n: usize, vocab: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(4..vocab)).collect()
}

#[test]
fn encoder_matches_scalar_oracle() {
    let m = random_model(9, 7, 6, 1);
    let src = [4, 7, 5, 8];
    let got = m.encode(&src).unwrap();
    let want = oracle_encode(&m, &src);
    assert_eq!(got.annotations.shape(), [4, 6]);
    for (t, row) in want.annotations.iter().enumerate() {
        assert!(max_abs_diff(got.annotations.row(t), row) < 1e-10);
    }
    for l in 0..2 {
        assert!(max_abs_diff(got.final_h[l].data(), &want.h[l]) < 1e-10);
        assert!(max_abs_diff(got.final_c[l].data(), &want.c[l]) < 1e-10);
    }
}

#[test]
fn decode_steps_match_scalar_oracle() {
    for feeding in [true, false] {
        let mut m = random_model(8, 6, 4, 2);
        if !feeding {
            m.config.input_feeding = false;
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            m.params = ModelParams::init(&m.config, 0.5, &mut rng);
        }
        let src = [5, 4, 6];
        let enc = m.encode(&src).unwrap();
        let oenc = oracle_encode(&m, &src);
        let mut st = m.initial_state(&enc);
        let mut ost = OracleState {
            h: oenc.h.clone(),
            c: oenc.c.clone(),
            feed: vec![0.0; 4],
        };
        for prev in [BOS, 4, 5, 3] {
            let (lp, next) = m.decode_step(prev, &st, &enc).unwrap();
            let (olp, onext) = oracle_step(&m, prev, &ost, &oenc.annotations);
            assert!(max_abs_diff(&lp, &olp) < 1e-10, "feeding={feeding}");
            assert!(max_abs_diff(next.feed.data(), &onext.feed) < 1e-10);
            st = next;
            ost = onext;
        }
    }
}

#[test]
fn batched_steps_equal_single_steps() {
    let m = random_model(8, 6, 4, 4);
    let enc = m.encode(&[4, 5, 6, 7]).unwrap();
    let s0 = m.initial_state(&enc);
    let (_, s1) = m.decode_step(BOS, &s0, &enc).unwrap();
    let mut dec = m.decoder();
    let batched = dec.step(&[4, 5], &[&s0, &s1], &enc).unwrap();
    let single_a = m.decode_step(4, &s0, &enc).unwrap();
    let single_b = m.decode_step(5, &s1, &enc).unwrap();
    assert!(max_abs_diff(&batched[0].0, &single_a.0) < 1e-12);
    assert!(max_abs_diff(&batched[1].0, &single_b.0) < 1e-12);
    assert_eq!(batched[1].1, single_b.1);
}

#[test]
fn loss_matches_scalar_oracle() {
    let m = random_model(9, 8, 6, 5);
    let pairs: Vec<Pair> = vec![(vec![4, 5, 6], vec![4, 5]), (vec![7, 8], vec![6, 7, 4, 5]), (vec![4], vec![6])];
    let (mut nll, mut n) = (0.0, 0);
    for (s, t) in &pairs {
        let (a, b) = oracle_nll(&m, s, t);
        nll += a;
        n += b;
    }
    assert!((m.loss(&pairs).unwrap() - nll / n as f64).abs() < 1e-10);
}

#[test]
fn shape_laws_under_default_config() {
    let m = Model::<f32>::new(ModelConfig::standard(30, 40), 0).unwrap();
    let enc = m.encode(&[4, 5, 6, 7, 8]).unwrap();
    assert_eq!(enc.annotations.shape(), [5, 150]);
    assert_eq!(enc.final_h.len(), 2);
    assert_eq!(enc.final_h[0].shape(), [150]);
    let (lp, st) = m.decode_step(BOS, &m.initial_state(&enc), &enc).unwrap();
    assert_eq!(lp.len(), 40);
    assert_eq!(st.attention.len(), 5);
    assert_eq!(st.feed.shape(), [150]);
}

#[test]
fn palindrome_with_mirrored_directions_is_symmetric() {
    let mut m = random_model(9, 6, 6, 6);
    for (l, layer) in m.params.encoder.iter_mut().enumerate() {
        layer.backward = layer.forward.clone();
        if l > 0 {
            // Upper layers read [fwd; bwd], which a mirror swaps.
            let w = &mut layer.backward.input_weights;
            let (rows, cols) = w.matrix_dims().unwrap();
            for r in 0..rows {
                let row = layer.forward.input_weights.row(r);
                let swapped = [&row[cols / 2..], &row[..cols / 2]].concat();
                w.row_mut(r).copy_from_slice(&swapped);
            }
        }
    }
    let src = [4, 6, 8, 6, 4];
    let enc = m.encode(&src).unwrap();
    let s = src.len();
    for t in 0..s {
        let fwd = &enc.annotations.row(t)[..3];
        let bwd = &enc.annotations.row(s - 1 - t)[3..];
        assert!(max_abs_diff(fwd, bwd) < 1e-12);
    }
}

#[test]
fn attention_single_position_copies_annotation() {
    let m = random_model(5, 5, 4, 7);
    let ann = Tensor::new(vec![1, 4], vec![0.3, -0.2, 0.9, 0.1]).unwrap();
    let top = Tensor::vector(vec![0.5, 0.5, -1.0, 2.0]);
    let a = attend(&top, &ann, &m.params.attention).unwrap();
    assert_eq!(a.weights, vec![1.0]);
    assert!(max_abs_diff(a.context.data(), ann.data()) < 1e-15);
}

#[test]
fn attention_zero_scores_are_uniform() {
    let mut m = random_model(5, 5, 4, 8);
    m.params.attention.score_weights = Tensor::zeros(&[4, 4]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ann = Tensor::uniform(&[3, 4], -1.0, 1.0, &mut rng);
    let top = Tensor::uniform(&[4], -1.0, 1.0, &mut rng);
    let a = attend(&top, &ann, &m.params.attention).unwrap();
    assert!(max_abs_diff(&a.weights, &[1.0 / 3.0; 3]) < 1e-15);
}

#[test]
fn attention_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let att = AttentionParams {
        score_weights: Tensor::uniform(&[3, 3], -1.0, 1.0, &mut rng),
        output_weights: Tensor::uniform(&[3, 6], -1.0, 1.0, &mut rng),
        output_bias: Tensor::uniform(&[3], -1.0, 1.0, &mut rng),
    };
    let ann = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut rng);
    let top = Tensor::uniform(&[3], -1.0, 1.0, &mut rng);
    let got = attend(&top, &ann, &att).unwrap();
    let (w, ctx, out) = oracle_attend(&att, top.data(), &mat(&ann));
    assert!(max_abs_diff(&got.weights, &w) < 1e-6);
    assert!(max_abs_diff(got.context.data(), &ctx) < 1e-6);
    assert!(max_abs_diff(got.attentional.data(), &out) < 1e-6);
    assert!(attend(&Tensor::vector(vec![1.0, 2.0]), &ann, &att).is_err());
}

#[test]
fn batch_attention_masks_padding_exactly() {
    let m = random_model(9, 6, 4, 11);
    let mut g = Graph::new();
    let p = m.params.bind(&mut g, false);
    let src = vec![vec![4, 5, 6, 7], vec![8, 4, PAD, PAD]];
    let enc = encode_graph(&mut g, &p, &m.config, &src, &[4, 2], None).unwrap();
    let top = enc.final_h[1];
    let (_, w) = attention_graph(&mut g, &p.attention, top, enc.memory, &enc.mask).unwrap();
    let w = g.value(w).clone();
    assert_eq!(&w.row(1)[2..], [0.0, 0.0]);
    for r in 0..2 {
        assert!(w.row(r).iter().all(|&x| x >= 0.0));
        assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let feed = g.constant(Tensor::zeros(&[2, 4]));
    let st = GraphDecoderState {
        h: enc.final_h.clone(),
        c: enc.final_c.clone(),
        feed,
    };
    let out = decoder_step_graph(&mut g, &p, &m.config, &[BOS, BOS], &st, enc.memory, &enc.mask, None).unwrap();
    assert_eq!(&g.value(out.attn).row(1)[2..], [0.0, 0.0]);
}

#[test]
fn decode_step_distributions_normalize() {
    let m = random_model(9, 11, 6, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let len = rng.random_range(1..6);
        let src = random_ids(&mut rng, len, 9);
        let enc = m.encode(&src).unwrap();
        let mut st = m.initial_state(&enc);
        let mut prev = BOS;
        for _ in 0..4 {
            let (lp, next) = m.decode_step(prev, &st, &enc).unwrap();
            assert!(log_sum_exp(&lp).abs() < 1e-5);
            assert!((next.attention.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            st = next;
            prev = rng.random_range(4..11);
        }
    }
}

#[test]
fn zero_generator_gives_uniform_output() {
    let mut m = random_model(6, 9, 4, 14);
    m.params.generator_weights = Tensor::zeros(&[9, 4]);
    m.params.generator_bias = Tensor::zeros(&[9]);
    let enc = m.encode(&[4, 5]).unwrap();
    let (lp, _) = m.decode_step(BOS, &m.initial_state(&enc), &enc).unwrap();
    let want = -(9f64).ln();
    assert!(lp.iter().all(|&v| (v - want).abs() < 1e-12));
}

#[test]
fn decode_step_rejects_bad_token() {
    let m = random_model(6, 9, 4, 15);
    let enc = m.encode(&[4, 5]).unwrap();
    assert!(m.decode_step(9, &m.initial_state(&enc), &enc).is_err());
    assert!(m.encode(&[]).is_err());
    assert!(m.encode(&[PAD, PAD]).is_err());
}

#[test]
fn certain_model_has_zero_loss() {
    // A generator that always emits EOS with overwhelming margin.
    let mut m = random_model(6, 6, 4, 16);
    m.params.generator_weights = Tensor::zeros(&[6, 4]);
    let mut bias = vec![0.0; 6];
    bias[EOS] = 1e3;
    m.params.generator_bias = Tensor::vector(bias);
    assert!(m.loss(&[(vec![4, 5], vec![])]).unwrap().abs() < 1e-12);
}

#[test]
fn initial_loss_is_near_uniform() {
    let vt = 40;
    let m = Model::<f64>::new(ModelConfig::tiny(30, vt, 32), 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let pairs: Vec<Pair> = (0..16)
        .map(|_| {
            let (s, t) = (rng.random_range(2..8), rng.random_range(2..8));
            (random_ids(&mut rng, s, 30), random_ids(&mut rng, t, vt))
        })
        .collect();
    let loss = m.loss(&pairs).unwrap();
    let uniform = (vt as f64).ln();
    assert!((loss - uniform).abs() / uniform < 0.2, "loss {loss} vs ln Vt {uniform}");
}

#[test]
fn padded_batch_equals_mean_of_singles() {
    // Equal target lengths, so the token mean equals the mean of per-sample
    // means; the source lengths differ, so the shorter source is padded.
    let m = random_model(9, 8, 6, 19);
    let a: Pair = (vec![4, 5, 6, 7, 8], vec![4, 5, 6]);
    let b: Pair = (vec![8, 4], vec![7, 7, 4]);
    let joint = m.loss(&[a.clone(), b.clone()]).unwrap();
    let mean = (m.loss(&[a]).unwrap() + m.loss(&[b]).unwrap()) / 2.0;
    assert!((joint - mean).abs() < 1e-5);
}

#[test]
fn pad_suffix_on_source_is_neutral() {
    let m = random_model(9, 8, 6, 20);
    let plain = m.encode(&[4, 5, 6]).unwrap();
    let padded = m.encode(&[4, 5, 6, PAD, PAD]).unwrap();
    let (lp1, _) = m.decode_step(BOS, &m.initial_state(&plain), &plain).unwrap();
    let (lp2, _) = m.decode_step(BOS, &m.initial_state(&padded), &padded).unwrap();
    assert!(max_abs_diff(&lp1, &lp2) < 1e-5);
    let l1 = m.loss(&[(vec![4, 5, 6], vec![4])]).unwrap();
    let l2 = m.loss(&[(vec![4, 5, 6, PAD], vec![4])]).unwrap();
    assert!((l1 - l2).abs() < 1e-5);
    assert_eq!(content_len(&[4, PAD, 5, PAD]), 3);
}

#[test]
fn full_model_gradient_check() {
    let cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::tiny(11, 12, 8)
    };
    let mut m = Model::<f64>::new(cfg, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for t in m.params.values_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let pairs: Vec<Pair> = vec![(vec![4, 5, 6, 7, 8], vec![4, 5, 6, 7]), (vec![9, 10, 4], vec![8, 11])];
    let (_, grads) = m.loss_and_grads(&pairs, None).unwrap();
    let eps = 1e-4;
    let mut worst = (0.0f64, String::new());
    let names = m.params.names();
    for (k, name) in names.iter().enumerate() {
        for i in 0..grads[k].len() {
            let orig = m.params.values_mut()[k].data()[i];
            m.params.values_mut()[k].data_mut()[i] = orig + eps;
            let up = m.loss(&pairs).unwrap();
            m.params.values_mut()[k].data_mut()[i] = orig - eps;
            let down = m.loss(&pairs).unwrap();
            m.params.values_mut()[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads[k].data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]: analytic {analytic:e}, numeric {numeric:e}"));
            }
        }
    }
    assert!(worst.0 <= 1e-4, "worst relative error {:e} at {}", worst.0, worst.1);
}

#[test]
fn dropout_changes_training_loss_only() {
    let cfg = ModelConfig {
        dropout: 0.5,
        ..ModelConfig::tiny(9, 8, 8)
    };
    let m = Model::<f64>::new(cfg, 23).unwrap();
    let pairs: Vec<Pair> = vec![(vec![4, 5, 6], vec![4, 5])];
    let eval = m.loss(&pairs).unwrap();
    let (plain, _) = m.loss_and_grads(&pairs, None).unwrap();
    assert_eq!(eval, plain);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (dropped, _) = m.loss_and_grads(&pairs, Some(&mut rng)).unwrap();
    assert_ne!(eval, dropped);
}

fn toy_corpus(n: usize, seed: u64) -> Vec<Pair> {
    // Letter-to-phoneme rule: each grapheme id maps to a fixed phoneme id,
    // with one context rule so the model needs its attention.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..6);
            let src = random_ids(&mut rng, len, 10);
            let mut tgt: Vec<usize> = src.iter().map(|&s| s + 1).collect();
            if src[0] == 4 {
                tgt.reverse();
            }
            (src, tgt)
        })
        .collect()
}

#[test]
fn training_memorizes_a_toy_corpus() {
    let data = toy_corpus(50, 24);
    let mut m = Model::<f32>::new(ModelConfig::tiny(10, 11, 32), 25).unwrap();
    let initial = m.loss(&data).unwrap() as f64;
    // Small batches give enough updates; the late decay damps the
    // oscillation a constant rate of 1.0 settles into.
    let schedule = Schedule {
        epochs: 200,
        batch_size: 5,
        lr_decay: Some(LrDecay {
            factor: 0.97,
            start_epoch: 100,
        }),
        seed: 26,
        ..Schedule::default()
    };
    let out = train(&mut m, &data, &[], &schedule, |_, _| Ok(EpochOutcome::Continue)).unwrap();
    let last = out.log.last().unwrap().train_loss;
    let final_loss = m.loss(&data).unwrap() as f64;
    assert!(last < initial && final_loss <= 0.1, "initial {initial}, last epoch {last}, final {final_loss}");
}

#[test]
fn zero_learning_rate_leaves_weights_bit_identical() {
    let data = toy_corpus(12, 27);
    let mut m = Model::<f32>::new(ModelConfig::tiny(10, 11, 8), 28).unwrap();
    let before = m.clone();
    let schedule = Schedule {
        epochs: 2,
        batch_size: 4,
        learning_rate: 0.0,
        ..Schedule::default()
    };
    train(&mut m, &data, &data, &schedule, |_, _| Ok(EpochOutcome::Continue)).unwrap();
    assert_eq!(m, before);
}

#[test]
fn same_seed_same_logs_and_weights() {
    let data = toy_corpus(20, 29);
    let run = || {
        let cfg = ModelConfig {
            dropout: 0.3,
            ..ModelConfig::tiny(10, 11, 8)
        };
        let mut m = Model::<f32>::new(cfg, 30).unwrap();
        let schedule = Schedule {
            epochs: 3,
            batch_size: 4,
            seed: 31,
            ..Schedule::default()
        };
        let out = train(&mut m, &data, &data[..5], &schedule, |_, _| Ok(EpochOutcome::Continue)).unwrap();
        (out.log, m)
    };
    let (log_a, m_a) = run();
    let (log_b, m_b) = run();
    assert_eq!(log_a, log_b);
    assert_eq!(m_a, m_b);
}

#[test]
fn callback_can_stop_and_best_is_tracked() {
    let data = toy_corpus(10, 32);
    let mut m = Model::<f32>::new(ModelConfig::tiny(10, 11, 8), 33).unwrap();
    let schedule = Schedule {
        epochs: 10,
        batch_size: 5,
        ..Schedule::default()
    };
    let out = train(&mut m, &data, &data, &schedule, |log, _| {
        Ok(if log.epoch == 3 { EpochOutcome::Stop } else { EpochOutcome::Continue })
    })
    .unwrap();
    assert_eq!(out.log.len(), 3);
    let (epoch, _) = out.best.unwrap();
    let best_val = out.log[epoch - 1].val_loss.unwrap();
    assert!(out.log.iter().all(|l| l.val_loss.unwrap() >= best_val));
}

#[test]
fn training_rejects_empty_set() {
    let mut m = Model::<f32>::new(ModelConfig::tiny(10, 11, 8), 34).unwrap();
    assert!(train(&mut m, &[], &[], &Schedule::default(), |_, _| Ok(EpochOutcome::Continue)).is_err());
}

#[test]
fn frozen_model_decodes_from_many_threads() {
    let m = random_model(9, 8, 6, 35);
    let enc = m.encode(&[4, 5, 6]).unwrap();
    let (want, _) = m.decode_step(BOS, &m.initial_state(&enc), &enc).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| {
                s.spawn(|| {
                    let enc = m.encode(&[4, 5, 6]).unwrap();
                    m.decode_step(BOS, &m.initial_state(&enc), &enc).unwrap().0
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), want);
        }
    });
}
