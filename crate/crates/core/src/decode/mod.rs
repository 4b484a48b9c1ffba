//! Greedy and beam-search decoding over any [`StepScorer`].

mod nbest;
mod table;


pub use nbest::{parse_nbest, write_nbest, NBestRecord};
pub use table::TableScorer;

use std::cmp::Ordering;

use crate::corpus::{Vocabulary, BOS, EOS, PAD, UNK};
use crate::error::{G2pError, Result};
use crate::model::{Decoder, DecoderState, EncodedSource};
use crate::scalar::Scalar;

/// Anything that yields next-token log-probabilities given the previous
/// token and a recurrent state.
pub trait StepScorer {
    type Context;
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// Encodes the source and returns the state before the first step.
    fn prepare(&mut self, src: &[usize]) -> Result<(Self::Context, Self::State)>;

    /// One step for several hypotheses; row `i` continues `states[i]` after
    /// emitting `prevs[i]`.
    fn step(
        &mut self,
        ctx: &Self::Context,
        prevs: &[usize],
        states: &[&Self::State],
    ) -> Result<Vec<(Vec<f64>, Self::State)>>;
}

impl<T: Scalar> StepScorer for Decoder<'_, T> {
    type Context = EncodedSource<T>;
    type State = DecoderState<T>;

    fn vocab_size(&self) -> usize {
        self.model().config.tgt_vocab_size
    }

    fn prepare(&mut self, src: &[usize]) -> Result<(Self::Context, Self::State)> {
        let enc = self.encode(src)?;
        let st = self.initial_state(&enc);
        Ok((enc, st))
    }

    fn step(
        &mut self,
        ctx: &Self::Context,
        prevs: &[usize],
        states: &[&Self::State],
    ) -> Result<Vec<(Vec<f64>, Self::State)>> {
        Ok(Decoder::step(self, prevs, states, ctx)?
            .into_iter()
            .map(|(lp, st)| (lp.into_iter().map(Scalar::to_f64_lossy).collect(), st))
            .collect())
    }
}

/// Tokens never proposed during search.
pub fn is_excluded(token: usize) -> bool {
    matches!(token, PAD | BOS | UNK)
}

/// Output bound used when none is given: `2 * |src| + 10`.
pub fn default_max_len(src_len: usize) -> usize {
    2 * src_len + 10
}

/// A finished (or truncated) hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSequence {
    /// Output tokens without BOS and EOS.
    pub ids: Vec<usize>,
    /// Sum of per-step log-probabilities, EOS included when finished.
    pub log_prob: f64,
    /// Decoder steps taken, the EOS step included.
    pub finish_step: usize,
    /// Hit the length bound before emitting EOS.
    pub truncated: bool,
}

/// Hypotheses in rank order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NBestList {
    pub hypotheses: Vec<ScoredSequence>,
}

impl NBestList {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn best(&self) -> Option<&ScoredSequence> {
        self.hypotheses.first()
    }

    /// Token strings of every hypothesis, in rank order.
    pub fn to_strings(&self, vocab: &Vocabulary) -> Vec<Vec<String>> {
        self.hypotheses.iter().map(|h| vocab.decode(&h.ids)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub width: usize,
    /// Maximum decoder steps; `None` means [`default_max_len`].
    pub max_len: Option<usize>,
    /// When set, the final list is ranked by `log_prob / (steps ^ alpha)`.
    pub length_penalty: Option<f64>,
}

impl BeamConfig {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            max_len: None,
            length_penalty: None,
        }
    }
}

/// Rank order: higher score, then earlier finish, then smaller token
/// sequence.
fn rank(a: (f64, usize), b: (f64, usize), seq_a: impl Iterator<Item = usize>, seq_b: impl Iterator<Item = usize>) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| seq_a.cmp(seq_b))
}

struct Live<S> {
    ids: Vec<usize>,
    score: f64,
    state: S,
}

#[derive(Clone, Copy)]
enum Entry {
    Done(usize),
    Cand { parent: usize, token: usize, score: f64 },
}

/// Beam search. Each step expands every live hypothesis over the whole
/// vocabulary (minus PAD, BOS and UNK) and keeps the `width` best among the
/// finished hypotheses and the expansions.
pub fn beam_search<S: StepScorer>(scorer: &mut S, src: &[usize], cfg: &BeamConfig) -> Result<NBestList> {
    if src.is_empty() {
        return Err(G2pError::EmptySource);
    }
    if cfg.width == 0 || cfg.max_len == Some(0) {
        return Err(G2pError::InvalidArgument("beam width and max_len must be at least 1".into()));
    }
    let max_len = cfg.max_len.unwrap_or_else(|| default_max_len(src.len()));
    let vocab = scorer.vocab_size();
    let (ctx, init) = scorer.prepare(src)?;
    let mut finished: Vec<ScoredSequence> = Vec::new();
    let mut live = vec![Live {
        ids: Vec::new(),
        score: 0.0,
        state: init,
    }];

    for step in 1..=max_len {
        let prevs: Vec<usize> = live.iter().map(|h| h.ids.last().copied().unwrap_or(BOS)).collect();
        let states: Vec<&S::State> = live.iter().map(|h| &h.state).collect();
        let mut outs = scorer.step(&ctx, &prevs, &states)?;
        if outs.len() != live.len() || outs.iter().any(|(lp, _)| lp.len() != vocab) {
            return Err(G2pError::InvalidArgument("scorer returned malformed rows".into()));
        }

        let mut pool: Vec<Entry> = (0..finished.len()).map(Entry::Done).collect();
        for (parent, (lp, _)) in outs.iter().enumerate() {
            for (token, &p) in lp.iter().enumerate() {
                let score = live[parent].score + p;
                if !is_excluded(token) && score.is_finite() {
                    pool.push(Entry::Cand { parent, token, score });
                }
            }
        }
        let key = |e: &Entry| match *e {
            Entry::Done(i) => (finished[i].log_prob, finished[i].finish_step),
            Entry::Cand { token, score, .. } => (score, if token == EOS { step } else { usize::MAX }),
        };
        let seq = |e: &Entry| -> (&[usize], Option<usize>) {
            match *e {
                Entry::Done(i) => (&finished[i].ids, None),
                Entry::Cand { parent, token, .. } => (&live[parent].ids, (token != EOS).then_some(token)),
            }
        };
        let cmp = |a: &Entry, b: &Entry| {
            let (sa, ta) = seq(a);
            let (sb, tb) = seq(b);
            rank(key(a), key(b), sa.iter().copied().chain(ta), sb.iter().copied().chain(tb))
        };
        if pool.len() > cfg.width {
            pool.select_nth_unstable_by(cfg.width - 1, cmp);
            pool.truncate(cfg.width);
        }
        pool.sort_by(cmp);

        let mut next_finished = Vec::new();
        let mut next_live = Vec::new();
        for e in pool {
            match e {
                Entry::Done(i) => next_finished.push(finished[i].clone()),
                Entry::Cand { parent, token, score } if token == EOS => next_finished.push(ScoredSequence {
                    ids: live[parent].ids.clone(),
                    log_prob: score,
                    finish_step: step,
                    truncated: false,
                }),
                Entry::Cand { parent, token, score } => {
                    let mut ids = live[parent].ids.clone();
                    ids.push(token);
                    next_live.push(Live {
                        ids,
                        score,
                        state: outs[parent].1.clone(),
                    });
                }
            }
        }
        outs.clear();
        finished = next_finished;
        live = next_live;
        if live.is_empty() {
            break;
        }
    }

    let mut hypotheses = finished;
    hypotheses.extend(live.into_iter().map(|h| ScoredSequence {
        ids: h.ids,
        log_prob: h.score,
        finish_step: max_len,
        truncated: true,
    }));
    let ranked = |h: &ScoredSequence| match cfg.length_penalty {
        Some(alpha) => h.log_prob / (h.finish_step as f64).powf(alpha),
        None => h.log_prob,
    };
    hypotheses.sort_by(|a, b| rank((ranked(a), a.finish_step), (ranked(b), b.finish_step), a.ids.iter().copied(), b.ids.iter().copied()));
    Ok(NBestList { hypotheses })
}

/// Arg-max decoding; ties go to the lowest token id.
pub fn greedy_decode<S: StepScorer>(scorer: &mut S, src: &[usize], max_len: Option<usize>) -> Result<ScoredSequence> {
    if src.is_empty() {
        return Err(G2pError::EmptySource);
    }
    let max_len = max_len.unwrap_or_else(|| default_max_len(src.len()));
    if max_len == 0 {
        return Err(G2pError::InvalidArgument("max_len must be at least 1".into()));
    }
    let (ctx, mut state) = scorer.prepare(src)?;
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    for step in 1..=max_len {
        let prev = ids.last().copied().unwrap_or(BOS);
        let (lp, next) = scorer.step(&ctx, &[prev], &[&state])?.pop().expect("one row");
        let (token, p) = lp
            .iter()
            .copied()
            .enumerate()
            .filter(|&(t, _)| !is_excluded(t))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if token == usize::MAX {
            return Err(G2pError::NonFinite("no finite candidate".into()));
        }
        log_prob += p;
        if token == EOS {
            return Ok(ScoredSequence {
                ids,
                log_prob,
                finish_step: step,
                truncated: false,
            });
        }
        ids.push(token);
        state = next;
    }
    Ok(ScoredSequence {
        ids,
        log_prob,
        finish_step: max_len,
        truncated: true,
    })
}

/// Teacher-forced log-probability of `ids` followed by EOS.
pub fn score_sequence<S: StepScorer>(scorer: &mut S, src: &[usize], ids: &[usize]) -> Result<f64> {
    score_tokens(scorer, src, ids, true)
}

/// Teacher-forced log-probability of `ids`, with a closing EOS when
/// `with_eos`.
pub fn score_tokens<S: StepScorer>(scorer: &mut S, src: &[usize], ids: &[usize], with_eos: bool) -> Result<f64> {
    let (ctx, mut state) = scorer.prepare(src)?;
    let mut prev = BOS;
    let mut total = 0.0;
    let tail = with_eos.then_some(EOS);
    for y in ids.iter().copied().chain(tail) {
        let (lp, next) = scorer.step(&ctx, &[prev], &[&state])?.pop().expect("one row");
        let p = *lp.get(y).ok_or(G2pError::IndexOutOfRange { index: y, size: lp.len() })?;
        total += p;
        state = next;
        prev = y;
    }
    Ok(total)
}
