use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{pad_batch, Pair};
use super::Model;
use crate::corpus::{LexiconEntry, Vocabulary};
use crate::error::{G2pError, Result};
use crate::scalar::Scalar;
use crate::tensor::sgd_step;

/// Multiply the learning rate by `factor` at the start of every epoch from
/// `start_epoch` (1-based) onwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub start_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm threshold.
    pub clip: Option<f64>,
    pub lr_decay: Option<LrDecay>,
    pub seed: u64,
    /// Length-sorting window, in batches.
    pub bucket_window: usize,
    /// Epochs already completed (for resuming).
    pub start_epoch: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epochs: 13,
            batch_size: 64,
            learning_rate: 1.0,
            clip: Some(5.0),
            lr_decay: None,
            seed: 0,
            bucket_window: 20,
            start_epoch: 0,
        }
    }
}

impl Schedule {
    /// Learning rate used during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) if epoch >= d.start_epoch => self.learning_rate * d.factor.powi((epoch - d.start_epoch + 1) as i32),
            _ => self.learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.bucket_window == 0 {
            return Err(G2pError::Config("batch_size and bucket_window must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(G2pError::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        if let Some(c) = self.clip {
            if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(G2pError::Config(format!("clip threshold {c} must be positive")));
            }
        }
        if let Some(d) = self.lr_decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) || d.start_epoch == 0 {
                return Err(G2pError::Config("lr_decay needs factor in (0, 1] and start_epoch >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Token-weighted mean cross-entropy over the epoch's batches.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub updates: usize,
    pub clipped_updates: usize,
    pub max_grad_norm: f64,
}

/// Returned by the per-epoch callback.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpochOutcome {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub log: Vec<EpochLog>,
    /// Epoch and weights with the lowest validation loss, if any validation
    /// data was given.
    pub best: Option<(usize, Model<T>)>,
}

/// Encodes lexicon entries into id pairs. Unknown tokens map to UNK.
pub fn encode_pairs(entries: &[LexiconEntry], src: &Vocabulary, tgt: &Vocabulary, lang_token: bool) -> Vec<Pair> {
    entries
        .iter()
        .map(|e| (src.encode(&e.source_tokens(lang_token)), tgt.encode(&e.phonemes)))
        .collect()
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Shuffles the indices of `pairs`, sorts each window of
/// `batch_size * window` by source length and cuts it into batches.
pub fn make_batches(pairs: &[Pair], batch_size: usize, window: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size.max(1) * window.max(1)) {
        let mut chunk = chunk.to_vec();
        chunk.sort_by_key(|&i| pairs[i].0.len());
        batches.extend(chunk.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    batches.shuffle(rng);
    batches
}

fn gather(pairs: &[Pair], idx: &[usize]) -> Vec<Pair> {
    idx.iter().map(|&i| pairs[i].clone()).collect()
}

/// Token-weighted mean loss over `pairs`, evaluated in batches.
pub(crate) fn corpus_loss<T: Scalar>(model: &Model<T>, pairs: &[Pair], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for chunk in pairs.chunks(batch_size.max(1)) {
        let n = pad_batch(chunk)?.target_tokens();
        total += model.loss(chunk)?.to_f64_lossy() * n as f64;
        tokens += n;
    }
    Ok(total / tokens.max(1) as f64)
}

/// Mini-batch SGD over `train_pairs`. `on_epoch` sees each epoch's log and
/// the current weights, and may stop training early.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_pairs: &[Pair],
    val_pairs: &[Pair],
    schedule: &Schedule,
    mut on_epoch: impl FnMut(&EpochLog, &Model<T>) -> Result<EpochOutcome>,
) -> Result<TrainOutcome<T>> {
    schedule.validate()?;
    if train_pairs.is_empty() {
        return Err(G2pError::EmptyInput("training set"));
    }
    let mut outcome = TrainOutcome {
        log: Vec::new(),
        best: None,
    };
    let mut best_val = f64::INFINITY;
    for epoch in schedule.start_epoch + 1..=schedule.epochs {
        let lr = schedule.lr_at(epoch);
        let mut rng = epoch_rng(schedule.seed, epoch);
        let batches = make_batches(train_pairs, schedule.batch_size, schedule.bucket_window, &mut rng);
        let mut log = EpochLog {
            epoch,
            learning_rate: lr,
            train_loss: 0.0,
            val_loss: None,
            updates: 0,
            clipped_updates: 0,
            max_grad_norm: 0.0,
        };
        let mut tokens = 0usize;
        for (b, idx) in batches.iter().enumerate() {
            let batch = gather(train_pairs, idx);
            let n = pad_batch(&batch)?.target_tokens();
            let dropout_rng = (model.config.dropout > 0.0).then_some(&mut rng);
            let (loss, grads) = model.loss_and_grads(&batch, dropout_rng).map_err(|e| match e {
                G2pError::NonFinite(op) => {
                    G2pError::NonFinite(format!("{op} in epoch {epoch}, batch {b} (examples {idx:?})"))
                }
                other => other,
            })?;
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(G2pError::NonFinite(format!("loss in epoch {epoch}, batch {b} (examples {idx:?})")));
            }
            let mut params = model.params.values_mut();
            let stats = sgd_step(
                &mut params,
                grads,
                T::from_f64_lossy(lr),
                schedule.clip.map(T::from_f64_lossy),
            )
            .map_err(|e| G2pError::NonFinite(format!("gradient in epoch {epoch}, batch {b}: {e}")))?;
            log.updates += 1;
            log.clipped_updates += usize::from(stats.clipped);
            log.max_grad_norm = log.max_grad_norm.max(stats.grad_norm);
            log.train_loss += loss * n as f64;
            tokens += n;
        }
        log.train_loss /= tokens.max(1) as f64;
        if !val_pairs.is_empty() {
            let v = corpus_loss(model, val_pairs, schedule.batch_size)?;
            log.val_loss = Some(v);
            if v < best_val {
                best_val = v;
                outcome.best = Some((epoch, model.clone()));
            }
        }
        let verdict = on_epoch(&log, model)?;
        outcome.log.push(log);
        if verdict == EpochOutcome::Stop {
            break;
        }
    }
    Ok(outcome)
}
