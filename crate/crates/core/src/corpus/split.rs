use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LangCode, LexiconEntry};
use crate::error::{G2pError, Result};

pub const DEFAULT_CAP: usize = 10_000;
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LexiconEntry>,
    pub validation: Vec<LexiconEntry>,
}

impl DatasetSplit {
    /// Languages present in the training portion, sorted.
    pub fn train_languages(&self) -> Vec<LangCode> {
        let mut langs: Vec<LangCode> = self.train.iter().map(|e| e.lang.clone()).collect();
        langs.sort();
        langs.dedup();
        langs
    }
}

/// Number of validation entries for `kept` entries of one language.
fn validation_count(kept: usize, val_fraction: f64) -> usize {
    // The small offset keeps exact products such as 0.1 * 30 from rounding up.
    let n = ((val_fraction * kept as f64) - 1e-9).ceil().max(0.0) as usize;
    // Training data is never emptied.
    n.min(kept.saturating_sub(1))
}

fn language_seed(seed: u64, lang: &LangCode) -> u64 {
    // FNV-1a over the code, mixed with the run seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in lang.as_str().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

/// Per language: keep the first `cap` entries in corpus order, shuffle them
/// with a language-specific stream derived from `seed`, then send
/// `⌈val_fraction · kept⌉` to validation and the rest to training.
pub fn split_train_val(entries: &[LexiconEntry], cap: usize, val_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if cap == 0 {
        return Err(G2pError::InvalidArgument("cap must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(G2pError::InvalidArgument(format!(
            "validation fraction {val_fraction} outside [0, 1)"
        )));
    }
    let mut order: Vec<LangCode> = Vec::new();
    let mut by_lang: BTreeMap<LangCode, Vec<LexiconEntry>> = BTreeMap::new();
    for e in entries {
        let bucket = by_lang.entry(e.lang.clone()).or_insert_with(|| {
            order.push(e.lang.clone());
            Vec::new()
        });
        if bucket.len() < cap {
            bucket.push(e.clone());
        }
    }

    let mut split = DatasetSplit::default();
    for lang in order {
        let mut kept = by_lang.remove(&lang).unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(language_seed(seed, &lang));
        kept.shuffle(&mut rng);
        let n_val = validation_count(kept.len(), val_fraction);
        let train = kept.split_off(n_val);
        split.validation.extend(kept);
        split.train.extend(train);
    }
    Ok(split)
}
