use std::collections::HashMap;

use rand::Rng;

use super::{is_excluded, StepScorer};
use crate::corpus::EOS;
use crate::error::{G2pError, Result};

/// A scorer whose next-token distribution is looked up from a table keyed
/// by the output prefix. The source is ignored. Its full sequence
/// distribution can be enumerated, which makes it a reference for search.
#[derive(Clone, Debug, PartialEq)]
pub struct TableScorer {
    vocab_size: usize,
    table: HashMap<Vec<usize>, Vec<f64>>,
}

impl TableScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            table: HashMap::new(),
        }
    }

    /// Sets the distribution after `prefix` from unnormalised weights;
    /// excluded tokens always get probability 0.
    pub fn set(&mut self, prefix: Vec<usize>, weights: &[f64]) -> Result<()> {
        if weights.len() != self.vocab_size {
            return Err(G2pError::Shape {
                op: "table_scorer",
                left: vec![weights.len()],
                right: vec![self.vocab_size],
            });
        }
        let mass: f64 = weights
            .iter()
            .enumerate()
            .filter(|&(t, &w)| !is_excluded(t) && w > 0.0)
            .map(|(_, &w)| w)
            .sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(G2pError::InvalidArgument("distribution has no mass".into()));
        }
        let lp = weights
            .iter()
            .enumerate()
            .map(|(t, &w)| if is_excluded(t) || w <= 0.0 { f64::NEG_INFINITY } else { (w / mass).ln() })
            .collect();
        self.table.insert(prefix, lp);
        Ok(())
    }

    /// Log-probabilities after `prefix`, if defined.
    pub fn get(&self, prefix: &[usize]) -> Option<&[f64]> {
        self.table.get(prefix).map(Vec::as_slice)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Random table over output tokens `4..vocab_size` (plus EOS) for all
    /// prefixes shorter than `depth`; at `depth` EOS is certain. With
    /// `sparsity` > 0 each token is dropped with that probability.
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, depth: usize, sparsity: f64, rng: &mut R) -> Self {
        let mut t = Self::new(vocab_size);
        let mut frontier = vec![Vec::new()];
        for d in 0..=depth {
            let mut next = Vec::new();
            for prefix in frontier {
                let mut w = vec![0.0; vocab_size];
                if d == depth {
                    w[EOS] = 1.0;
                } else {
                    for (tok, wt) in w.iter_mut().enumerate() {
                        if (tok == EOS || !is_excluded(tok)) && !rng.random_bool(sparsity) {
                            *wt = rng.random_range(0.05..1.0);
                        }
                    }
                    if w.iter().all(|&x| x == 0.0) {
                        w[EOS] = 1.0;
                    }
                }
                for (tok, &wt) in w.iter().enumerate() {
                    if wt > 0.0 && tok != EOS {
                        let mut p = prefix.clone();
                        p.push(tok);
                        next.push(p);
                    }
                }
                t.set(prefix, &w).expect("non-empty distribution");
            }
            frontier = next;
        }
        t
    }
}

impl StepScorer for TableScorer {
    type Context = ();
    type State = Vec<usize>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn prepare(&mut self, src: &[usize]) -> Result<((), Vec<usize>)> {
        if src.is_empty() {
            return Err(G2pError::EmptySource);
        }
        Ok(((), Vec::new()))
    }

    fn step(&mut self, _: &(), prevs: &[usize], states: &[&Vec<usize>]) -> Result<Vec<(Vec<f64>, Vec<usize>)>> {
        prevs
            .iter()
            .zip(states)
            .map(|(&prev, &prefix)| {
                // The first step sees BOS, which is not part of the prefix.
                let mut p = prefix.clone();
                if !is_excluded(prev) {
                    p.push(prev);
                }
                let lp = self
                    .table
                    .get(&p)
                    .ok_or_else(|| G2pError::InvalidArgument(format!("no distribution for prefix {p:?}")))?;
                Ok((lp.clone(), p))
            })
            .collect()
    }
}
