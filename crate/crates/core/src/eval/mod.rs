//! Edit distance, phoneme and word error rates, and per-language reports
//! with equal-weight macro averaging.

mod report;

pub use report::{evaluate, EvalItem, EvalReport, LanguageScores, MacroScores};

use unicode_normalization::UnicodeNormalization;

use crate::error::{G2pError, Result};

/// Rank cut-off of the oracle word error rate.
pub const WER_K: usize = 100;

/// Unit-cost edit distance over whole tokens.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the gold length; may exceed 1.
pub fn per<S: AsRef<str>>(pred: &[S], gold: &[S]) -> Result<f64> {
    if gold.is_empty() {
        return Err(G2pError::EmptyTarget);
    }
    Ok(levenshtein(&normalized(pred), &normalized(gold)) as f64 / gold.len() as f64)
}

fn normalized<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().nfc().collect()).collect()
}

/// Token-sequence equality after NFC normalisation of each token.
pub fn same_sequence<S: AsRef<str>, U: AsRef<str>>(a: &[S], b: &[U]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let (x, y) = (x.as_ref(), y.as_ref());
            x == y || x.nfc().eq(y.nfc())
        })
}

/// Percentage of pairs whose prediction differs from the gold sequence.
pub fn wer<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(G2pError::EmptyInput("wer pairs"));
    }
    let wrong = pairs.iter().filter(|(p, g)| !same_sequence(p, g)).count();
    Ok(100.0 * wrong as f64 / pairs.len() as f64)
}

/// Percentage of words whose gold sequence is absent from the first `k`
/// hypotheses (rank `k` inclusive).
pub fn wer_at_k<S: AsRef<str>>(lists: &[(Vec<Vec<S>>, Vec<S>)], k: usize) -> Result<f64> {
    if lists.is_empty() {
        return Err(G2pError::EmptyInput("n-best lists"));
    }
    let missed = lists
        .iter()
        .filter(|(nbest, gold)| !nbest.iter().take(k).any(|h| same_sequence(h, gold)))
        .count();
    Ok(100.0 * missed as f64 / lists.len() as f64)
}

/// [`wer_at_k`] with `k = 100`.
pub fn wer100<S: AsRef<str>>(lists: &[(Vec<Vec<S>>, Vec<S>)]) -> Result<f64> {
    wer_at_k(lists, WER_K)
}

/// How per-word phoneme error rates are pooled within a language.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerMode {
    /// Mean of per-word ratios.
    #[default]
    MeanOfRatios,
    /// Total edits over total gold length.
    RatioOfSums,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exponential-time edit distance straight from the recursive definition.
    fn brute(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = brute(ra, rb) + usize::from(x != y);
                sub.min(brute(ra, b) + 1).min(brute(a, rb) + 1)
            }
        }
    }

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(&t("k a t"), &t("k a t")), 0);
        assert_eq!(levenshtein(&t(""), &t("a b")), 2);
        assert_eq!(levenshtein(&t("k a t"), &t("k b t")), 1);
        // Multi-codepoint tokens count as one symbol.
        assert_eq!(levenshtein(&t("t\u{361}\u{283} a"), &t("t a")), 1);
    }

    #[test]
    fn levenshtein_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let a: Vec<u8> = (0..rng.random_range(0..=6)).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<u8> = (0..rng.random_range(0..=6)).map(|_| rng.random_range(0..4)).collect();
            assert_eq!(levenshtein(&a, &b), brute(&a, &b));
        }
    }

    #[test]
    fn per_examples() {
        assert_eq!(per(&t("k a t"), &t("k a t")).unwrap(), 0.0);
        assert!((per(&t("k a t"), &t("k b t")).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(per(&t("a b c d e f"), &t("x")).unwrap(), 6.0);
        assert!(matches!(per(&t("a"), &t("")), Err(G2pError::EmptyTarget)));
    }

    #[test]
    fn per_uses_nfc() {
        let composed = vec!["\u{e9}".to_string()];
        let decomposed = vec!["e\u{301}".to_string()];
        assert_eq!(per(&composed, &decomposed).unwrap(), 0.0);
        assert!(same_sequence(&composed, &decomposed));
    }

    #[test]
    fn wer_examples() {
        let ok = (t("a b"), t("a b"));
        let bad = (t("a c"), t("a b"));
        assert_eq!(wer(&[ok.clone(), ok.clone()]).unwrap(), 0.0);
        assert_eq!(wer(&[ok.clone(), ok.clone(), ok, bad]).unwrap(), 25.0);
        assert!(wer::<String>(&[]).is_err());
    }

    #[test]
    fn low_per_with_high_wer() {
        let gold = t("a b c d e f g h i j");
        let pred = t("a b c d e f g h i x");
        let pairs: Vec<_> = (0..10).map(|_| (pred.clone(), gold.clone())).collect();
        assert_eq!(wer(&pairs).unwrap(), 100.0);
        let mean_per: f64 = pairs.iter().map(|(p, g)| per(p, g).unwrap()).sum::<f64>() / 10.0;
        assert!((mean_per - 0.1).abs() < 1e-12);
    }

    fn nbest_with_gold_at(rank: usize, gold: &[String]) -> Vec<Vec<String>> {
        (1..=rank.max(120))
            .map(|r| if r == rank { gold.to_vec() } else { vec![format!("w{r}")] })
            .collect()
    }

    #[test]
    fn wer100_boundaries() {
        let gold = t("g o l d");
        let at = |r| vec![(nbest_with_gold_at(r, &gold), gold.clone())];
        assert_eq!(wer100(&at(1)).unwrap(), 0.0);
        assert_eq!(wer100(&at(100)).unwrap(), 0.0);
        assert_eq!(wer100(&at(101)).unwrap(), 100.0);
        assert_eq!(wer_at_k(&at(3), 2).unwrap(), 100.0);
    }

    proptest! {
        #[test]
        fn levenshtein_is_a_metric(
            a in prop::collection::vec(0u8..4, 0..7),
            b in prop::collection::vec(0u8..4, 0..7),
            c in prop::collection::vec(0u8..4, 0..7),
        ) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
            prop_assert!(ab <= a.len().max(b.len()));
            prop_assert!(ab >= a.len().abs_diff(b.len()));
        }

        #[test]
        fn per_zero_iff_equal(
            a in prop::collection::vec("[a-c]", 0..5),
            b in prop::collection::vec("[a-c]", 1..5),
        ) {
            prop_assert_eq!(per(&a, &b).unwrap() == 0.0, a == b);
        }
    }
}
