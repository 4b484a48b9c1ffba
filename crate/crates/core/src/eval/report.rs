use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{levenshtein, normalized, same_sequence, PerMode, WER_K};
use crate::error::{G2pError, Result};

/// One test word: its language, gold phonemes and ranked hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    pub lang: String,
    pub gold: Vec<String>,
    pub nbest: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageScores {
    pub words: usize,
    /// Percentages.
    pub wer: f64,
    pub wer100: f64,
    pub per: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub languages: usize,
    pub words: usize,
    pub wer: f64,
    pub wer100: f64,
    pub per: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_mode: PerMode,
    pub languages: BTreeMap<String, LanguageScores>,
    #[serde(rename = "macro")]
    pub macro_scores: MacroScores,
    pub warnings: Vec<String>,
}

fn score_language(items: &[&EvalItem], mode: PerMode) -> Result<LanguageScores> {
    let n = items.len() as f64;
    let (mut wrong, mut missed) = (0usize, 0usize);
    let (mut ratio_sum, mut edits, mut gold_len) = (0.0, 0usize, 0usize);
    for it in items {
        if it.gold.is_empty() {
            return Err(G2pError::EmptyTarget);
        }
        let top: &[String] = it.nbest.first().map_or(&[], Vec::as_slice);
        wrong += usize::from(!same_sequence(top, &it.gold));
        missed += usize::from(!it.nbest.iter().take(WER_K).any(|h| same_sequence(h, &it.gold)));
        let d = levenshtein(&normalized(top), &normalized(&it.gold));
        ratio_sum += d as f64 / it.gold.len() as f64;
        edits += d;
        gold_len += it.gold.len();
    }
    let per = match mode {
        PerMode::MeanOfRatios => ratio_sum / n,
        PerMode::RatioOfSums => edits as f64 / gold_len as f64,
    };
    Ok(LanguageScores {
        words: items.len(),
        wer: 100.0 * wrong as f64 / n,
        wer100: 100.0 * missed as f64 / n,
        per: 100.0 * per,
    })
}

/// Scores every language present in `items` and averages them with equal
/// weight. Languages listed in `expected` but without words are skipped
/// with a warning, as are lists shorter than a beam of 100 could give when
/// `beam_width` is below 100.
pub fn evaluate(items: &[EvalItem], expected: &[String], mode: PerMode, beam_width: Option<usize>) -> Result<EvalReport> {
    let mut groups: BTreeMap<&str, Vec<&EvalItem>> = BTreeMap::new();
    for it in items {
        groups.entry(it.lang.as_str()).or_default().push(it);
    }
    let mut warnings = Vec::new();
    for lang in expected {
        if !groups.contains_key(lang.as_str()) {
            warnings.push(format!("language {lang} has no test words; skipped"));
        }
    }
    if let Some(w) = beam_width.filter(|&w| w < WER_K) {
        warnings.push(format!("beam width {w} is below {WER_K}; WER100 is an upper bound"));
    }
    if groups.is_empty() {
        return Err(G2pError::EmptyInput("evaluation items"));
    }
    let mut languages = BTreeMap::new();
    for (lang, its) in groups {
        languages.insert(lang.to_string(), score_language(&its, mode)?);
    }
    let k = languages.len() as f64;
    let mean = |f: fn(&LanguageScores) -> f64| languages.values().map(f).sum::<f64>() / k;
    let macro_scores = MacroScores {
        languages: languages.len(),
        words: languages.values().map(|s| s.words).sum(),
        wer: mean(|s| s.wer),
        wer100: mean(|s| s.wer100),
        per: mean(|s| s.per),
    };
    Ok(EvalReport {
        per_mode: mode,
        languages,
        macro_scores,
        warnings,
    })
}

impl EvalReport {
    /// `lang words WER WER100 PER` rows plus a `MACRO` row, two decimals.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("lang\twords\tWER\tWER100\tPER\n");
        for (lang, r) in &self.languages {
            let _ = writeln!(s, "{lang}\t{}\t{:.2}\t{:.2}\t{:.2}", r.words, r.wer, r.wer100, r.per);
        }
        let m = &self.macro_scores;
        let _ = writeln!(s, "MACRO\t{}\t{:.2}\t{:.2}\t{:.2}", m.words, m.wer, m.wer100, m.per);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(lang: &str, gold: &str, nbest: &[&str]) -> EvalItem {
        let toks = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        EvalItem {
            lang: lang.into(),
            gold: toks(gold),
            nbest: nbest.iter().map(|h| toks(h)).collect(),
        }
    }

    #[test]
    fn macro_weights_languages_equally() {
        let items = vec![
            item("aaa", "a b", &["x"]),
            item("bbb", "a b", &["a b"]),
            item("bbb", "c", &["c"]),
            item("bbb", "d", &["d"]),
        ];
        let r = evaluate(&items, &[], PerMode::MeanOfRatios, Some(100)).unwrap();
        assert_eq!(r.languages["aaa"].wer, 100.0);
        assert_eq!(r.languages["bbb"].wer, 0.0);
        assert_eq!(r.macro_scores.wer, 50.0);
        assert!((r.macro_scores.per - (100.0 + 0.0) / 2.0).abs() < 1e-9);
        assert_eq!(r.macro_scores.words, 4);
    }

    #[test]
    fn hand_computed_macro_means() {
        let items = vec![
            item("aaa", "a b c", &["a b d", "a b c"]),
            item("aaa", "a", &["a"]),
            item("bbb", "x y", &["y", "z"]),
            item("ccc", "p", &["p q r"]),
        ];
        let r = evaluate(&items, &[], PerMode::MeanOfRatios, None).unwrap();
        // aaa: WER 50, WER100 0, PER mean(1/3, 0) = 16.67
        // bbb: WER 100, WER100 100, PER 50
        // ccc: WER 100, WER100 100, PER 200
        let want_wer = (50.0 + 100.0 + 100.0) / 3.0;
        let want_wer100 = (0.0 + 100.0 + 100.0) / 3.0;
        let want_per = (100.0 / 6.0 + 50.0 + 200.0) / 3.0;
        assert!((r.macro_scores.wer - want_wer).abs() < 1e-9);
        assert!((r.macro_scores.wer100 - want_wer100).abs() < 1e-9);
        assert!((r.macro_scores.per - want_per).abs() < 1e-9);
        for s in r.languages.values() {
            assert!(s.wer100 <= s.wer);
        }
    }

    #[test]
    fn per_modes_differ_on_unequal_lengths() {
        let items = vec![item("aaa", "a", &["b"]), item("aaa", "a b c", &["a b c"])];
        let mean = evaluate(&items, &[], PerMode::MeanOfRatios, None).unwrap();
        let pooled = evaluate(&items, &[], PerMode::RatioOfSums, None).unwrap();
        assert!((mean.languages["aaa"].per - 50.0).abs() < 1e-9);
        assert!((pooled.languages["aaa"].per - 25.0).abs() < 1e-9);
    }

    #[test]
    fn single_language_macro_equals_language() {
        let items = vec![item("aaa", "a b", &["a"]), item("aaa", "c", &["c"])];
        let r = evaluate(&items, &[], PerMode::MeanOfRatios, None).unwrap();
        let l = &r.languages["aaa"];
        assert_eq!((r.macro_scores.wer, r.macro_scores.wer100, r.macro_scores.per), (l.wer, l.wer100, l.per));
    }

    #[test]
    fn duplicating_words_leaves_macro_unchanged() {
        let base = vec![item("aaa", "a", &["b"]), item("bbb", "c", &["c"])];
        let mut dup = base.clone();
        dup.extend(std::iter::repeat_n(item("bbb", "c", &["c"]), 5));
        let a = evaluate(&base, &[], PerMode::MeanOfRatios, None).unwrap();
        let b = evaluate(&dup, &[], PerMode::MeanOfRatios, None).unwrap();
        assert_eq!(a.macro_scores.wer, b.macro_scores.wer);
        assert_eq!(a.macro_scores.per, b.macro_scores.per);
    }

    #[test]
    fn warnings_and_errors() {
        let items = vec![item("aaa", "a", &["a"])];
        let r = evaluate(&items, &["aaa".into(), "zzz".into()], PerMode::MeanOfRatios, Some(10)).unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.languages.len(), 1);
        assert!(evaluate(&[], &[], PerMode::MeanOfRatios, None).is_err());
        assert!(evaluate(&[item("aaa", "", &["a"])], &[], PerMode::MeanOfRatios, None).is_err());
    }

    #[test]
    fn empty_nbest_counts_as_empty_prediction() {
        let r = evaluate(&[item("aaa", "a b", &[])], &[], PerMode::MeanOfRatios, None).unwrap();
        assert_eq!(r.languages["aaa"].wer, 100.0);
        assert_eq!(r.languages["aaa"].per, 100.0);
    }

    #[test]
    fn tsv_and_json_layout() {
        let items = vec![item("aaa", "a b c", &["a b d"]), item("bbb", "c", &["c"])];
        let r = evaluate(&items, &[], PerMode::MeanOfRatios, None).unwrap();
        let tsv = r.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "lang\twords\tWER\tWER100\tPER");
        assert_eq!(lines[1], "aaa\t1\t100.00\t100.00\t33.33");
        assert_eq!(lines[3], "MACRO\t2\t50.00\t50.00\t16.67");
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
