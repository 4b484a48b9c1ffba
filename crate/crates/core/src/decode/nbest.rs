use std::io::Write;

use super::NBestList;
use crate::corpus::Vocabulary;
use crate::error::{G2pError, Result};

/// One line of an n-best file.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestRecord {
    pub word: String,
    /// 1-based.
    pub rank: usize,
    pub log_prob: f64,
    pub phonemes: Vec<String>,
}

/// Writes `word<TAB>rank<TAB>log_prob<TAB>phonemes` lines, ranks from 1.
pub fn write_nbest<W: Write>(mut out: W, word: &str, list: &NBestList, vocab: &Vocabulary) -> Result<()> {
    for (i, h) in list.hypotheses.iter().enumerate() {
        writeln!(out, "{word}\t{}\t{:.6}\t{}", i + 1, h.log_prob, vocab.decode(&h.ids).join(" "))?;
    }
    Ok(())
}

pub fn parse_nbest(text: &str) -> Result<Vec<NBestRecord>> {
    let bad = |n: usize, detail: &str| G2pError::Format {
        what: "n-best",
        detail: format!("line {n}: {detail}"),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let n = i + 1;
            let fields: Vec<&str> = line.strip_suffix('\r').unwrap_or(line).split('\t').collect();
            let [word, rank, log_prob, phonemes] = fields[..] else {
                return Err(bad(n, "expected 4 tab-separated fields"));
            };
            Ok(NBestRecord {
                word: word.to_string(),
                rank: rank.parse().map_err(|_| bad(n, "bad rank"))?,
                log_prob: log_prob.parse().map_err(|_| bad(n, "bad log_prob"))?,
                phonemes: phonemes.split_whitespace().map(str::to_string).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::ScoredSequence;

    #[test]
    fn write_then_parse() {
        let vocab = Vocabulary::from_tokens(["a", "\u{283}"]).unwrap();
        let list = NBestList {
            hypotheses: vec![
                ScoredSequence {
                    ids: vec![4, 5],
                    log_prob: -0.25,
                    finish_step: 3,
                    truncated: false,
                },
                ScoredSequence {
                    ids: vec![],
                    log_prob: -3.0,
                    finish_step: 1,
                    truncated: false,
                },
            ],
        };
        let mut buf = Vec::new();
        write_nbest(&mut buf, "ash", &list, &vocab).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "ash\t1\t-0.250000\ta \u{283}\nash\t2\t-3.000000\t\n");
        let recs = parse_nbest(&text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].phonemes, ["a", "\u{283}"]);
        assert_eq!(recs[1].rank, 2);
        assert!(recs[1].phonemes.is_empty());
    }

    #[test]
    fn malformed_lines_error() {
        assert!(parse_nbest("w\t1\t-0.5").is_err());
        assert!(parse_nbest("w\tx\t-0.5\ta").is_err());
        assert!(parse_nbest("w\t1\tnan?\ta").is_err());
    }
}
