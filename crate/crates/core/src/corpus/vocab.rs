use std::collections::{BTreeMap, HashMap};

use super::{LangCode, LexiconEntry};
use crate::error::{G2pError, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Surface forms of the reserved tokens, in index order. Upper case keeps
/// them disjoint from `<xxx>` language tokens.
pub const RESERVED: [&str; 4] = ["<PAD>", "<BOS>", "<EOS>", "<UNK>"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Grapheme side; `lang_token` adds each entry's `<xxx>` token.
    Source { lang_token: bool },
    Target,
}

/// Bijective token/index map with the reserved tokens at 0..4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Reserved tokens followed by `tokens`; duplicates are an error.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED.iter().map(|s| s.to_string()).chain(tokens.into_iter().map(Into::into)) {
            if v.index.contains_key(&t) {
                return Err(G2pError::Format {
                    what: "vocabulary",
                    detail: format!("duplicate token {t:?}"),
                });
            }
            v.index.insert(t.clone(), v.tokens.len());
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Counts side tokens, keeps those seen at least `min_count` times and
    /// orders them by descending frequency, then lexicographically.
    pub fn build(entries: &[LexiconEntry], side: Side, min_count: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(G2pError::EmptyInput("vocabulary entries"));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for e in entries {
            let toks = match side {
                Side::Source { lang_token } => e.source_tokens(lang_token),
                Side::Target => e.phonemes.clone(),
            };
            for t in toks {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && !RESERVED.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn is_special(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// Maps tokens to indices, unknown tokens to [`UNK`].
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// Language codes that have a `<xxx>` token in this vocabulary.
    pub fn languages(&self) -> Vec<LangCode> {
        let mut langs: Vec<LangCode> = self.tokens.iter().filter_map(|t| LangCode::from_token(t)).collect();
        langs.sort();
        langs
    }

    /// One token per line; the line number is the index.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() || lines[..RESERVED.len()] != RESERVED {
            return Err(G2pError::Format {
                what: "vocabulary",
                detail: "missing reserved tokens".into(),
            });
        }
        Self::from_tokens(lines[RESERVED.len()..].iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_lexicon;
    use proptest::prelude::*;

    fn entry(src: &[&str]) -> LexiconEntry {
        LexiconEntry::new(
            LangCode::new("eng").unwrap(),
            src.iter().map(|s| s.to_string()).collect(),
            vec!["p".into()],
        )
        .unwrap()
    }

    fn src_side() -> Side {
        Side::Source { lang_token: false }
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let entries = [entry(&["a", "b", "a"]), entry(&["a"])];
        let v = Vocabulary::build(&entries, src_side(), 1).unwrap();
        assert_eq!(v.tokens(), ["<PAD>", "<BOS>", "<EOS>", "<UNK>", "a", "b"]);
        let ties = [entry(&["z", "c", "m"])];
        let v = Vocabulary::build(&ties, src_side(), 1).unwrap();
        assert_eq!(&v.tokens()[4..], ["c", "m", "z"]);
    }

    #[test]
    fn min_count_cutoff_maps_to_unk() {
        let entries = [entry(&["a", "b", "a"]), entry(&["a"])];
        let v = Vocabulary::build(&entries, src_side(), 2).unwrap();
        assert_eq!(v.tokens(), ["<PAD>", "<BOS>", "<EOS>", "<UNK>", "a"]);
        assert_eq!(v.encode(&["b", "a"]), vec![UNK, 4]);
    }

    #[test]
    fn example_rows_source_vocabulary() {
        let text = "deu\tAnsbach\ta: n s b a: x\n\
                    deu\tKaninchen\tk a: n I n x @ n\n\
                    eus\tuntxi\tu n t S I\n";
        let entries = parse_lexicon(text).entries;
        let v = Vocabulary::build(&entries, Side::Source { lang_token: true }, 1).unwrap();
        assert!(v.contains("<deu>") && v.contains("<eus>"));
        let letters = v.tokens()[4..].iter().filter(|t| LangCode::from_token(t).is_none()).count();
        assert_eq!(letters, 13);
        assert_eq!(v.len(), 4 + 2 + 13);
        let langs: Vec<String> = v.languages().iter().map(|l| l.to_string()).collect();
        assert_eq!(langs, ["deu", "eus"]);
    }

    #[test]
    fn empty_entries_error() {
        assert!(Vocabulary::build(&[], Side::Target, 1).is_err());
    }

    #[test]
    fn text_form_rejects_missing_reserved() {
        assert!(Vocabulary::from_text("a\nb\n").is_err());
        assert!(Vocabulary::from_text("<PAD>\n<BOS>\n<EOS>\n<UNK>\nx\nx\n").is_err());
    }

    proptest! {
        #[test]
        fn bijection_and_lossless_round_trip(words in prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 1..6), 1..10)) {
            let entries: Vec<LexiconEntry> = words
                .iter()
                .map(|w| entry(&w.iter().map(String::as_str).collect::<Vec<_>>()))
                .collect();
            let v = Vocabulary::build(&entries, src_side(), 1).unwrap();
            for (i, t) in v.tokens().iter().enumerate() {
                prop_assert_eq!(v.id(t), Some(i));
            }
            for e in &entries {
                let ids = v.encode(&e.graphemes);
                prop_assert!(!ids.contains(&UNK));
                prop_assert_eq!(v.decode(&ids), e.graphemes.clone());
            }
            prop_assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
        }
    }
}
