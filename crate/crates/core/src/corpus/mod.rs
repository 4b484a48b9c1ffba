//! Pronunciation lexicons: parsing, language-ID tokens, per-language
//! splits, vocabularies and inventory-based transcription cleaning.

mod inventory;
mod lexicon;
mod split;
mod vocab;

pub use inventory::{clean_transcription, parse_inventory, Cleaned, FeatureTable, InventorySet, PhonemeInventory};
pub use lexicon::{parse_lexicon, read_lexicon, write_lexicon, ParsedLexicon, Reject};
pub use split::{split_train_val, DatasetSplit, DEFAULT_CAP, DEFAULT_VAL_FRACTION};
pub use vocab::{Side, Vocabulary, BOS, EOS, PAD, UNK};

use std::fmt;

use unicode_normalization::UnicodeNormalization;

use crate::error::{G2pError, Result};

/// ISO 639-3 language code: exactly three lowercase ASCII letters.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        if code.len() == 3 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(Self(code.to_string()))
        } else {
            Err(G2pError::InvalidArgument(format!("bad language code `{code}`")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The artificial source token, e.g. `<eng>`.
    pub fn token(&self) -> String {
        format!("<{}>", self.0)
    }

    /// Inverse of [`LangCode::token`].
    pub fn from_token(token: &str) -> Option<Self> {
        token
            .strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .and_then(|c| Self::new(c).ok())
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One spelling/pronunciation pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LexiconEntry {
    pub lang: LangCode,
    pub graphemes: Vec<String>,
    pub phonemes: Vec<String>,
}

impl LexiconEntry {
    pub fn new(lang: LangCode, graphemes: Vec<String>, phonemes: Vec<String>) -> Result<Self> {
        if graphemes.is_empty() {
            return Err(G2pError::EmptySource);
        }
        if phonemes.is_empty() {
            return Err(G2pError::EmptyTarget);
        }
        if let Some(bad) = graphemes.iter().chain(&phonemes).find(|t| !valid_token(t)) {
            return Err(G2pError::InvalidArgument(format!("invalid token {bad:?}")));
        }
        Ok(Self {
            lang,
            graphemes,
            phonemes,
        })
    }

    /// Model source sequence, with the language token in front if requested.
    pub fn source_tokens(&self, use_lang_token: bool) -> Vec<String> {
        let mut out = Vec::with_capacity(self.graphemes.len() + 1);
        if use_lang_token {
            out.push(self.lang.token());
        }
        out.extend(self.graphemes.iter().cloned());
        out
    }

    pub fn spelling(&self) -> String {
        self.graphemes.concat()
    }
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

/// NFC-normalises `word` and splits it into codepoints, optionally
/// prefixed with the `<lang>` token. Case is preserved.
pub fn tokenize_graphemes(word: &str, lang: &LangCode, use_lang_token: bool) -> Result<Vec<String>> {
    let normalized: String = word.nfc().collect();
    if normalized.is_empty() {
        return Err(G2pError::EmptySource);
    }
    let mut out = Vec::with_capacity(normalized.chars().count() + 1);
    if use_lang_token {
        out.push(lang.token());
    }
    out.extend(normalized.chars().map(String::from));
    Ok(out)
}

/// NFC form of a single token, used when comparing phoneme sequences.
pub fn nfc(token: &str) -> String {
    token.nfc().collect()
}
