//! Word-level inference: tokenises a spelling, prepends the language token
//! and runs beam search.

use crate::corpus::{tokenize_graphemes, LangCode, Vocabulary, UNK};
use crate::decode::{beam_search, BeamConfig, NBestList};
use crate::error::Result;
use crate::model::{Decoder, Model};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Translation {
    pub nbest: NBestList,
    /// Hypotheses as phoneme strings, in rank order.
    pub phonemes: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

impl Translation {
    pub fn best(&self) -> &[String] {
        self.phonemes.first().map_or(&[], Vec::as_slice)
    }
}

pub struct Translator<'m, T: Scalar> {
    decoder: Decoder<'m, T>,
    src_vocab: &'m Vocabulary,
    tgt_vocab: &'m Vocabulary,
    use_lang_token: bool,
}

impl<'m, T: Scalar> Translator<'m, T> {
    pub fn new(model: &'m Model<T>, src_vocab: &'m Vocabulary, tgt_vocab: &'m Vocabulary, use_lang_token: bool) -> Self {
        Self {
            decoder: model.decoder(),
            src_vocab,
            tgt_vocab,
            use_lang_token,
        }
    }

    /// Source ids plus warnings about tokens the vocabulary lacks. An
    /// unknown language token is still fed (as UNK), never dropped.
    pub fn source_ids(&self, word: &str, lang: &LangCode) -> Result<(Vec<usize>, Vec<String>)> {
        let tokens = tokenize_graphemes(word, lang, self.use_lang_token)?;
        let ids = self.src_vocab.encode(&tokens);
        let mut warnings = Vec::new();
        for (tok, &id) in tokens.iter().zip(&ids) {
            if id == UNK {
                if LangCode::from_token(tok).is_some() {
                    warnings.push(format!("language token {tok} unseen in training"));
                } else {
                    warnings.push(format!("grapheme {tok:?} unseen in training"));
                }
            }
        }
        Ok((ids, warnings))
    }

    pub fn translate(&mut self, word: &str, lang: &LangCode, beam: &BeamConfig) -> Result<Translation> {
        let (ids, warnings) = self.source_ids(word, lang)?;
        let nbest = beam_search(&mut self.decoder, &ids, beam)?;
        Ok(Translation {
            phonemes: nbest.to_strings(self.tgt_vocab),
            nbest,
            warnings,
        })
    }
}
