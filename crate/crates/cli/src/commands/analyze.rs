use std::io::Write;

use anyhow::{bail, Result};
use polyg2p::analysis::{format_neighbors, format_translations, nearest_languages, nearest_phonemes, translate_as};
use polyg2p::corpus::LangCode;
use polyg2p::RunConfig;

use super::*;
use crate::args::{AnalyzeArgs, AnalyzeMode};

pub(super) fn run(cfg: &RunConfig, a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let text = match a.mode {
        AnalyzeMode::Phonemes => {
            if a.queries.is_empty() {
                bail!("give at least one phoneme to query");
            }
            let lists = a
                .queries
                .iter()
                .map(|q| nearest_phonemes(&ck.model, &ck.tgt_vocab, q, a.k))
                .collect::<polyg2p::Result<Vec<_>>>()?;
            format_neighbors(&lists)
        }
        AnalyzeMode::Languages => {
            if !ck.lang_token {
                bail!("this model was trained without language tokens");
            }
            let queries: Vec<LangCode> = if a.queries.is_empty() {
                ck.src_vocab.languages()
            } else {
                a.queries.iter().map(|q| LangCode::new(q)).collect::<polyg2p::Result<_>>()?
            };
            let lists = queries
                .iter()
                .map(|q| nearest_languages(&ck.model, &ck.src_vocab, q, a.k))
                .collect::<polyg2p::Result<Vec<_>>>()?;
            format_neighbors(&lists)
        }
        AnalyzeMode::Crosstoken => {
            if !ck.lang_token {
                bail!("cross-token translation needs a model trained with language tokens");
            }
            let Some(word) = &a.word else { bail!("give --word") };
            let langs: Vec<LangCode> = if a.queries.is_empty() {
                ck.src_vocab.languages()
            } else {
                a.queries.iter().map(|q| LangCode::new(q)).collect::<polyg2p::Result<_>>()?
            };
            let beam = beam(cfg, a.width.unwrap_or(cfg.translate_width))?;
            let rows = translate_as(&ck.model, &ck.src_vocab, &ck.tgt_vocab, word, &langs, &beam)?;
            format_translations(word, &rows)
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}
