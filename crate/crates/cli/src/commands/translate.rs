use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use polyg2p::corpus::LangCode;
use polyg2p::decode::write_nbest;
use polyg2p::translate::Translator;
use polyg2p::RunConfig;

use super::*;
use crate::args::TranslateArgs;
use crate::manifest::Manifest;

/// Language code used when the model was trained without language tokens.
pub(crate) const UNDETERMINED: &str = "und";

/// `(lang, word)` pairs from `word` or `lang<TAB>word` lines.
fn parse_input(text: &str, default_lang: Option<&str>) -> Result<Vec<(Option<String>, String)>> {
    let mut items = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let item = match fields.as_slice() {
            [word] => (default_lang.map(str::to_string), word.trim().to_string()),
            [lang, word] => (Some(lang.trim().to_string()), word.trim().to_string()),
            _ => bail!("input line {}: expected `word` or `lang<TAB>word`", i + 1),
        };
        if item.1.is_empty() {
            bail!("input line {}: empty word", i + 1);
        }
        items.push(item);
    }
    Ok(items)
}

pub(super) fn run(cfg: &RunConfig, a: &TranslateArgs, out: &mut dyn Write) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let items = match (&a.word, &a.input) {
        (Some(w), _) => vec![(a.lang.clone(), w.clone())],
        (None, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_input(&text, a.lang.as_deref())?
        }
        (None, None) => bail!("give --word or --input"),
    };
    let beam = beam(cfg, a.width.unwrap_or(cfg.translate_width))?;
    let mut tr = Translator::new(&ck.model, &ck.src_vocab, &ck.tgt_vocab, ck.lang_token);
    let mut buf = Vec::new();
    for (lang, word) in &items {
        let lang = match (lang, ck.lang_token) {
            (Some(l), _) => LangCode::new(l)?,
            (None, false) => LangCode::new(UNDETERMINED)?,
            (None, true) => bail!("no language for {word:?}: this model needs --lang or `lang<TAB>word` input"),
        };
        let t = tr.translate(word, &lang, &beam)?;
        for w in &t.warnings {
            log::warn!("{word}: {w}");
        }
        write_nbest(&mut buf, word, &t.nbest, &ck.tgt_vocab)?;
    }
    match &a.output {
        Some(path) => {
            write_file(path, &buf)?;
            let mut inputs = vec![a.checkpoint.clone()];
            inputs.extend(a.input.clone());
            let mut mpath = path.clone().into_os_string();
            mpath.push(".manifest.json");
            Manifest {
                command: "translate".into(),
                config: cfg.clone(),
                inputs,
                outputs: vec![path.clone()],
            }
            .write(std::path::Path::new(&mpath))?;
        }
        None => out.write_all(&buf)?,
    }
    Ok(())
}
