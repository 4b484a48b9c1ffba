use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use polyg2p::corpus::LexiconEntry;
use polyg2p::decode::{write_nbest, BeamConfig};
use polyg2p::eval::{evaluate, EvalItem};
use polyg2p::translate::{Translation, Translator};
use polyg2p::{Checkpoint, RunConfig};

use super::*;
use crate::args::EvaluateArgs;
use crate::manifest::Manifest;

fn test_path(cfg: &RunConfig, a: &EvaluateArgs) -> Result<PathBuf> {
    if let Some(p) = &a.test {
        return Ok(p.clone());
    }
    let prepared = cfg.data_dir.join(TEST_FILE);
    if prepared.exists() {
        return Ok(prepared);
    }
    cfg.test_lexicon
        .clone()
        .context("no test lexicon: pass --test or set test_lexicon")
}

fn decode_chunk(ck: &Checkpoint, entries: &[LexiconEntry], beam: &BeamConfig) -> Result<Vec<Translation>> {
    let mut tr = Translator::new(&ck.model, &ck.src_vocab, &ck.tgt_vocab, ck.lang_token);
    entries
        .iter()
        .map(|e| Ok(tr.translate(&e.spelling(), &e.lang, beam)?))
        .collect()
}

/// Decodes every entry, splitting the work over `threads` contiguous chunks.
/// Output order matches `entries`.
fn decode_all(ck: &Checkpoint, entries: &[LexiconEntry], beam: &BeamConfig, threads: usize) -> Result<Vec<Translation>> {
    let threads = match threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(entries.len())
    .max(1);
    let chunk = entries.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = entries
            .chunks(chunk)
            .map(|part| s.spawn(move || decode_chunk(ck, part, beam)))
            .collect();
        let mut all = Vec::with_capacity(entries.len());
        for h in handles {
            all.extend(h.join().map_err(|_| anyhow::anyhow!("decoding thread panicked"))??);
        }
        Ok(all)
    })
}

pub(super) fn run(cfg: &RunConfig, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let path = test_path(cfg, a)?;
    let mut entries = read_entries(&path)?;
    if a.unseen_only {
        let seen: BTreeSet<&str> = ck.train_languages.iter().map(String::as_str).collect();
        entries.retain(|e| !seen.contains(e.lang.as_str()));
        if entries.is_empty() {
            bail!("every test language was seen in training; nothing to score with --unseen-only");
        }
    }
    if entries.is_empty() {
        bail!("{} has no entries", path.display());
    }
    let width = a.width.unwrap_or(cfg.beam_width);
    let beam = beam(cfg, width)?;
    let translations = decode_all(&ck, &entries, &beam, a.threads)?;

    let mut nbest = Vec::new();
    let mut items = Vec::with_capacity(entries.len());
    let mut unseen = 0usize;
    for (e, t) in entries.iter().zip(translations) {
        unseen += usize::from(!t.warnings.is_empty());
        write_nbest(&mut nbest, &format!("{}{}", e.lang.token(), e.spelling()), &t.nbest, &ck.tgt_vocab)?;
        items.push(EvalItem {
            lang: e.lang.to_string(),
            gold: e.phonemes.clone(),
            nbest: t.phonemes,
        });
    }
    if unseen > 0 {
        log::warn!("{unseen} test words contain tokens unseen in training");
    }
    let mut expected: Vec<String> = entries.iter().map(|e| e.lang.to_string()).collect();
    expected.sort();
    expected.dedup();
    let report = evaluate(&items, &expected, cfg.per_mode, Some(width))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    let dir = create_dir(&a.out_dir)?;
    let tsv = report.to_tsv();
    let outputs = vec![dir.join("report.tsv"), dir.join("report.json"), dir.join("nbest.tsv")];
    write_file(&outputs[0], &tsv)?;
    write_file(&outputs[1], report.to_json())?;
    write_file(&outputs[2], &nbest)?;
    Manifest {
        command: "evaluate".into(),
        config: cfg.clone(),
        inputs: vec![a.checkpoint.clone(), path],
        outputs,
    }
    .write(&dir.join(MANIFEST_FILE))?;
    out.write_all(tsv.as_bytes())?;
    Ok(())
}
