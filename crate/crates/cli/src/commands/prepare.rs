use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use polyg2p::corpus::{
    clean_transcription, parse_inventory, split_train_val, write_lexicon, LangCode, LexiconEntry, Side, Vocabulary,
};
use polyg2p::RunConfig;

use super::*;
use crate::args::PrepareArgs;
use crate::manifest::Manifest;

fn language_filter(a: &PrepareArgs) -> Result<Option<Vec<String>>> {
    let raw = match (&a.languages, &a.languages_file) {
        (Some(list), _) => list.clone(),
        (None, Some(path)) => fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join(","),
        (None, None) => return Ok(None),
    };
    Ok(Some(raw.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()))
}

fn clean(entries: &mut [LexiconEntry], cfg: &RunConfig) -> Result<()> {
    let Some(path) = &cfg.inventory else { return Ok(()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading inventory {}", path.display()))?;
    let set = parse_inventory(&text).with_context(|| format!("in inventory {}", path.display()))?;
    let (mut changed, mut unknown) = (0usize, BTreeSet::new());
    for e in entries.iter_mut() {
        let Some(inv) = set.inventories.get(&e.lang) else { continue };
        let cleaned = clean_transcription(&e.phonemes, inv, &set.table);
        changed += e.phonemes.iter().zip(&cleaned.phonemes).filter(|(a, b)| a != b).count();
        unknown.extend(cleaned.warnings);
        e.phonemes = cleaned.phonemes;
    }
    log::info!("inventory cleaning replaced {changed} phonemes");
    for w in &unknown {
        log::warn!("{w}");
    }
    Ok(())
}

fn stats_table(all: &[LexiconEntry], train: &[LexiconEntry], valid: &[LexiconEntry]) -> String {
    #[derive(Default)]
    struct Row {
        words: usize,
        train: usize,
        valid: usize,
        graphemes: BTreeSet<String>,
        phonemes: BTreeSet<String>,
    }
    let mut rows: BTreeMap<&str, Row> = BTreeMap::new();
    for e in all {
        let r = rows.entry(e.lang.as_str()).or_default();
        r.words += 1;
        r.graphemes.extend(e.graphemes.iter().cloned());
        r.phonemes.extend(e.phonemes.iter().cloned());
    }
    for e in train {
        rows.entry(e.lang.as_str()).or_default().train += 1;
    }
    for e in valid {
        rows.entry(e.lang.as_str()).or_default().valid += 1;
    }
    let mut s = String::from("lang\twords\ttrain\tvalid\tgraphemes\tphonemes\n");
    let (mut g_all, mut p_all) = (BTreeSet::new(), BTreeSet::new());
    for (lang, r) in &rows {
        let _ = writeln!(
            s,
            "{lang}\t{}\t{}\t{}\t{}\t{}",
            r.words,
            r.train,
            r.valid,
            r.graphemes.len(),
            r.phonemes.len()
        );
        g_all.extend(r.graphemes.iter());
        p_all.extend(r.phonemes.iter());
    }
    let _ = writeln!(
        s,
        "TOTAL({} languages)\t{}\t{}\t{}\t{}\t{}",
        rows.len(),
        all.len(),
        train.len(),
        valid.len(),
        g_all.len(),
        p_all.len()
    );
    s
}

pub(super) fn run(cfg: &mut RunConfig, a: &PrepareArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(p) = &a.train_lexicon {
        cfg.train_lexicon = Some(p.clone());
    }
    if let Some(d) = &a.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(p) = &a.inventory {
        cfg.inventory = Some(p.clone());
    }
    if let Some(f) = language_filter(a)? {
        cfg.language_filter = Some(f);
    }
    let lexicon = cfg
        .train_lexicon
        .clone()
        .context("no training lexicon: pass --train-lexicon or set train_lexicon")?;
    let mut entries = read_entries(&lexicon)?;
    if let Some(filter) = &cfg.language_filter {
        if filter.is_empty() {
            bail!("language filter is empty");
        }
        let keep: BTreeSet<LangCode> = filter.iter().map(|c| LangCode::new(c)).collect::<polyg2p::Result<_>>()?;
        entries.retain(|e| keep.contains(&e.lang));
    }
    if entries.is_empty() {
        bail!("no lexicon entries left after filtering");
    }
    clean(&mut entries, cfg)?;
    let split = split_train_val(&entries, cfg.cap, cfg.val_fraction, cfg.seed)?;
    let src = Vocabulary::build(&split.train, Side::Source { lang_token: cfg.lang_token }, cfg.min_count)?;
    let tgt = Vocabulary::build(&split.train, Side::Target, cfg.min_count)?;

    let dir = create_dir(&cfg.data_dir)?;
    let mut outputs = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        outputs.push(p);
        Ok(())
    };
    let lex_bytes = |e: &[LexiconEntry]| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_lexicon(&mut buf, e)?;
        Ok(buf)
    };
    emit(TRAIN_FILE, lex_bytes(&split.train)?)?;
    emit(VALID_FILE, lex_bytes(&split.validation)?)?;
    emit(SRC_VOCAB_FILE, src.to_text().into_bytes())?;
    emit(TGT_VOCAB_FILE, tgt.to_text().into_bytes())?;
    let mut inputs = vec![lexicon];
    if let Some(test) = cfg.test_lexicon.clone() {
        let mut test_entries = read_entries(&test)?;
        clean(&mut test_entries, cfg)?;
        emit(TEST_FILE, lex_bytes(&test_entries)?)?;
        inputs.push(test);
    }
    let stats = stats_table(&entries, &split.train, &split.validation);
    emit("stats.tsv", stats.clone().into_bytes())?;
    if let Some(inv) = &cfg.inventory {
        inputs.push(inv.clone());
    }
    Manifest {
        command: "prepare".into(),
        config: cfg.clone(),
        inputs,
        outputs,
    }
    .write(&dir.join(MANIFEST_FILE))?;
    write!(out, "{stats}")?;
    log::info!(
        "source vocabulary {} tokens, target vocabulary {} tokens",
        src.len(),
        tgt.len()
    );
    Ok(())
}
