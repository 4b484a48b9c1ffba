mod analyze;
mod evaluate;
mod prepare;
mod train;
mod translate;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polyg2p::corpus::{read_lexicon, LexiconEntry, Vocabulary};
use polyg2p::decode::BeamConfig;
use polyg2p::{Checkpoint, RunConfig};

use crate::args::{Cli, Command};
use crate::manifest::config_text_from_manifest;

pub(crate) const TRAIN_FILE: &str = "train.tsv";
pub(crate) const VALID_FILE: &str = "valid.tsv";
pub(crate) const TEST_FILE: &str = "test.tsv";
pub(crate) const SRC_VOCAB_FILE: &str = "src.vocab";
pub(crate) const TGT_VOCAB_FILE: &str = "tgt.vocab";
pub(crate) const MANIFEST_FILE: &str = "manifest.json";

/// Defaults, then the config file (or a manifest's config), then `--set`
/// overrides in order.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let text = if path.extension().is_some_and(|e| e == "json") {
                config_text_from_manifest(&text)?
            } else {
                text
            };
            RunConfig::from_text(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {o:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Prepare(a) => prepare::run(&mut cfg, a, out),
        Command::Train(a) => train::run(&mut cfg, a, out),
        Command::Translate(a) => translate::run(&cfg, a, out),
        Command::Evaluate(a) => evaluate::run(&cfg, a, out),
        Command::Analyze(a) => analyze::run(&cfg, a, out),
    }
}

pub(crate) fn read_entries(path: &Path) -> Result<Vec<LexiconEntry>> {
    let parsed = read_lexicon(path).with_context(|| format!("reading lexicon {}", path.display()))?;
    if !parsed.rejects.is_empty() {
        log::warn!("{}: skipped {} malformed lines", path.display(), parsed.rejects.len());
        for r in parsed.rejects.iter().take(5) {
            log::warn!("  line {}: {}", r.line, r.reason);
        }
    }
    Ok(parsed.entries)
}

pub(crate) fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {} (run `prepare` first?)", path.display()))?;
    Ok(Vocabulary::from_text(&text)?)
}

pub(crate) fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub(crate) fn beam(cfg: &RunConfig, width: usize) -> Result<BeamConfig> {
    if width == 0 {
        bail!("beam width must be at least 1");
    }
    Ok(BeamConfig {
        width,
        max_len: None,
        length_penalty: cfg.length_penalty,
    })
}

pub(crate) fn create_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
