//! Flat `key = value` run configuration.

use std::path::PathBuf;

use crate::corpus::{DEFAULT_CAP, DEFAULT_VAL_FRACTION};
use crate::error::{G2pError, Result};
use crate::eval::PerMode;
use crate::model::{LrDecay, ModelConfig, Schedule};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// repeated keys keep the last value.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| G2pError::Format {
            what: "config",
            detail: format!("line {}: expected key = value", i + 1),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        out.retain(|(old, _)| *old != k);
        out.push((k, v));
    }
    Ok(out)
}

fn bad(key: &str, value: &str) -> G2pError {
    G2pError::Config(format!("invalid value {value:?} for {key}"))
}

fn parse<F: std::str::FromStr>(key: &str, value: &str) -> Result<F> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn parse_opt<F: std::str::FromStr>(key: &str, value: &str) -> Result<Option<F>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<F: ToString>(v: &Option<F>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), ToString::to_string)
}

fn show_bool(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train_lexicon: Option<PathBuf>,
    pub test_lexicon: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,

    pub hidden_size: usize,
    pub src_embed: usize,
    pub tgt_embed: usize,
    pub layers: usize,
    pub dropout: f64,
    pub input_feeding: bool,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip: Option<f64>,
    pub lr_decay_factor: Option<f64>,
    pub lr_decay_start: Option<usize>,
    pub bucket_window: usize,
    pub seed: u64,

    pub lang_token: bool,
    /// `None` keeps every language.
    pub language_filter: Option<Vec<String>>,
    pub min_count: usize,
    pub val_fraction: f64,
    pub cap: usize,

    pub beam_width: usize,
    pub translate_width: usize,
    pub length_penalty: Option<f64>,
    pub per_mode: PerMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = Schedule::default();
        Self {
            train_lexicon: None,
            test_lexicon: None,
            inventory: None,
            data_dir: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
            hidden_size: 150,
            src_embed: 150,
            tgt_embed: 150,
            layers: 2,
            dropout: 0.3,
            input_feeding: true,
            epochs: s.epochs,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            clip: s.clip,
            lr_decay_factor: None,
            lr_decay_start: None,
            bucket_window: s.bucket_window,
            seed: 1,
            lang_token: true,
            language_filter: None,
            min_count: 1,
            val_fraction: DEFAULT_VAL_FRACTION,
            cap: DEFAULT_CAP,
            beam_width: 100,
            translate_width: 10,
            length_penalty: None,
            per_mode: PerMode::MeanOfRatios,
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in parse_key_values(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty() && v != "none").then(|| PathBuf::from(v));
        match key {
            "train_lexicon" => self.train_lexicon = path(value),
            "test_lexicon" => self.test_lexicon = path(value),
            "inventory" => self.inventory = path(value),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(value),
            "hidden_size" => self.hidden_size = parse(key, value)?,
            "src_embed" => self.src_embed = parse(key, value)?,
            "tgt_embed" => self.tgt_embed = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "input_feeding" => self.input_feeding = parse_bool(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "clip" => self.clip = parse_opt(key, value)?,
            "lr_decay_factor" => self.lr_decay_factor = parse_opt(key, value)?,
            "lr_decay_start" => self.lr_decay_start = parse_opt(key, value)?,
            "bucket_window" => self.bucket_window = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lang_token" => self.lang_token = parse_bool(key, value)?,
            "language_filter" => {
                self.language_filter = if value == "none" {
                    None
                } else {
                    Some(value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
                }
            }
            "min_count" => self.min_count = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "cap" => self.cap = parse(key, value)?,
            "beam_width" => self.beam_width = parse(key, value)?,
            "translate_width" => self.translate_width = parse(key, value)?,
            "length_penalty" => self.length_penalty = parse_opt(key, value)?,
            "per_mode" => {
                self.per_mode = match value {
                    "mean_of_ratios" => PerMode::MeanOfRatios,
                    "ratio_of_sums" => PerMode::RatioOfSums,
                    _ => return Err(bad(key, value)),
                }
            }
            _ => return Err(G2pError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key in a fixed order; `from_text(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let p = |v: &Option<PathBuf>| v.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string());
        let rows: Vec<(&str, String)> = vec![
            ("train_lexicon", p(&self.train_lexicon)),
            ("test_lexicon", p(&self.test_lexicon)),
            ("inventory", p(&self.inventory)),
            ("data_dir", self.data_dir.display().to_string()),
            ("checkpoint_dir", self.checkpoint_dir.display().to_string()),
            ("hidden_size", self.hidden_size.to_string()),
            ("src_embed", self.src_embed.to_string()),
            ("tgt_embed", self.tgt_embed.to_string()),
            ("layers", self.layers.to_string()),
            ("dropout", self.dropout.to_string()),
            ("input_feeding", show_bool(self.input_feeding).into()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("clip", show_opt(&self.clip)),
            ("lr_decay_factor", show_opt(&self.lr_decay_factor)),
            ("lr_decay_start", show_opt(&self.lr_decay_start)),
            ("bucket_window", self.bucket_window.to_string()),
            ("seed", self.seed.to_string()),
            ("lang_token", show_bool(self.lang_token).into()),
            ("language_filter", self.language_filter.as_ref().map_or_else(|| "none".into(), |l| l.join(","))),
            ("min_count", self.min_count.to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            ("cap", self.cap.to_string()),
            ("beam_width", self.beam_width.to_string()),
            ("translate_width", self.translate_width.to_string()),
            ("length_penalty", show_opt(&self.length_penalty)),
            (
                "per_mode",
                match self.per_mode {
                    PerMode::MeanOfRatios => "mean_of_ratios",
                    PerMode::RatioOfSums => "ratio_of_sums",
                }
                .into(),
            ),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn model_config(&self, src_vocab_size: usize, tgt_vocab_size: usize) -> ModelConfig {
        ModelConfig {
            hidden_size: self.hidden_size,
            src_embed: self.src_embed,
            tgt_embed: self.tgt_embed,
            enc_layers: self.layers,
            dec_layers: self.layers,
            dropout: self.dropout,
            input_feeding: self.input_feeding,
            src_vocab_size,
            tgt_vocab_size,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let lr_decay = match (self.lr_decay_factor, self.lr_decay_start) {
            (Some(factor), Some(start_epoch)) => Some(LrDecay { factor, start_epoch }),
            (None, None) => None,
            _ => return Err(G2pError::Config("lr_decay_factor and lr_decay_start go together".into())),
        };
        let s = Schedule {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            clip: self.clip,
            lr_decay,
            seed: self.seed,
            bucket_window: self.bucket_window,
            start_epoch: 0,
        };
        s.validate()?;
        Ok(s)
    }
}
