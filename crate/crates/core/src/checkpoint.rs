//! Self-describing binary checkpoints.
//!
//! Layout, all integers little-endian:
//! `MG2P`, version `u32`, tensor count `u64`, then per tensor its name
//! (`u64` length + UTF-8), rank `u64` and dims `u64`; then every tensor's
//! data as `f32`, in manifest order; then the source vocabulary, target
//! vocabulary and config block, each as `u64` length + UTF-8 text.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::{parse_key_values, RunConfig};
use crate::corpus::Vocabulary;
use crate::error::{G2pError, Result};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MG2P";
pub const VERSION: u32 = 1;
/// Row-block order of every LSTM weight matrix and bias.
pub const GATE_ORDER: &str = "input,forget,cell,output";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    /// Completed training epochs.
    pub epoch: usize,
    pub lang_token: bool,
    pub train_languages: Vec<String>,
    /// Validation loss after `epoch`, when measured.
    pub val_loss: Option<f64>,
    /// Run settings the weights were trained with.
    pub run: Option<RunConfig>,
}

fn err(detail: impl Into<String>) -> G2pError {
    G2pError::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_text(out: &mut Vec<u8>, s: &str) {
    put_u64(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| err("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| err("length overflow"))
    }

    fn text(&mut self) -> Result<&'a str> {
        let n = self.u64()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| err("invalid UTF-8"))
    }
}

fn config_block(c: &Checkpoint) -> String {
    let m = &c.model.config;
    let mut s = format!(
        "gate_order = {GATE_ORDER}\nhidden_size = {}\nsrc_embed = {}\ntgt_embed = {}\nenc_layers = {}\n\
         dec_layers = {}\ndropout = {}\ninput_feeding = {}\nsrc_vocab_size = {}\ntgt_vocab_size = {}\n\
         epoch = {}\nlang_token = {}\ntrain_languages = {}\nval_loss = {}\n",
        m.hidden_size,
        m.src_embed,
        m.tgt_embed,
        m.enc_layers,
        m.dec_layers,
        m.dropout,
        m.input_feeding,
        m.src_vocab_size,
        m.tgt_vocab_size,
        c.epoch,
        c.lang_token,
        c.train_languages.join(","),
        c.val_loss.map_or_else(|| "none".to_string(), |v| v.to_string()),
    );
    if let Some(run) = &c.run {
        for line in run.to_text().lines() {
            s.push_str("run.");
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

impl Checkpoint {
    /// Wraps any-precision weights; they are stored as `f32`.
    pub fn new<T: Scalar>(model: &Model<T>, src_vocab: Vocabulary, tgt_vocab: Vocabulary, lang_token: bool) -> Self {
        Self {
            model: model.cast(),
            src_vocab,
            tgt_vocab,
            epoch: 0,
            lang_token,
            train_languages: Vec::new(),
            val_loss: None,
            run: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let named = self.model.params.named();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u64(&mut out, named.len());
        for (name, t) in &named {
            put_text(&mut out, name);
            put_u64(&mut out, t.rank());
            for &d in t.shape() {
                put_u64(&mut out, d);
            }
        }
        for (_, t) in &named {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_text(&mut out, &self.src_vocab.to_text());
        put_text(&mut out, &self.tgt_vocab.to_text());
        put_text(&mut out, &config_block(self));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(err("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let count = r.u64()?;
        let mut manifest = Vec::new();
        for _ in 0..count {
            let name = r.text()?.to_string();
            let rank = r.u64()?;
            if rank > 8 {
                return Err(err(format!("{name}: implausible rank {rank}")));
            }
            let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            manifest.push((name, dims));
        }
        let mut tensors = Vec::new();
        for (name, dims) in &manifest {
            let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| err("size overflow"))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| err("size overflow"))?)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
            tensors.push((name.clone(), Tensor::new(dims.clone(), data)?));
        }
        let src_vocab = Vocabulary::from_text(r.text()?)?;
        let tgt_vocab = Vocabulary::from_text(r.text()?)?;
        let block = r.text()?;
        if r.pos != bytes.len() {
            return Err(err("trailing bytes"));
        }

        let kv = parse_key_values(block)?;
        let get = |k: &str| kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str()).ok_or_else(|| err(format!("missing {k}")));
        let num = |k: &str| get(k)?.parse::<usize>().map_err(|_| err(format!("bad {k}")));
        let flag = |k: &str| get(k)?.parse::<bool>().map_err(|_| err(format!("bad {k}")));
        if get("gate_order")? != GATE_ORDER {
            return Err(err(format!("unsupported gate order {}", get("gate_order")?)));
        }
        let config = ModelConfig {
            hidden_size: num("hidden_size")?,
            src_embed: num("src_embed")?,
            tgt_embed: num("tgt_embed")?,
            enc_layers: num("enc_layers")?,
            dec_layers: num("dec_layers")?,
            dropout: get("dropout")?.parse().map_err(|_| err("bad dropout"))?,
            input_feeding: flag("input_feeding")?,
            src_vocab_size: num("src_vocab_size")?,
            tgt_vocab_size: num("tgt_vocab_size")?,
        };
        if config.src_vocab_size != src_vocab.len() || config.tgt_vocab_size != tgt_vocab.len() {
            return Err(err("vocabulary sizes disagree with the config block"));
        }
        let run_lines: String = kv
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("run.").map(|k| format!("{k} = {v}\n")))
            .collect();
        let run = if run_lines.is_empty() { None } else { Some(RunConfig::from_text(&run_lines)?) };

        let expected = ModelParams::<Tensor<f32>>::shapes(&config);
        let names = expected.names();
        if names.len() != tensors.len() || names.iter().zip(&tensors).any(|(a, (b, _))| a != b) {
            return Err(err("tensor names do not match the model layout"));
        }
        let params = expected
            .with_values(tensors.into_iter().map(|(_, t)| t).collect())
            .expect("count checked");
        let model = Model::from_params(config, params)?;
        let train_languages = get("train_languages")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let val_loss = match get("val_loss")? {
            "none" => None,
            v => Some(v.parse().map_err(|_| err("bad val_loss"))?),
        };
        Ok(Self {
            model,
            src_vocab,
            tgt_vocab,
            val_loss,
            epoch: num("epoch")?,
            lang_token: flag("lang_token")?,
            train_languages,
            run,
        })
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
