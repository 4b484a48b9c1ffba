use std::fs::OpenOptions;
use std::io::Write;

use anyhow::{bail, Context, Result};
use polyg2p::model::{encode_pairs, train, EpochOutcome};
use polyg2p::{Checkpoint, Model, RunConfig};

use super::*;
use crate::args::TrainArgs;
use crate::manifest::Manifest;

pub(crate) const FINAL_CKPT: &str = "final.ckpt";
pub(crate) const BEST_CKPT: &str = "best.ckpt";
pub(crate) const LOG_FILE: &str = "train_log.tsv";
const LOG_HEADER: &str = "epoch\tlr\ttrain_loss\tval_loss\tupdates\tclipped\tmax_grad_norm\n";

pub(super) fn run(cfg: &mut RunConfig, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(d) = &a.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &a.checkpoint_dir {
        cfg.checkpoint_dir = d.clone();
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let data = cfg.data_dir.clone();
    let train_path = data.join(TRAIN_FILE);
    let valid_path = data.join(VALID_FILE);
    if !train_path.exists() {
        bail!("{} not found (run `prepare` first)", train_path.display());
    }
    let src = read_vocab(&data.join(SRC_VOCAB_FILE))?;
    let tgt = read_vocab(&data.join(TGT_VOCAB_FILE))?;
    let train_entries = read_entries(&train_path)?;
    let valid_entries = if valid_path.exists() { read_entries(&valid_path)? } else { Vec::new() };
    let train_pairs = encode_pairs(&train_entries, &src, &tgt, cfg.lang_token);
    let valid_pairs = encode_pairs(&valid_entries, &src, &tgt, cfg.lang_token);
    let mut languages: Vec<String> = train_entries.iter().map(|e| e.lang.to_string()).collect();
    languages.sort();
    languages.dedup();

    let dir = create_dir(&cfg.checkpoint_dir)?;
    let final_path = dir.join(FINAL_CKPT);
    let best_path = dir.join(BEST_CKPT);
    let log_path = dir.join(LOG_FILE);
    let mut schedule = cfg.schedule()?;
    let mut best_val = f64::INFINITY;
    let mut model = if a.resume {
        let ck = load_checkpoint(&final_path)?;
        if ck.src_vocab != src || ck.tgt_vocab != tgt {
            bail!("vocabularies in {} differ from the checkpoint being resumed", data.display());
        }
        if ck.lang_token != cfg.lang_token {
            bail!("checkpoint lang_token setting differs from the config");
        }
        if ck.epoch >= cfg.epochs {
            bail!("checkpoint already has {} epochs; raise `epochs` to continue", ck.epoch);
        }
        schedule.start_epoch = ck.epoch;
        if best_path.exists() {
            best_val = load_checkpoint(&best_path)?.val_loss.unwrap_or(f64::INFINITY);
        }
        log::info!("resuming after epoch {}", ck.epoch);
        ck.model
    } else {
        let m = Model::<f32>::new(cfg.model_config(src.len(), tgt.len()), cfg.seed)?;
        std::fs::write(&log_path, LOG_HEADER).with_context(|| format!("writing {}", log_path.display()))?;
        m
    };
    let model_cfg = cfg.model_config(src.len(), tgt.len());
    if a.resume && model.config != model_cfg {
        bail!("model settings differ from the checkpoint being resumed");
    }

    let run_cfg = cfg.clone();
    let snapshot = |m: &Model<f32>, epoch: usize, val: Option<f64>| {
        let mut ck = Checkpoint::new(m, src.clone(), tgt.clone(), run_cfg.lang_token);
        ck.epoch = epoch;
        ck.val_loss = val;
        ck.train_languages = languages.clone();
        ck.run = Some(run_cfg.clone());
        ck
    };
    let mut lines = Vec::new();
    train(&mut model, &train_pairs, &valid_pairs, &schedule, |log, m| {
        let val = log.val_loss;
        snapshot(m, log.epoch, val).save(&final_path)?;
        let improved = val.map_or(true, |v| v < best_val);
        if improved {
            best_val = val.unwrap_or(best_val);
            snapshot(m, log.epoch, val).save(&best_path)?;
        }
        let line = format!(
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{:.6}\n",
            log.epoch,
            log.learning_rate,
            log.train_loss,
            val.map_or_else(|| "-".to_string(), |v| format!("{v:.6}")),
            log.updates,
            log.clipped_updates,
            log.max_grad_norm
        );
        let mut f = OpenOptions::new().append(true).create(true).open(&log_path)?;
        f.write_all(line.as_bytes())?;
        log::info!(
            "epoch {} lr {} train {:.4} val {}{}",
            log.epoch,
            log.learning_rate,
            log.train_loss,
            val.map_or_else(|| "-".to_string(), |v| format!("{v:.4}")),
            if improved { " *" } else { "" }
        );
        lines.push(line);
        Ok(EpochOutcome::Continue)
    })?;
    for l in &lines {
        out.write_all(l.as_bytes())?;
    }
    Manifest {
        command: "train".into(),
        config: cfg.clone(),
        inputs: vec![train_path, valid_path, data.join(SRC_VOCAB_FILE), data.join(TGT_VOCAB_FILE)]
            .into_iter()
            .filter(|p| p.exists())
            .collect(),
        outputs: vec![final_path, best_path, log_path],
    }
    .write(&dir.join(MANIFEST_FILE))?;
    Ok(())
}
