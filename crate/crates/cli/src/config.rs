//! TrainConfig resolution: defaults, then the TOML file, then flags.

use std::path::Path;

use anyhow::Context;
use vnd_core::objective::OptimizerKind;
use vnd_core::{LossKind, TrainConfig};

use crate::args::{LossArg, OptimizerArg, TrainFlags};
use crate::{usage, CliResult};

fn from_file(path: &Path) -> CliResult<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let known = match serde_json::to_value(TrainConfig::default())? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("TrainConfig serializes to an object"),
    };
    if let Some(key) = table.keys().find(|k| !known.contains_key(k.as_str())) {
        return usage(format!("unknown key `{key}` in config {}", path.display()));
    }
    let cfg: TrainConfig = table
        .try_into()
        .with_context(|| format!("invalid value in config {}", path.display()))?;
    Ok(cfg)
}

pub fn resolve(flags: &TrainFlags, seed: u64) -> CliResult<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(p) => from_file(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(v) = flags.neg {
        cfg.n_negatives = v;
    }
    if let Some(v) = flags.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.loss {
        cfg.loss_kind = match v {
            LossArg::Nce => LossKind::Nce,
            LossArg::Milnce => LossKind::Milnce,
            LossArg::Oc => LossKind::Oc,
        };
    }
    if let Some(v) = flags.optimizer {
        cfg.optimizer = match v {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        };
    }
    if let Some(v) = flags.embed_dim {
        cfg.embed_dim = v;
    }
    if let Some(v) = flags.mil_p {
        cfg.mil_p = v;
    }
    if flags.patience.is_some() {
        cfg.patience = flags.patience;
    }
    cfg.freeze_text_head |= flags.freeze_text_head;
    cfg.symmetric_negatives |= flags.symmetric_negatives;
    if flags.no_bias {
        cfg.use_bias = false;
    }
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}
