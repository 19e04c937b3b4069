//! Run manifests: one JSON file per invocation recording what ran, with
//! which resolved parameters, on which files, and how it ended.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use crate::args::{AudioCommand, Command};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config_path: Option<PathBuf>,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Recorded results (ROC-AUC, counts, thresholds, ...).
    pub results: BTreeMap<String, Value>,
    pub wall_clock_s: f64,
    pub exit_status: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Run {
    started: Instant,
    path: Option<PathBuf>,
    manifest: RunManifest,
}

/// `<input>.<suffix>` next to an input, for commands without a file output.
fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// `<out>.manifest.json` beside a file output, `<dir>/manifest.json` for a directory output.
fn manifest_path(command: &Command) -> PathBuf {
    let beside = |p: &Path| sibling(p, "manifest.json");
    match command {
        Command::Synth(a) => a.out.join("manifest.json"),
        Command::Curate(a) => beside(&a.out),
        Command::Train(a) => beside(&a.out),
        Command::Pseudo(a) => beside(&a.out),
        Command::Grid(a) => beside(&a.out),
        Command::Eval(a) => match &a.out {
            Some(out) => beside(out),
            None => sibling(&a.gold, "eval.manifest.json"),
        },
        Command::Audio(a) => match &a.command {
            AudioCommand::Mel(m) => beside(&m.out),
            AudioCommand::Train(t) => beside(&t.out),
            AudioCommand::Eval(e) => match &e.out {
                Some(out) => beside(out),
                None => sibling(&e.model, "eval.manifest.json"),
            },
        },
    }
}

impl Run {
    pub fn start(command: &Command) -> Self {
        Self {
            started: Instant::now(),
            path: Some(manifest_path(command)),
            manifest: RunManifest {
                command: command.name().to_string(),
                version: env!("CARGO_PKG_VERSION"),
                config_path: None,
                params: BTreeMap::new(),
                seed: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                results: BTreeMap::new(),
                wall_clock_s: 0.0,
                exit_status: 0,
                error: None,
            },
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.manifest.params.insert(key.to_string(), v);
    }

    pub fn params(&mut self, map: BTreeMap<String, Value>) {
        self.manifest.params.extend(map);
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.manifest.results.insert(key.to_string(), v);
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn config(&mut self, path: Option<&Path>) {
        self.manifest.config_path = path.map(Path::to_path_buf);
    }

    pub fn input(&mut self, path: &Path) {
        if self.manifest.inputs.iter().any(|p| p == path) {
            return;
        }
        self.manifest.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    pub fn finish(mut self, exit_status: u8, error: Option<String>) -> anyhow::Result<()> {
        self.manifest.exit_status = exit_status;
        self.manifest.error = error;
        self.manifest.wall_clock_s = self.started.elapsed().as_secs_f64();
        let Some(path) = self.path.take() else {
            return Ok(());
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.exists() {
                // nothing was written; don't create directories just for the manifest
                return Ok(());
            }
        }
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
