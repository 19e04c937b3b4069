pub mod audio;
pub mod curate;
pub mod eval;
pub mod grid;
pub mod pseudo;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::Context;
use vnd_core::corpus::{self, Corpus, Schema};
use vnd_core::curation::{self, CuratedSet};

use crate::manifest::Run;
use crate::CliResult;

/// Loads and merges labeled-schema corpus files.
pub fn load_corpora(paths: &[PathBuf], run: &mut Run) -> CliResult<Corpus> {
    let mut parts = Vec::with_capacity(paths.len());
    for p in paths {
        run.input(p);
        parts.push(corpus::load_corpus(p, Schema::Labeled).with_context(|| format!("loading corpus {}", p.display()))?);
    }
    let refs: Vec<&Corpus> = parts.iter().collect();
    Ok(Corpus::merge(&refs)?)
}

pub fn load_corpus(path: &Path, schema: Schema, run: &mut Run) -> CliResult<Corpus> {
    run.input(path);
    Ok(corpus::load_corpus(path, schema).with_context(|| format!("loading corpus {}", path.display()))?)
}

pub fn load_set(path: &Path, run: &mut Run) -> CliResult<CuratedSet> {
    run.input(path);
    Ok(curation::load_curated(path).with_context(|| format!("loading curated set {}", path.display()))?)
}

/// Creates the parent directory of an output file.
pub fn prepare_output(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}
