use anyhow::Context;
use vnd_core::corpus::{Corpus, Schema};
use vnd_core::curation;
use vnd_core::trainer::{self, Checkpoint, ThresholdPolicy, Validation};

use crate::args::PseudoArgs;
use crate::cmd::{load_corpus, load_set, prepare_output};
use crate::manifest::Run;
use crate::{usage, CliResult};

pub fn run(a: &PseudoArgs, run: &mut Run) -> CliResult<()> {
    run.seed(a.seed);
    run.param("rounds", a.rounds);
    if a.rounds == 0 {
        return usage("--rounds must be at least 1");
    }
    if a.rounds > 1 && a.corpus.is_none() {
        return usage("--rounds > 1 retrains and needs the labeled --corpus");
    }
    if a.threshold.is_none() && a.val_gold.is_none() {
        return usage("give --threshold, or --val-corpus and --val-gold for a Youden-J threshold");
    }
    if a.threshold.is_some_and(f64::is_nan) {
        return usage("--threshold is NaN");
    }

    run.input(&a.checkpoint);
    let mut current = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let unlabeled = load_corpus(&a.unlabeled, Schema::Unlabeled, run)?;
    let base = load_set(&a.base, run)?;
    let val = match (&a.val_corpus, &a.val_gold) {
        (Some(c), Some(g)) => Some((load_corpus(c, Schema::Labeled, run)?, load_set(g, run)?)),
        _ => None,
    };
    let policy = match (a.threshold, &val) {
        (Some(t), _) => ThresholdPolicy::Fixed(t),
        (None, Some((corpus, gold))) => ThresholdPolicy::Youden(Validation { corpus, gold }),
        (None, None) => unreachable!("checked above"),
    };
    run.param(
        "threshold_policy",
        match policy {
            ThresholdPolicy::Fixed(_) => "fixed",
            ThresholdPolicy::Youden(_) => "youden",
        },
    );
    let merged = match &a.corpus {
        Some(p) => {
            let labeled = load_corpus(p, Schema::Labeled, run)?;
            Some(Corpus::merge(&[&labeled, &unlabeled])?)
        }
        None => None,
    };
    let mut cfg = current.config.clone();
    cfg.seed = a.seed;

    let mut thresholds = vec![policy.resolve(&current)?];
    let mut outcome = trainer::pseudo_label(&current, &unlabeled, thresholds[0], &base)?;
    for _ in 1..a.rounds {
        current = trainer::train(&outcome.set, merged.as_ref().expect("checked"), &cfg)?;
        let threshold = policy.resolve(&current)?;
        thresholds.push(threshold);
        outcome = trainer::pseudo_label(&current, &unlabeled, threshold, &base)?;
    }

    prepare_output(&a.out)?;
    curation::write_curated(&outcome.set, &a.out)?;
    run.output(&a.out);
    let added = outcome.set.n_pos() - base.n_pos();
    run.result("thresholds", thresholds.iter().map(|t| t.to_string()).collect::<Vec<_>>());
    run.result("added_positives", added);
    run.result("collisions", &outcome.collisions);
    if !outcome.collisions.is_empty() {
        eprintln!(
            "warning: {} clips detected positive but labeled 0 in the base set; kept as 0",
            outcome.collisions.len()
        );
    }
    println!(
        "threshold {}: added {added} pseudo-positives to {} base positives -> {}",
        thresholds.last().expect("at least one round"),
        base.n_pos(),
        a.out.display()
    );
    Ok(())
}
