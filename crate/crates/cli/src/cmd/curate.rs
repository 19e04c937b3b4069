use vnd_core::corpus::{Schema, Split};
use vnd_core::curation::{self, ClassifierConfig, Modality};

use crate::args::{CurateArgs, Rule, SplitArg};
use crate::cmd::{load_corpus, prepare_output};
use crate::manifest::Run;
use crate::{usage, CliResult};

pub fn run(a: &CurateArgs, run: &mut Run) -> CliResult<()> {
    run.param("rule", format!("{:?}", a.rule).to_lowercase());
    match a.rule {
        Rule::Ss => match a.c {
            None => return usage("--rule ss needs --c"),
            Some(c) if !(0.0..=1.0).contains(&c) => return usage(format!("--c {c} is outside [0, 1]")),
            Some(c) => run.param("c", c),
        },
        Rule::Mc => match a.k {
            None => return usage("--rule mc needs --k"),
            Some(k) => run.param("k", k),
        },
        Rule::Vr => {}
    }
    let full = load_corpus(&a.corpus, Schema::Labeled, run)?;
    let split = match (a.split, full.split().is_some()) {
        (Some(SplitArg::All), _) | (None, false) => None,
        (None, true) | (Some(SplitArg::Train), _) => Some(Split::Train),
        (Some(SplitArg::Val), _) => Some(Split::Val),
        (Some(SplitArg::Test), _) => Some(Split::Test),
    };
    if split.is_some() && full.split().is_none() {
        return usage("--split given but the corpus carries no split assignment");
    }
    run.param("split", split.map_or("all".to_string(), |s| format!("{s:?}").to_lowercase()));
    let corpus = match split {
        Some(s) => full.split_subset(s),
        None => full,
    };

    let set = match a.rule {
        Rule::Ss => curation::derive_ss(&corpus, a.c.expect("checked")),
        Rule::Vr => curation::derive_vr(&corpus),
        Rule::Mc => {
            let cfg = ClassifierConfig {
                iterations: a.clf_iterations,
                lr: a.clf_lr,
            };
            run.param("classifier", cfg);
            let fv = curation::train_task_classifier(&corpus, Modality::Video, cfg)?;
            let ft = curation::train_task_classifier(&corpus, Modality::Text, cfg)?;
            curation::derive_mc(&corpus, &fv, &ft, a.k.expect("checked"))?
        }
    };
    if set.n_pos() == 0 {
        eprintln!("warning: {} selected no positive clips", set.provenance());
    }

    let hours: f64 = set
        .positives()
        .filter_map(|id| corpus.get(id))
        .map(|c| c.end_s - c.start_s)
        .sum::<f64>()
        / 3600.0;
    prepare_output(&a.out)?;
    curation::write_curated(&set, &a.out)?;
    run.output(&a.out);
    run.result("n_pos", set.n_pos());
    run.result("n_neg", set.n_neg());
    run.result("positive_hours", hours);
    println!(
        "{}: {} positive, {} negative ({:.3} h of positives) -> {}",
        set.provenance(),
        set.n_pos(),
        set.n_neg(),
        hours,
        a.out.display()
    );
    Ok(())
}
