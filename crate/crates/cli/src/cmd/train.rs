use vnd_core::corpus::Schema;
use vnd_core::trainer::{self, Validation};

use crate::args::TrainArgs;
use crate::cmd::{load_corpora, load_corpus, load_set, prepare_output};
use crate::manifest::Run;
use crate::{config, CliResult};

pub fn run(a: &TrainArgs, run: &mut Run) -> CliResult<()> {
    run.seed(a.seed);
    run.config(a.train.config.as_deref());
    let cfg = config::resolve(&a.train, a.seed)?;
    run.params(trainer::config_summary(&cfg));

    let corpus = load_corpora(&a.corpus, run)?;
    let set = load_set(&a.labels, run)?;
    let val = match (&a.val_corpus, &a.val_gold) {
        (Some(c), Some(g)) => Some((load_corpus(c, Schema::Labeled, run)?, load_set(g, run)?)),
        _ => None,
    };
    let validation = val.as_ref().map(|(corpus, gold)| Validation { corpus, gold });

    let outcome = trainer::train_with_log(&set, &corpus, &cfg, validation)?;
    prepare_output(&a.out)?;
    outcome.checkpoint.save(&a.out)?;
    run.output(&a.out);
    if let Some(log) = &a.log {
        prepare_output(log)?;
        trainer::write_train_log(&outcome.log, log)?;
        run.output(log);
    }

    let ck = &outcome.checkpoint;
    run.result("epochs_completed", ck.epoch);
    run.result("final_loss", ck.final_loss);
    run.result("provenance", &ck.provenance);
    match ck.final_loss {
        Some(loss) => println!(
            "trained on {} ({} positives) for {} epochs, final loss {loss:.6} -> {}",
            ck.provenance,
            set.n_pos(),
            ck.epoch,
            a.out.display()
        ),
        None => println!("zero epochs: wrote the initial model to {}", a.out.display()),
    }
    Ok(())
}
