use anyhow::Context;
use vnd_core::eval;
use vnd_core::trainer::Checkpoint;

use crate::args::{EvalArgs, EvalMethod};
use crate::cmd::{load_corpora, load_set, prepare_output};
use crate::manifest::Run;
use crate::{usage, CliResult};

pub fn run(a: &EvalArgs, run: &mut Run) -> CliResult<()> {
    run.param("method", format!("{:?}", a.method).to_lowercase());
    let corpus = load_corpora(&a.corpus, run)?;
    let gold = load_set(&a.gold, run)?;
    let report = match a.method {
        EvalMethod::Model => {
            let Some(path) = a.checkpoint.as_ref() else {
                return usage("--method model needs --checkpoint");
            };
            run.input(path);
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            run.seed(ck.seed);
            eval::evaluate(&ck, &gold, &corpus)?
        }
        EvalMethod::Objects => eval::evaluate_object_baseline(&gold, &corpus)?,
    };
    if let Some(out) = &a.out {
        prepare_output(out)?;
        report.write(out)?;
        run.output(out);
    }
    run.result("roc_auc", report.roc_auc);
    run.result("n_pos", report.n_pos);
    run.result("n_neg", report.n_neg);
    run.result("chosen_threshold", report.chosen_threshold.to_string());
    print!("{}", report.summary_table());
    println!("ROC-AUC {:.4}", report.roc_auc);
    Ok(())
}
