use anyhow::Context;
use vnd_core::corpus::Schema;
use vnd_core::eval::{self, GridTable};
use vnd_core::trainer::{self, TrainConfig};

use crate::args::{GridArgs, TrainFlags};
use crate::cmd::{load_corpus, load_set, prepare_output};
use crate::manifest::Run;
use crate::{config, usage, CliResult};

pub fn run(a: &GridArgs, run: &mut Run) -> CliResult<()> {
    run.seed(a.seed);
    run.config(a.train.config.as_deref());
    if a.jobs == 0 {
        return usage("--jobs must be at least 1");
    }
    if let Some(c) = a.c_grid.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return usage(format!("grid value c = {c} is outside [0, 1]"));
    }
    // n_negatives is set per cell; validate the rest against the largest |N|.
    let max_n = a.neg_grid.iter().copied().max().unwrap_or(1);
    let probe = TrainFlags {
        neg: Some(max_n),
        ..a.train.clone()
    };
    let cfg = config::resolve(&probe, a.seed)?;
    let batches = axis(&a.batch_grid, cfg.batch_size, |x, y| x.cmp(y));
    let lrs = axis(&a.lr_grid, cfg.lr, f64::total_cmp);
    let mut cfgs = Vec::new();
    for &batch_size in &batches {
        for &lr in &lrs {
            let c = TrainConfig { batch_size, lr, ..cfg.clone() };
            c.validate().map_err(|e| crate::CliError::Usage(e.to_string()))?;
            cfgs.push(c);
        }
    }
    run.params(trainer::config_summary(&cfg));
    run.param("c_grid", &a.c_grid);
    run.param("neg_grid", &a.neg_grid);
    let extra_axes = !a.batch_grid.is_empty() || !a.lr_grid.is_empty();
    if extra_axes {
        run.param("batch_grid", &batches);
        run.param("lr_grid", &lrs);
    }
    // Thread count never changes the output, so it is not a parameter.
    run.result("jobs", a.jobs);

    let corpus = load_corpus(&a.corpus, Schema::Labeled, run)?;
    let gold = load_set(&a.val_gold, run)?;
    let tables = cfgs
        .iter()
        .map(|c| eval::grid_search(&corpus, &gold, &a.c_grid, &a.neg_grid, c, a.jobs))
        .collect::<Result<Vec<GridTable>, _>>()?;
    // Ties between tables go to the earlier (smaller batch, then smaller lr).
    let best = (1..tables.len()).fold(0, |b, i| {
        if tables[i].best_row().val_roc_auc > tables[b].best_row().val_roc_auc {
            i
        } else {
            b
        }
    });

    prepare_output(&a.out)?;
    let tsv = if extra_axes { joint_tsv(&cfgs, &tables, best) } else { tables[0].to_tsv() };
    std::fs::write(&a.out, tsv).with_context(|| format!("writing {}", a.out.display()))?;
    run.output(&a.out);

    for (c, table) in cfgs.iter().zip(&tables) {
        if extra_axes {
            println!("batch {}, lr {}:", c.batch_size, c.lr);
        }
        print!("{}", table.to_matrix_string());
    }
    let row = tables[best].best_row();
    run.result("best_c", row.c);
    run.result("best_n_negatives", row.n_negatives);
    run.result("best_val_roc_auc", row.val_roc_auc);
    if extra_axes {
        run.result("best_batch_size", cfgs[best].batch_size);
        run.result("best_lr", cfgs[best].lr);
        println!(
            "best: batch {}, lr {}, c = {}, |N| = {} (val ROC-AUC {:.4})",
            cfgs[best].batch_size, cfgs[best].lr, row.c, row.n_negatives, row.val_roc_auc
        );
    } else {
        println!("best: c = {}, |N| = {} (val ROC-AUC {:.4})", row.c, row.n_negatives, row.val_roc_auc);
    }
    Ok(())
}

/// Sorted, deduplicated axis values, or the configured value alone.
fn axis<T: Copy + PartialEq>(values: &[T], default: T, cmp: impl Fn(&T, &T) -> std::cmp::Ordering) -> Vec<T> {
    if values.is_empty() {
        return vec![default];
    }
    let mut v = values.to_vec();
    v.sort_by(cmp);
    v.dedup();
    v
}

fn joint_tsv(cfgs: &[TrainConfig], tables: &[GridTable], best: usize) -> String {
    let mut s = String::from("batch_size\tlr\tc\tn_negatives\tn_train_pos\tval_roc_auc\tbest\n");
    for (t, (c, table)) in cfgs.iter().zip(tables).enumerate() {
        for (i, r) in table.rows.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                c.batch_size,
                c.lr,
                r.c,
                r.n_negatives,
                r.n_train_pos,
                r.val_roc_auc,
                u8::from(t == best && i == table.best)
            ));
        }
    }
    s
}
