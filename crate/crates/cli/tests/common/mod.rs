#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vnd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn vnd")
}

/// Runs `vnd` and insists on exit 0, returning stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vnd(dir, args);
    assert!(
        out.status.success(),
        "vnd {} failed ({:?}):\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub struct Chain {
    pub base_ckpt: PathBuf,
    pub final_ckpt: PathBuf,
    pub base_report: PathBuf,
    pub final_report: PathBuf,
}

/// synth → curate → train → pseudo → retrain → eval, all seeded.
pub fn run_chain(dir: &Path) -> Chain {
    ok(dir, &[
        "synth", "--clips", "300", "--unlabeled", "600", "--val", "200", "--test", "200",
        "--tasks", "2", "--dim", "16", "--noise", "0.15", "--seed", "0", "--out", "data",
    ]);
    ok(dir, &["curate", "--corpus", "data/labeled.jsonl", "--rule", "ss", "--c", "0.5", "--out", "ss.jsonl"]);
    let train = ["--seed", "7", "--epochs", "10", "--batch", "32", "--lr", "1e-3", "--embed-dim", "64"];
    let mut args = vec!["train", "--corpus", "data/labeled.jsonl", "--labels", "ss.jsonl", "--out", "base.ckpt.json"];
    args.extend(train);
    ok(dir, &args);
    ok(dir, &[
        "pseudo", "--checkpoint", "base.ckpt.json", "--unlabeled", "data/unlabeled.jsonl", "--base", "ss.jsonl",
        "--seed", "7", "--val-corpus", "data/labeled.jsonl", "--val-gold", "data/gold_val.jsonl",
        "--out", "pseudo.jsonl",
    ]);
    let mut args = vec![
        "train", "--corpus", "data/labeled.jsonl", "data/unlabeled.jsonl", "--labels", "pseudo.jsonl",
        "--out", "final.ckpt.json",
    ];
    args.extend(train);
    ok(dir, &args);
    for (ck, rep) in [("base.ckpt.json", "base.report.jsonl"), ("final.ckpt.json", "final.report.jsonl")] {
        ok(dir, &[
            "eval", "--checkpoint", ck, "--corpus", "data/labeled.jsonl", "--gold", "data/gold_test.jsonl",
            "--out", rep,
        ]);
    }
    Chain {
        base_ckpt: dir.join("base.ckpt.json"),
        final_ckpt: dir.join("final.ckpt.json"),
        base_report: dir.join("base.report.jsonl"),
        final_report: dir.join("final.report.jsonl"),
    }
}
