//! ROC-AUC, operating-threshold selection, the object-overlap baseline and
//! the `(c, |N|)` grid search.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::curation::{self, CuratedSet};
use crate::error::{Error, Result};
use crate::trainer::{self, Checkpoint, TrainConfig};

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score is NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Precondition(format!(
            "ROC analysis needs both classes (got {n_pos} positive, {n_neg} negative)"
        )));
    }
    Ok((n_pos, n_neg))
}

/// Indices sorted by ascending score, grouped into runs of equal score.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve, `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)`.
///
/// Computed by a single sweep over score-sorted tie groups (the Mann-Whitney
/// rank-sum form). The doubled U statistic is accumulated in integers, so the
/// result is exact.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    for group in tie_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i] == 1).count() as u128;
        let neg = group.len() as u128 - pos;
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
    }
    Ok(twice_u as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

/// ROC curve points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in tie_groups(scores).into_iter().rev() {
        for i in group {
            if labels[i] == 1 {
                tp += 1
            } else {
                fp += 1
            }
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    /// Predict positive when `score >= threshold`.
    pub threshold: f64,
    pub youden_j: f64,
}

/// Candidate thresholds from high to low: `+∞`, the midpoints between
/// adjacent distinct scores, `-∞`.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let distinct: BTreeSet<u64> = scores.iter().map(|s| ordered_bits(*s)).collect();
    let sorted: Vec<f64> = distinct.into_iter().rev().map(from_ordered_bits).collect();
    let mut out = vec![f64::INFINITY];
    for w in sorted.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        let mut mid = lo + (hi - lo) / 2.0;
        if mid <= lo {
            mid = hi;
        }
        out.push(mid);
    }
    out.push(f64::NEG_INFINITY);
    out
}

// Order-preserving map from f64 to u64 for set membership.
fn ordered_bits(x: f64) -> u64 {
    let b = (if x == 0.0 { 0.0 } else { x }).to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
}

/// Youden's J (`TPR - FPR`) of the rule `score >= threshold`.
pub fn youden_j(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (s, l) in scores.iter().zip(labels) {
        if *s >= threshold {
            if *l == 1 {
                tp += 1
            } else {
                fp += 1
            }
        }
    }
    Ok(tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64)
}

/// Threshold maximizing Youden's J over [`threshold_candidates`]; ties go to
/// the larger threshold.
pub fn select_threshold(scores: &[f64], labels: &[u8]) -> Result<ThresholdChoice> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let groups = tie_groups(scores);
    let candidates = threshold_candidates(scores);
    // candidates[0] = +∞ (nothing predicted positive); candidates[g + 1] sits
    // just below the g-th highest group; the final -∞ admits everything.
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = ThresholdChoice {
        threshold: candidates[0],
        youden_j: 0.0,
    };
    for (g, group) in groups.iter().rev().enumerate() {
        for &i in group {
            if labels[i] == 1 {
                tp += 1
            } else {
                fp += 1
            }
        }
        let j = tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64;
        if j > best.youden_j {
            best = ThresholdChoice {
                threshold: candidates[g + 1],
                youden_j: j,
            };
        }
    }
    Ok(best)
}

fn object_set(objects: &[String]) -> BTreeSet<String> {
    objects
        .iter()
        .map(|o| o.trim().to_lowercase())
        .filter(|o| !o.is_empty())
        .collect()
}

/// Fraction of the object overlap required by [`object_baseline`].
pub const OBJECT_OVERLAP: f64 = 0.6;

/// 1 when at least 60% of the distinct mentioned objects are visible.
/// A narration mentioning nothing is never positive.
pub fn object_baseline(narration_objects: &[String], visible_objects: &[String]) -> u8 {
    let mentioned = object_set(narration_objects);
    if mentioned.is_empty() {
        return 0;
    }
    let visible = object_set(visible_objects);
    let hit = mentioned.iter().filter(|o| visible.contains(*o)).count();
    // hit / total >= 0.6, compared in integers: 5·hit >= 3·total
    u8::from(5 * hit >= 3 * mentioned.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredClip {
    pub clip_id: String,
    pub score: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_pos: usize,
    pub n_neg: usize,
    pub roc_auc: f64,
    pub chosen_threshold: f64,
    pub youden_j: f64,
    pub rows: Vec<ScoredClip>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<GridRow>>,
}

impl EvalReport {
    pub fn from_scores(rows: Vec<ScoredClip>) -> Result<Self> {
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
        let roc_auc = roc_auc(&scores, &labels)?;
        let choice = select_threshold(&scores, &labels)?;
        let n_pos = labels.iter().filter(|&&l| l == 1).count();
        Ok(Self {
            n_pos,
            n_neg: labels.len() - n_pos,
            roc_auc,
            chosen_threshold: choice.threshold,
            youden_j: choice.youden_j,
            rows,
            grid: None,
        })
    }

    /// Summary line followed by one line per clip.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Summary {
            n_pos: usize,
            n_neg: usize,
            roc_auc: f64,
            #[serde(serialize_with = "serialize_threshold")]
            chosen_threshold: f64,
            youden_j: f64,
        }
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        serde_json::to_writer(
            &mut out,
            &Summary {
                n_pos: self.n_pos,
                n_neg: self.n_neg,
                roc_auc: self.roc_auc,
                chosen_threshold: self.chosen_threshold,
                youden_j: self.youden_j,
            },
        )?;
        out.write_all(b"\n").map_err(io)?;
        for row in &self.rows {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn summary_table(&self) -> String {
        format!(
            "clips     {:>8}\npositive  {:>8}\nnegative  {:>8}\nROC-AUC   {:>8.4}\nthreshold {:>8.4}\nYouden J  {:>8.4}\n",
            self.rows.len(),
            self.n_pos,
            self.n_neg,
            self.roc_auc,
            self.chosen_threshold,
            self.youden_j
        )
    }
}

/// JSON has no infinities; write them as strings.
fn serialize_threshold<S: serde::Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_f64(*t)
    } else if *t > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Scores every gold clip with the checkpoint.
pub fn evaluate(ckpt: &Checkpoint, gold: &CuratedSet, corpus: &Corpus) -> Result<EvalReport> {
    let rows = gold
        .pairs()
        .iter()
        .map(|(id, label)| {
            let clip = corpus.require(id)?;
            Ok(ScoredClip {
                clip_id: id.clone(),
                score: ckpt.score_clip(clip)?,
                label: *label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_scores(rows)
}

/// Scores every gold clip with [`object_baseline`].
pub fn evaluate_object_baseline(gold: &CuratedSet, corpus: &Corpus) -> Result<EvalReport> {
    let rows = gold
        .pairs()
        .iter()
        .map(|(id, label)| {
            let clip = corpus.require(id)?;
            let empty = Vec::new();
            let score = object_baseline(
                clip.narration_objects.as_ref().unwrap_or(&empty),
                clip.visible_objects.as_ref().unwrap_or(&empty),
            );
            Ok(ScoredClip {
                clip_id: id.clone(),
                score: f64::from(score),
                label: *label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_scores(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub c: f64,
    pub n_negatives: usize,
    pub n_train_pos: usize,
    pub val_roc_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    /// Sorted by `(c, n_negatives)`.
    pub rows: Vec<GridRow>,
    /// Index of the best row.
    pub best: usize,
}

impl GridTable {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    /// Tab-separated table, one line per cell.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("c\tn_negatives\tn_train_pos\tval_roc_auc\tbest\n");
        for (i, r) in self.rows.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.c,
                r.n_negatives,
                r.n_train_pos,
                r.val_roc_auc,
                u8::from(i == self.best)
            ));
        }
        s
    }

    /// `c` rows by `|N|` columns of validation ROC-AUC (×100).
    pub fn to_matrix_string(&self) -> String {
        let cs: Vec<f64> = dedup_sorted(self.rows.iter().map(|r| r.c));
        let ns: BTreeSet<usize> = self.rows.iter().map(|r| r.n_negatives).collect();
        let mut s = String::from("        ");
        for n in &ns {
            s.push_str(&format!("  |N|={n:<3}"));
        }
        s.push('\n');
        for c in cs {
            s.push_str(&format!("c={c:<6}"));
            for n in &ns {
                match self.rows.iter().find(|r| r.c == c && r.n_negatives == *n) {
                    Some(r) => s.push_str(&format!("  {:>7.1}", 100.0 * r.val_roc_auc)),
                    None => s.push_str("        -"),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn dedup_sorted(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Trains one model per `(c, |N|)` cell on the training split (SS labels at
/// that `c`) and scores it on `val_gold`. Every cell starts from the same
/// seed. `jobs` caps the worker threads; the table does not depend on it.
pub fn grid_search(
    corpus: &Corpus,
    val_gold: &CuratedSet,
    c_grid: &[f64],
    n_grid: &[usize],
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<GridTable> {
    let split = corpus
        .split()
        .ok_or_else(|| Error::Precondition("grid search needs a corpus with a validation split".into()))?;
    if !split.values().any(|s| *s == Split::Val) {
        return Err(Error::Precondition("corpus has no validation clips".into()));
    }
    if c_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let train_corpus = corpus.split_subset(Split::Train);
    let mut cells: Vec<(f64, usize)> = c_grid
        .iter()
        .flat_map(|&c| n_grid.iter().map(move |&n| (c, n)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cells.dedup();

    let run_cell = |&(c, n): &(f64, usize)| -> Result<GridRow> {
        let set = curation::derive_ss(&train_corpus, c);
        let cell_cfg = TrainConfig {
            c,
            n_negatives: n,
            ..cfg.clone()
        };
        let ckpt = trainer::train(&set, &train_corpus, &cell_cfg)?;
        let report = evaluate(&ckpt, val_gold, corpus)?;
        Ok(GridRow {
            c,
            n_negatives: n,
            n_train_pos: set.n_pos(),
            val_roc_auc: report.roc_auc,
        })
    };

    let rows: Vec<GridRow> = if jobs <= 1 {
        cells.iter().map(run_cell).collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?
    };

    let best = best_cell(&rows);
    Ok(GridTable { rows, best })
}

/// Highest validation ROC-AUC; ties prefer smaller `|N|`, then smaller `c`.
pub fn best_cell(rows: &[GridRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        let better = r.val_roc_auc > b.val_roc_auc
            || (r.val_roc_auc == b.val_roc_auc
                && (r.n_negatives < b.n_negatives || (r.n_negatives == b.n_negatives && r.c < b.c)));
        if better {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[1, 0, 1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.4, 0.5], &[1, 1, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_auc(&[0.1, f64::NAN], &[1, 0]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let t = select_threshold(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(t.youden_j, 1.0);
        assert!((t.threshold - 0.5).abs() < 1e-15);

        let t = select_threshold(&[0.4; 4], &[1, 0, 1, 0]).unwrap();
        assert_eq!(t.threshold, f64::INFINITY);
        assert_eq!(t.youden_j, 0.0);

        // Hand enumeration: +∞ → 0, 0.75 → 0.5, 0.5 → 0, 0.25 → 0.5, −∞ → 0.
        let scores = [0.1, 0.4, 0.6, 0.9];
        let labels = [0, 1, 0, 1];
        let cands = threshold_candidates(&scores);
        assert_eq!(cands.len(), 5);
        let js: Vec<f64> = cands.iter().map(|&c| youden_j(&scores, &labels, c).unwrap()).collect();
        assert_eq!(js, vec![0.0, 0.5, 0.0, 0.5, 0.0]);
        let t = select_threshold(&scores, &labels).unwrap();
        assert!((t.threshold - 0.75).abs() < 1e-15);
        assert_eq!(t.youden_j, 0.5);
    }

    #[test]
    fn adjacent_floats_get_a_separating_threshold() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = select_threshold(&[lo, hi], &[0, 1]).unwrap();
        assert_eq!(t.youden_j, 1.0);
        assert!(t.threshold > lo && t.threshold <= hi);
    }

    #[test]
    fn object_rule_boundary() {
        let mentioned = strings(&["a", "b", "c", "d", "e"]);
        assert_eq!(object_baseline(&mentioned, &strings(&["a", "b", "c"])), 1);
        assert_eq!(object_baseline(&mentioned, &strings(&["a", "b"])), 0);
        assert_eq!(object_baseline(&[], &strings(&["a"])), 0);
        assert_eq!(object_baseline(&strings(&[" Pan ", "egg"]), &strings(&["pan"])), 0);
        assert_eq!(object_baseline(&strings(&[" Pan ", "egg"]), &strings(&["pan", "EGG"])), 1);
        // duplicates do not change the verdict
        assert_eq!(
            object_baseline(&strings(&["a", "a", "a", "b", "c", "d", "e"]), &strings(&["a", "b", "c", "c"])),
            1
        );
    }

    #[test]
    fn best_cell_tie_breaks() {
        let row = |c, n, auc| GridRow { c, n_negatives: n, n_train_pos: 0, val_roc_auc: auc };
        let rows = vec![row(0.4, 5, 0.8), row(0.5, 3, 0.8), row(0.6, 3, 0.8), row(0.6, 9, 0.7)];
        assert_eq!(best_cell(&rows), 1);
    }
}
