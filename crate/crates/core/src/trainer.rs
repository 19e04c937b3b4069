//! Batching, in-batch negatives, the training loop and pseudo-label bootstrapping.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::corpus::{ClipRecord, Corpus};
use crate::curation::{CuratedSet, SetName};
use crate::encoder::{self, DualEncoder};
use crate::error::{Error, Result};
use crate::eval;
use crate::objective::{self, BatchItem, Contrastive, OptimizerKind, OptimizerState, Pair, VideoView};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Softmax NCE over matched clips.
    Nce,
    /// Multiple-instance NCE with temporally adjacent narrations as extra positives.
    Milnce,
    /// NCE on wide-window video features (overlapping-clip baseline).
    Oc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub n_negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Sentence-similarity threshold used to curate the training set.
    pub c: f64,
    pub clip_duration_s: f64,
    pub loss_kind: LossKind,
    pub oc_window_s: f64,
    pub mil_p: usize,
    pub freeze_text_head: bool,
    pub embed_dim: usize,
    pub use_bias: bool,
    /// Also add `(v_j, t_i)` mismatches, doubling the negative count.
    pub symmetric_negatives: bool,
    /// Stop when validation ROC-AUC has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            lr: 1e-5,
            optimizer: OptimizerKind::Adam,
            n_negatives: 4,
            epochs: 10,
            seed: 0,
            c: 0.5,
            clip_duration_s: 3.0,
            loss_kind: LossKind::Nce,
            oc_window_s: 16.0,
            mil_p: 3,
            freeze_text_head: false,
            embed_dim: 256,
            use_bias: true,
            symmetric_negatives: false,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_negatives < 1 {
            return bad("n_negatives must be at least 1".into());
        }
        if self.batch_size < self.n_negatives + 1 {
            return bad(format!(
                "batch_size {} must be at least n_negatives + 1 = {}",
                self.batch_size,
                self.n_negatives + 1
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.loss_kind == LossKind::Milnce && self.mil_p == 0 {
            return bad("mil_p must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.c) {
            return bad(format!("c = {} outside [0, 1]", self.c));
        }
        Ok(())
    }

    fn view(&self) -> VideoView {
        match self.loss_kind {
            LossKind::Oc => VideoView::Wide,
            _ => VideoView::Standard,
        }
    }

    fn contrastive(&self) -> Contrastive {
        match self.loss_kind {
            LossKind::Milnce => Contrastive::MilNce,
            _ => Contrastive::Nce,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub encoder: DualEncoder,
    pub config: TrainConfig,
    pub seed: u64,
    /// Epochs completed.
    pub epoch: usize,
    pub final_loss: Option<f64>,
    /// Which curated set the model was trained on, e.g. `SS(c=0.5)`.
    pub provenance: String,
}

impl Checkpoint {
    /// Dot-product score of a clip's own video and narration.
    pub fn score_clip(&self, clip: &ClipRecord) -> Result<f64> {
        let v = self.encoder.embed_video(&clip.video_feat)?;
        let t = self.encoder.embed_text(&clip.token_embs)?;
        encoder::score(&v, &t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        ckpt.encoder.validate()?;
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_roc_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Validation data for per-epoch ROC-AUC and early stopping.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub corpus: &'a Corpus,
    pub gold: &'a CuratedSet,
}

/// Seeded shuffle of `ids` into batches of `batch_size`. A trailing partial
/// batch survives only if it can still supply `n_negatives` negatives.
pub fn make_batches(ids: &[&str], batch_size: usize, n_negatives: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if ids.len() < n_negatives + 1 {
        return Err(Error::Precondition(format!(
            "{} positives cannot fill a batch with {} negatives per item",
            ids.len(),
            n_negatives
        )));
    }
    if batch_size < n_negatives + 1 {
        return Err(Error::InvalidParameter(format!(
            "batch_size {batch_size} too small for {n_negatives} negatives"
        )));
    }
    let mut order: Vec<&str> = ids.to_vec();
    order.shuffle(&mut rng::seeded(seed, &[rng::STREAM_BATCHES]));
    Ok(order
        .chunks(batch_size)
        .filter(|chunk| chunk.len() > n_negatives)
        .map(|chunk| chunk.iter().map(|s| s.to_string()).collect())
        .collect())
}

/// `n` distinct in-batch partners `j != i`, drawn uniformly without
/// replacement, as `(video_i, text_j)` pairs.
pub fn sample_negatives(batch: &[String], i: usize, n: usize, seed: u64) -> Result<Vec<Pair>> {
    Ok(sample_partners(batch.len(), i, n, seed)?
        .into_iter()
        .map(|j| Pair::new(batch[i].clone(), batch[j].clone()))
        .collect())
}

fn sample_partners(len: usize, i: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n >= len || i >= len {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {n} negatives for item {i} from a batch of {len}"
        )));
    }
    let mut rng = rng::seeded(seed, &[rng::STREAM_NEGATIVES, i as u64]);
    Ok(index::sample(&mut rng, len - 1, n)
        .into_iter()
        .map(|k| if k >= i { k + 1 } else { k })
        .collect())
}

/// For each clip, the other clips of the same video ordered by distance
/// between clip midpoints (ties by clip id).
struct Neighbours<'a> {
    by_video: HashMap<&'a str, Vec<&'a ClipRecord>>,
}

impl<'a> Neighbours<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        let mut by_video: HashMap<&str, Vec<&ClipRecord>> = HashMap::new();
        for clip in corpus.clips() {
            by_video.entry(clip.video_id.as_str()).or_default().push(clip);
        }
        Self { by_video }
    }

    fn nearest(&self, clip: &ClipRecord, k: usize) -> Vec<&'a str> {
        let Some(siblings) = self.by_video.get(clip.video_id.as_str()) else {
            return Vec::new();
        };
        let mid = clip.midpoint();
        let mut others: Vec<&&ClipRecord> = siblings.iter().filter(|c| c.clip_id != clip.clip_id).collect();
        others.sort_by(|a, b| {
            (a.midpoint() - mid)
                .abs()
                .total_cmp(&(b.midpoint() - mid).abs())
                .then_with(|| a.clip_id.cmp(&b.clip_id))
        });
        others.into_iter().take(k).map(|c| c.clip_id.as_str()).collect()
    }
}

fn build_items(
    batch: &[String],
    corpus: &Corpus,
    neighbours: Option<&Neighbours<'_>>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<BatchItem>> {
    batch
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let partners = sample_partners(batch.len(), i, cfg.n_negatives, seed)?;
            let mut negatives: Vec<Pair> = partners
                .iter()
                .map(|&j| Pair::new(id.clone(), batch[j].clone()))
                .collect();
            if cfg.symmetric_negatives {
                negatives.extend(partners.iter().map(|&j| Pair::new(batch[j].clone(), id.clone())));
            }
            let mut item = BatchItem::new(id, negatives);
            if let Some(nb) = neighbours {
                let clip = corpus.require(id)?;
                item.extra_positives = nb
                    .nearest(clip, cfg.mil_p.saturating_sub(1))
                    .into_iter()
                    .map(|t| Pair::new(id.clone(), t))
                    .collect();
            }
            Ok(item)
        })
        .collect()
}

/// Trains a dual encoder on the label-1 pairs of `positives`.
pub fn train(positives: &CuratedSet, corpus: &Corpus, cfg: &TrainConfig) -> Result<Checkpoint> {
    train_with_log(positives, corpus, cfg, None).map(|o| o.checkpoint)
}

pub fn train_with_log(
    positives: &CuratedSet,
    corpus: &Corpus,
    cfg: &TrainConfig,
    validation: Option<Validation<'_>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    positives.check_against(corpus)?;
    let ids: Vec<&str> = positives.positives().collect();
    let dims = corpus.dims();
    let mut model = DualEncoder::init(cfg.embed_dim, dims.video, dims.word, cfg.use_bias, cfg.seed);
    let mut checkpoint = Checkpoint {
        encoder: model.clone(),
        config: cfg.clone(),
        seed: cfg.seed,
        epoch: 0,
        final_loss: None,
        provenance: positives.provenance(),
    };
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            checkpoint,
            log: Vec::new(),
        });
    }

    let neighbours = (cfg.loss_kind == LossKind::Milnce).then(|| Neighbours::new(corpus));
    let mut optimizer = OptimizerState::new(cfg.optimizer, cfg.lr);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, DualEncoder, usize, f64)> = None;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        let batches = make_batches(
            &ids,
            cfg.batch_size,
            cfg.n_negatives,
            rng::derive_seed(cfg.seed, &[rng::STREAM_BATCHES, epoch as u64]),
        )?;
        let mut total = 0.0;
        let mut count = 0usize;
        for (b, batch) in batches.iter().enumerate() {
            let seed = rng::derive_seed(cfg.seed, &[rng::STREAM_NEGATIVES, epoch as u64, b as u64]);
            let items = build_items(batch, corpus, neighbours.as_ref(), cfg, seed)?;
            let (loss, grad) = match objective::contrastive_loss_grad(
                &items,
                &model,
                corpus,
                cfg.contrastive(),
                cfg.view(),
                true,
            ) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, batch: b }),
                Err(e) => return Err(e),
            };
            let mut grad = grad.expect("gradient requested");
            if cfg.freeze_text_head {
                grad.clear_text_head();
            }
            match objective::optimizer_step(&mut model, &grad, &mut optimizer) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, batch: b }),
                other => other?,
            }
            total += loss;
            count += items.len();
        }
        let mean_loss = total / count as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches.len(),
            });
        }

        let val_roc_auc = match validation {
            Some(v) => {
                let probe = Checkpoint {
                    encoder: model.clone(),
                    ..checkpoint.clone()
                };
                Some(eval::evaluate(&probe, v.gold, v.corpus)?.roc_auc)
            }
            None => None,
        };
        log.push(EpochLog {
            epoch: epoch + 1,
            mean_loss,
            val_roc_auc,
        });

        if let (Some(patience), Some(auc)) = (cfg.patience, val_roc_auc) {
            if best.as_ref().is_none_or(|(b, ..)| auc > *b) {
                best = Some((auc, model.clone(), epoch + 1, mean_loss));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
        checkpoint.epoch = epoch + 1;
        checkpoint.final_loss = Some(mean_loss);
    }

    checkpoint.encoder = model;
    if let Some((_, encoder, epoch, loss)) = best {
        checkpoint.encoder = encoder;
        checkpoint.epoch = epoch;
        checkpoint.final_loss = Some(loss);
    }
    Ok(TrainOutcome { checkpoint, log })
}

/// 1 when the clip's score reaches `threshold` (inclusive).
pub fn detect(ckpt: &Checkpoint, clip: &ClipRecord, threshold: f64) -> Result<u8> {
    Ok(u8::from(ckpt.score_clip(clip)? >= threshold))
}

#[derive(Debug, Clone)]
pub struct PseudoOutcome {
    pub set: CuratedSet,
    /// Unlabeled clips detected positive whose id already carries label 0 in the base set.
    pub collisions: Vec<String>,
}

/// `base ∪ {(clip, 1) : clip ∈ unlabeled, detect(clip) = 1}`; base labels win on collision.
pub fn pseudo_label(ckpt: &Checkpoint, unlabeled: &Corpus, threshold: f64, base: &CuratedSet) -> Result<PseudoOutcome> {
    if threshold.is_nan() {
        return Err(Error::InvalidParameter("threshold is NaN".into()));
    }
    let base_labels: HashMap<&str, u8> = base.pairs().iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let mut pairs: Vec<(String, u8)> = base.pairs().to_vec();
    let mut collisions = Vec::new();
    for clip in unlabeled.clips() {
        if detect(ckpt, clip, threshold)? == 0 {
            continue;
        }
        match base_labels.get(clip.clip_id.as_str()) {
            None => pairs.push((clip.clip_id.clone(), 1)),
            Some(1) => {}
            Some(_) => collisions.push(clip.clip_id.clone()),
        }
    }
    let mut params = base.params.clone();
    params.insert("threshold".into(), threshold);
    Ok(PseudoOutcome {
        set: CuratedSet::new(SetName::Pseudo, params, pairs)?,
        collisions,
    })
}

/// How the pseudo-labeling threshold is chosen each round.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdPolicy<'a> {
    Fixed(f64),
    /// Youden-J optimum of the current model on validation data.
    Youden(Validation<'a>),
}

impl ThresholdPolicy<'_> {
    pub fn resolve(&self, ckpt: &Checkpoint) -> Result<f64> {
        match self {
            ThresholdPolicy::Fixed(t) => Ok(*t),
            ThresholdPolicy::Youden(v) => Ok(eval::evaluate(ckpt, v.gold, v.corpus)?.chosen_threshold),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfTrainRound {
    pub threshold: f64,
    pub set: CuratedSet,
    pub collisions: Vec<String>,
    /// Model retrained on `set`.
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome {
    pub initial: Checkpoint,
    pub rounds: Vec<SelfTrainRound>,
}

/// Train on `base`, then repeat `rounds` times: pseudo-label `unlabeled` with
/// the latest model and retrain on the union. Each round re-labels from the
/// original base set.
pub fn self_train(
    base: &CuratedSet,
    labeled: &Corpus,
    unlabeled: &Corpus,
    cfg: &TrainConfig,
    policy: ThresholdPolicy<'_>,
    rounds: usize,
) -> Result<SelfTrainOutcome> {
    let initial = train(base, labeled, cfg)?;
    let merged = Corpus::merge(&[labeled, unlabeled])?;
    let mut current = initial.clone();
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let threshold = policy.resolve(&current)?;
        let pseudo = pseudo_label(&current, unlabeled, threshold, base)?;
        current = train(&pseudo.set, &merged, cfg)?;
        out.push(SelfTrainRound {
            threshold,
            set: pseudo.set,
            collisions: pseudo.collisions,
            checkpoint: current.clone(),
        });
    }
    Ok(SelfTrainOutcome { initial, rounds: out })
}

/// Per-epoch log lines `{"epoch", "mean_loss", "val_roc_auc"?}`.
pub fn write_train_log(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for row in log {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Parameters recorded in run manifests.
pub fn config_summary(cfg: &TrainConfig) -> BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(cfg) {
        Ok(serde_json::Value::Object(map)) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}
