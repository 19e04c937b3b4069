//! Contrastive and binary losses with analytic gradients, and the optimizers
//! that consume them.
//!
//! All contrastive losses here share one shape. For an item with candidate
//! positives `P` and negatives `N` over dot-product scores `s`,
//!
//! ```text
//! loss = logsumexp(s over P ∪ N) - logsumexp(s over P)
//! ```
//!
//! which is softmax NCE when `|P| = 1` and MIL-NCE otherwise. Batch losses are
//! sums over items.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClipRecord, Corpus};
use crate::encoder::{DualEncoder, PoolRoute};
use crate::error::{Error, Result};
use crate::linalg;

/// A (video clip, text clip) pairing by clip id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub video: String,
    pub text: String,
}

impl Pair {
    pub fn new(video: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            video: video.into(),
            text: text.into(),
        }
    }

    pub fn matched(clip_id: &str) -> Self {
        Self::new(clip_id, clip_id)
    }
}

/// One positive pair with its sampled negatives. `extra_positives` holds the
/// additional MIL candidates and is ignored by plain NCE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub positive: Pair,
    #[serde(default)]
    pub extra_positives: Vec<Pair>,
    pub negatives: Vec<Pair>,
}

impl BatchItem {
    pub fn new(clip_id: &str, negatives: Vec<Pair>) -> Self {
        Self {
            positive: Pair::matched(clip_id),
            extra_positives: Vec::new(),
            negatives,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.negatives.is_empty() {
            return Err(Error::Precondition(format!(
                "item {} has no negatives",
                self.positive.video
            )));
        }
        if let Some(n) = self.negatives.iter().find(|n| n.video == n.text) {
            return Err(Error::Precondition(format!(
                "negative pair for item {} is matched ({})",
                self.positive.video, n.video
            )));
        }
        Ok(())
    }
}

/// Which video feature a contrastive loss reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoView {
    #[default]
    Standard,
    /// The wide-window feature when the record has one, else the standard one.
    Wide,
}

impl VideoView {
    pub fn features<'a>(&self, clip: &'a ClipRecord) -> &'a [f64] {
        match self {
            VideoView::Standard => &clip.video_feat,
            VideoView::Wide => clip.video_feat_wide.as_deref().unwrap_or(&clip.video_feat),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contrastive {
    Nce,
    MilNce,
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-log(Σ_P e^s / (Σ_P e^s + Σ_N e^s))` from raw scores.
pub fn milnce_item_loss(positive_scores: &[f64], negative_scores: &[f64]) -> f64 {
    let all: Vec<f64> = positive_scores
        .iter()
        .chain(negative_scores)
        .copied()
        .collect();
    logsumexp(&all) - logsumexp(positive_scores)
}

/// `-log(e^s⁺ / (e^s⁺ + Σ_N e^s))` from raw scores.
pub fn nce_item_loss(positive_score: f64, negative_scores: &[f64]) -> f64 {
    milnce_item_loss(&[positive_score], negative_scores)
}

/// Token embeddings, pooled text embedding, and which token won each unit.
type TextEntry<'a> = (&'a [Vec<f64>], Vec<f64>, PoolRoute);

/// Embedding cache for one batch: each distinct clip is embedded once.
struct EmbeddingTable<'a> {
    video_ids: HashMap<&'a str, usize>,
    video: Vec<(&'a [f64], Vec<f64>)>,
    text_ids: HashMap<&'a str, usize>,
    text: Vec<TextEntry<'a>>,
}

impl<'a> EmbeddingTable<'a> {
    fn new() -> Self {
        Self {
            video_ids: HashMap::new(),
            video: Vec::new(),
            text_ids: HashMap::new(),
            text: Vec::new(),
        }
    }

    fn video(&mut self, id: &'a str, corpus: &'a Corpus, model: &DualEncoder, view: VideoView) -> Result<usize> {
        if let Some(&i) = self.video_ids.get(id) {
            return Ok(i);
        }
        let feat = view.features(corpus.require(id)?);
        let emb = model.embed_video(feat)?;
        self.video.push((feat, emb));
        self.video_ids.insert(id, self.video.len() - 1);
        Ok(self.video.len() - 1)
    }

    fn text(&mut self, id: &'a str, corpus: &'a Corpus, model: &DualEncoder) -> Result<usize> {
        if let Some(&i) = self.text_ids.get(id) {
            return Ok(i);
        }
        let tokens = &corpus.require(id)?.token_embs;
        let (emb, route) = model.embed_text_routed(tokens)?;
        self.text.push((tokens, emb, route));
        self.text_ids.insert(id, self.text.len() - 1);
        Ok(self.text.len() - 1)
    }
}

/// Loss and (optionally) gradient of a contrastive objective over `items`.
pub fn contrastive_loss_grad(
    items: &[BatchItem],
    model: &DualEncoder,
    corpus: &Corpus,
    kind: Contrastive,
    view: VideoView,
    want_grad: bool,
) -> Result<(f64, Option<DualEncoder>)> {
    let mut table = EmbeddingTable::new();
    // (video index, text index) per pair, per item: positives first.
    let mut scored: Vec<(Vec<(usize, usize)>, usize)> = Vec::with_capacity(items.len());
    for item in items {
        item.validate()?;
        let mut pairs: Vec<&Pair> = vec![&item.positive];
        if kind == Contrastive::MilNce {
            pairs.extend(&item.extra_positives);
        }
        let n_pos = pairs.len();
        pairs.extend(&item.negatives);
        let idx = pairs
            .into_iter()
            .map(|p| {
                Ok((
                    table.video(&p.video, corpus, model, view)?,
                    table.text(&p.text, corpus, model)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        scored.push((idx, n_pos));
    }

    let e = model.embed_dim();
    let mut grad_video = vec![vec![0.0; e]; if want_grad { table.video.len() } else { 0 }];
    let mut grad_text = vec![vec![0.0; e]; if want_grad { table.text.len() } else { 0 }];
    let mut total = 0.0;
    for (idx, n_pos) in &scored {
        let scores: Vec<f64> = idx
            .iter()
            .map(|&(v, t)| linalg::dot(&table.video[v].1, &table.text[t].1))
            .collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("pair score".into()));
        }
        let (pos, neg) = scores.split_at(*n_pos);
        let loss = milnce_item_loss(pos, neg);
        total += loss;
        if !want_grad {
            continue;
        }
        let lse_all = logsumexp(&scores);
        let lse_pos = logsumexp(pos);
        for (k, &(v, t)) in idx.iter().enumerate() {
            let mut g = (scores[k] - lse_all).exp();
            if k < *n_pos {
                g -= (scores[k] - lse_pos).exp();
            }
            if g == 0.0 {
                continue;
            }
            linalg::axpy(g, &table.text[t].1, &mut grad_video[v]);
            linalg::axpy(g, &table.video[v].1, &mut grad_text[t]);
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    if !want_grad {
        return Ok((total, None));
    }

    let mut grad = model.zeros_like();
    for ((feat, _), dv) in table.video.iter().zip(&grad_video) {
        grad.w_video.add_outer(1.0, dv, feat);
        if let Some(b) = &mut grad.b_video {
            linalg::axpy(1.0, dv, b);
        }
    }
    for ((tokens, _, route), dt) in table.text.iter().zip(&grad_text) {
        for (d, winner) in route.iter().enumerate() {
            let Some(j) = winner else { continue };
            linalg::axpy(dt[d], &tokens[*j], grad.w_text.row_mut(d));
            if let Some(b) = &mut grad.b_text {
                b[d] += dt[d];
            }
        }
    }
    Ok((total, Some(grad)))
}

pub fn nce_loss(items: &[BatchItem], model: &DualEncoder, corpus: &Corpus) -> Result<f64> {
    contrastive_loss_grad(items, model, corpus, Contrastive::Nce, VideoView::Standard, false).map(|r| r.0)
}

pub fn nce_grad(items: &[BatchItem], model: &DualEncoder, corpus: &Corpus) -> Result<DualEncoder> {
    contrastive_loss_grad(items, model, corpus, Contrastive::Nce, VideoView::Standard, true)
        .map(|r| r.1.expect("gradient requested"))
}

pub fn milnce_loss(items: &[BatchItem], model: &DualEncoder, corpus: &Corpus) -> Result<f64> {
    contrastive_loss_grad(items, model, corpus, Contrastive::MilNce, VideoView::Standard, false).map(|r| r.0)
}

pub fn milnce_grad(items: &[BatchItem], model: &DualEncoder, corpus: &Corpus) -> Result<DualEncoder> {
    contrastive_loss_grad(items, model, corpus, Contrastive::MilNce, VideoView::Standard, true)
        .map(|r| r.1.expect("gradient requested"))
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_binary(logits: &[f64], labels: &[u8]) -> Result<()> {
    if logits.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logits but {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy on logits.
pub fn bce_loss(logits: &[f64], labels: &[u8]) -> Result<f64> {
    check_binary(logits, labels)?;
    if logits.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| if y == 1 { softplus(-z) } else { softplus(z) })
        .sum();
    Ok(sum / logits.len() as f64)
}

/// d(mean BCE)/d(logit) = (σ(z) - y) / n.
pub fn bce_grad(logits: &[f64], labels: &[u8]) -> Result<Vec<f64>> {
    check_binary(logits, labels)?;
    let n = logits.len() as f64;
    Ok(logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| (sigmoid(z) - f64::from(y)) / n)
        .collect())
}

// ---------------------------------------------------------------------------
// Optimizers

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    /// Applies one update in place. Nothing is modified on error.
    pub fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("parameter and gradient shapes differ".into()));
        }
        if grads.iter().any(|g| !linalg::all_finite(g)) {
            return Err(Error::NonFinite("gradient".into()));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    linalg::axpy(-self.lr, g, p);
                }
                self.step += 1;
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != grads.len()
                    || self.first_moment.iter().zip(grads).any(|(m, g)| m.len() != g.len())
                {
                    return Err(Error::Shape("gradient shape changed between steps".into()));
                }
                self.step += 1;
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = &mut self.first_moment[k];
                    let v = &mut self.second_moment[k];
                    for i in 0..g.len() {
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// One optimizer update of a dual encoder from its gradient.
pub fn optimizer_step(model: &mut DualEncoder, grad: &DualEncoder, state: &mut OptimizerState) -> Result<()> {
    let grads = grad.tensors();
    let mut params = model.tensors_mut();
    state.apply(&mut params, &grads)
}
