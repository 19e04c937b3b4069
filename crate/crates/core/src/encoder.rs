//! The dual-encoder scorer.
//!
//! The video head is a linear projection of a precomputed clip feature. The
//! text head projects each word embedding, applies ReLU and max-pools over
//! tokens. A clip pair is scored by the dot product of the two embeddings.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEncoder {
    /// `D_e × D_v`
    pub w_video: Matrix,
    pub b_video: Option<Vec<f64>>,
    /// `D_e × D_w`
    pub w_text: Matrix,
    pub b_text: Option<Vec<f64>>,
}

/// Per-coordinate routing of the text head's max-pool: which token won, or
/// `None` when the pooled value is a dead ReLU (no gradient flows).
pub(crate) type PoolRoute = Vec<Option<usize>>;

impl DualEncoder {
    /// Uniform `[-1/√D_in, 1/√D_in]` weights, zero biases.
    pub fn init(embed_dim: usize, video_dim: usize, word_dim: usize, use_bias: bool, seed: u64) -> Self {
        let mut rng = rng::seeded(seed, &[rng::STREAM_INIT]);
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            let mut m = Matrix::zeros(rows, cols);
            m.data
                .iter_mut()
                .for_each(|x| *x = rng.random_range(-bound..=bound));
            m
        };
        let w_video = uniform(embed_dim, video_dim);
        let w_text = uniform(embed_dim, word_dim);
        let bias = || use_bias.then(|| vec![0.0; embed_dim]);
        Self {
            w_video,
            b_video: bias(),
            w_text,
            b_text: bias(),
        }
    }

    pub fn zeros(embed_dim: usize, video_dim: usize, word_dim: usize, use_bias: bool) -> Self {
        let bias = || use_bias.then(|| vec![0.0; embed_dim]);
        Self {
            w_video: Matrix::zeros(embed_dim, video_dim),
            b_video: bias(),
            w_text: Matrix::zeros(embed_dim, word_dim),
            b_text: bias(),
        }
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            w_video: Matrix::zeros(self.w_video.rows, self.w_video.cols),
            b_video: self.b_video.as_ref().map(|b| vec![0.0; b.len()]),
            w_text: Matrix::zeros(self.w_text.rows, self.w_text.cols),
            b_text: self.b_text.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.w_video.rows
    }

    pub fn video_dim(&self) -> usize {
        self.w_video.cols
    }

    pub fn word_dim(&self) -> usize {
        self.w_text.cols
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.embed_dim();
        let bias_ok = |b: &Option<Vec<f64>>| b.as_ref().is_none_or(|b| b.len() == e);
        if self.w_text.rows != e
            || self.w_video.data.len() != e * self.video_dim()
            || self.w_text.data.len() != e * self.word_dim()
            || !bias_ok(&self.b_video)
            || !bias_ok(&self.b_text)
        {
            return Err(Error::Shape("inconsistent dual-encoder parameter shapes".into()));
        }
        if self.tensors().iter().any(|t| !linalg::all_finite(t)) {
            return Err(Error::NonFinite("dual-encoder parameters".into()));
        }
        Ok(())
    }

    /// `W_v · feat + b_v`
    pub fn embed_video(&self, feat: &[f64]) -> Result<Vec<f64>> {
        if feat.len() != self.video_dim() {
            return Err(Error::Shape(format!(
                "video feature of length {}, model expects {}",
                feat.len(),
                self.video_dim()
            )));
        }
        let mut out = self.w_video.matvec(feat);
        if let Some(b) = &self.b_video {
            linalg::axpy(1.0, b, &mut out);
        }
        if !linalg::all_finite(&out) {
            return Err(Error::NonFinite("video embedding".into()));
        }
        Ok(out)
    }

    /// Max over tokens of `ReLU(W_t · u + b_t)`; the zero vector for no tokens.
    pub fn embed_text(&self, tokens: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.embed_text_routed(tokens).map(|(e, _)| e)
    }

    pub(crate) fn embed_text_routed(&self, tokens: &[Vec<f64>]) -> Result<(Vec<f64>, PoolRoute)> {
        let e = self.embed_dim();
        let mut pooled = vec![0.0; e];
        let mut route: PoolRoute = vec![None; e];
        for (j, tok) in tokens.iter().enumerate() {
            if tok.len() != self.word_dim() {
                return Err(Error::Shape(format!(
                    "token embedding of length {}, model expects {}",
                    tok.len(),
                    self.word_dim()
                )));
            }
            let mut h = self.w_text.matvec(tok);
            if let Some(b) = &self.b_text {
                linalg::axpy(1.0, b, &mut h);
            }
            for (d, z) in h.into_iter().enumerate() {
                // ReLU'(0) = 0, so only strictly positive activations route
                // gradient; the first token wins ties.
                if z > pooled[d] {
                    pooled[d] = z;
                    route[d] = Some(j);
                }
            }
        }
        if !linalg::all_finite(&pooled) {
            return Err(Error::NonFinite("text embedding".into()));
        }
        Ok((pooled, route))
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.w_video.data];
        if let Some(b) = &self.b_video {
            out.push(b);
        }
        out.push(&self.w_text.data);
        if let Some(b) = &self.b_text {
            out.push(b);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.w_video.data];
        if let Some(b) = &mut self.b_video {
            out.push(b);
        }
        out.push(&mut self.w_text.data);
        if let Some(b) = &mut self.b_text {
            out.push(b);
        }
        out
    }

    /// Zeroes the text-head entries of a gradient.
    pub(crate) fn clear_text_head(&mut self) {
        self.w_text.data.iter_mut().for_each(|x| *x = 0.0);
        if let Some(b) = &mut self.b_text {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &DualEncoder) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            linalg::axpy(alpha, src, dst);
        }
    }
}

/// Dot-product similarity of a video and a text embedding.
pub fn score(video_emb: &[f64], text_emb: &[f64]) -> Result<f64> {
    if video_emb.len() != text_emb.len() {
        return Err(Error::Shape(format!(
            "embeddings of length {} and {}",
            video_emb.len(),
            text_emb.len()
        )));
    }
    Ok(linalg::dot(video_emb, text_emb))
}
