//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each operation is a plain Rust function returning a serializable result
//! (tested natively) plus a `#[wasm_bindgen]` wrapper that hands JSON to the page.

use serde::Serialize;
use vnd_core::audio::{self, MelConfig};
use vnd_core::corpus::{synth_corpus, SynthOutput};
use vnd_core::curation::{derive_ss, derive_vr};
use vnd_core::eval;
use vnd_core::trainer::{self, TrainConfig};
use vnd_core::{CuratedSet, Dims, SetName, SynthConfig};
use wasm_bindgen::prelude::*;

const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Serialize)]
pub struct Spectrogram {
    pub frames: usize,
    pub n_mels: usize,
    /// Row-major `frames × n_mels` log power.
    pub log_mel: Vec<f64>,
    pub centres_hz: Vec<f64>,
    pub peak_band: usize,
}

/// Log-mel spectrogram of a pure tone, optionally mixed with a second one.
pub fn tone_spectrogram(freq_hz: f64, second_hz: Option<f64>, seconds: f64, n_mels: usize) -> Result<Spectrogram, String> {
    let mut wave = audio::tone(freq_hz, 0.5, 0.0, seconds, SAMPLE_RATE);
    if let Some(f) = second_hz {
        let other = audio::tone(f, 0.25, 0.0, seconds, SAMPLE_RATE);
        wave.iter_mut().zip(other).for_each(|(a, b)| *a += b);
    }
    let cfg = MelConfig { n_mels, ..MelConfig::new(SAMPLE_RATE) };
    let spec = audio::mel_spectrogram(&wave, &cfg).map_err(|e| e.to_string())?;
    let mut mean = vec![0.0; n_mels];
    for f in 0..spec.rows {
        spec.row(f).iter().zip(&mut mean).for_each(|(x, m)| *m += x);
    }
    let peak_band = (0..n_mels).fold(0, |b, i| if mean[i] > mean[b] { i } else { b });
    Ok(Spectrogram {
        frames: spec.rows,
        n_mels,
        log_mel: spec.data,
        centres_hz: audio::mel_centers(&cfg),
        peak_band,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub positives: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub clips: usize,
    pub visual: usize,
    pub vr_precision: f64,
    pub rows: Vec<SweepRow>,
}

fn demo_corpus(n_clips: usize, noise: f64, seed: u64) -> Result<SynthOutput, String> {
    let cfg = SynthConfig {
        n_tasks: 2,
        n_clips,
        noise_sigma: noise,
        dims: Dims::new(16, 16, 16),
        ..SynthConfig::default()
    };
    synth_corpus(&cfg, seed).map_err(|e| e.to_string())
}

fn precision_recall(set: &CuratedSet, out: &SynthOutput, visual: usize) -> (usize, f64, f64) {
    let pos: Vec<&str> = set.positives().collect();
    let hits = pos.iter().filter(|id| out.oracle[**id] == 1).count();
    let precision = if pos.is_empty() { 1.0 } else { hits as f64 / pos.len() as f64 };
    (pos.len(), precision, hits as f64 / visual.max(1) as f64)
}

/// Sentence-similarity curation at c = 0.1 … 0.9 scored against the planted truth.
pub fn curation_sweep(n_clips: usize, noise: f64, seed: u64) -> Result<Sweep, String> {
    let out = demo_corpus(n_clips, noise, seed)?;
    let visual = out.oracle.values().filter(|&&y| y == 1).count();
    let rows = (1..=9)
        .map(|i| {
            let c = i as f64 / 10.0;
            let (positives, precision, recall) = precision_recall(&derive_ss(&out.corpus, c), &out, visual);
            SweepRow { c, positives, precision, recall }
        })
        .collect();
    Ok(Sweep {
        clips: out.corpus.len(),
        visual,
        vr_precision: precision_recall(&derive_vr(&out.corpus), &out, visual).1,
        rows,
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct RocDemo {
    pub train_clips: usize,
    pub test_clips: usize,
    pub train_positives: usize,
    pub final_loss: Option<f64>,
    pub model: Curve,
    pub objects: Curve,
}

fn curve(report: &eval::EvalReport) -> Result<Curve, String> {
    let scores: Vec<f64> = report.rows.iter().map(|r| r.score).collect();
    let labels: Vec<u8> = report.rows.iter().map(|r| r.label).collect();
    Ok(Curve {
        auc: report.roc_auc,
        points: eval::roc_curve(&scores, &labels).map_err(|e| e.to_string())?,
    })
}

/// Curates with SS(c), trains the dual encoder, and compares its ROC curve on
/// held-out clips with the object-overlap baseline.
pub fn train_and_roc(c: f64, epochs: usize, noise: f64, seed: u64) -> Result<RocDemo, String> {
    let (n_train, n_test) = (300, 300);
    let out = demo_corpus(n_train + n_test, noise, seed)?;
    let ids: Vec<&str> = out.corpus.clips().iter().map(|c| c.clip_id.as_str()).collect();
    let err = |e: vnd_core::Error| e.to_string();
    let train = out.corpus.subset(&ids[..n_train]).map_err(err)?;
    let test = out.corpus.subset(&ids[n_train..]).map_err(err)?;
    let gold = CuratedSet::from_labels(SetName::Gold, &out.oracle, Some(&ids[n_train..])).map_err(err)?;
    let set = derive_ss(&train, c);
    let cfg = TrainConfig {
        batch_size: 32,
        lr: 1e-3,
        epochs,
        embed_dim: 32,
        c,
        seed,
        ..TrainConfig::default()
    };
    let ckpt = trainer::train(&set, &train, &cfg).map_err(err)?;
    Ok(RocDemo {
        train_clips: n_train,
        test_clips: n_test,
        train_positives: set.n_pos(),
        final_loss: ckpt.final_loss,
        model: curve(&eval::evaluate(&ckpt, &gold, &test).map_err(err)?)?,
        objects: curve(&eval::evaluate_object_baseline(&gold, &test).map_err(err)?)?,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = toneSpectrogram)]
pub fn tone_spectrogram_js(freq_hz: f64, second_hz: f64, seconds: f64, n_mels: usize) -> Result<String, JsError> {
    let second = (second_hz > 0.0).then_some(second_hz);
    to_js(tone_spectrogram(freq_hz, second, seconds, n_mels))
}

#[wasm_bindgen(js_name = curationSweep)]
pub fn curation_sweep_js(n_clips: usize, noise: f64, seed: u32) -> Result<String, JsError> {
    to_js(curation_sweep(n_clips, noise, seed.into()))
}

#[wasm_bindgen(js_name = trainAndRoc)]
pub fn train_and_roc_js(c: f64, epochs: usize, noise: f64, seed: u32) -> Result<String, JsError> {
    to_js(train_and_roc(c, epochs, noise, seed.into()))
}
