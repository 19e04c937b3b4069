//! Audio-only detector: log-mel spectrograms, pooled statistics and a
//! logistic head trained with BCE and SGD.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::objective::{self, sigmoid};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl MelConfig {
    /// 25 ms windows, 10 ms hop, 64 bands over `[0, sr/2]`.
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 64,
            fmin: 0.0,
            fmax: f64::from(sample_rate) / 2.0,
            log_floor: 1e-10,
        }
    }

    pub fn window_samples(&self) -> usize {
        (f64::from(self.sample_rate) * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (f64::from(self.sample_rate) * self.hop_ms / 1000.0).round() as usize
    }

    /// Smallest power of two covering one window.
    pub fn n_fft(&self) -> usize {
        self.window_samples().next_power_of_two()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if self.window_samples() == 0 || self.hop_samples() == 0 {
            return bad("window and hop must span at least one sample");
        }
        if self.hop_ms > self.window_ms {
            return bad("hop must not exceed the window");
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1");
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return bad("need 0 <= fmin < fmax");
        }
        if self.fmax > f64::from(self.sample_rate) / 2.0 + 1e-9 {
            return bad("fmax above Nyquist");
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log floor must be positive");
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Centre frequencies (Hz) of the mel bands.
pub fn mel_centers(cfg: &MelConfig) -> Vec<f64> {
    mel_edges(cfg)[1..=cfg.n_mels].to_vec()
}

fn mel_edges(cfg: &MelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect()
}

/// Triangular HTK-scale filters over the `n_fft/2 + 1` power bins, each with
/// unit peak at its centre frequency. Shape `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(cfg: &MelConfig) -> Matrix {
    let n_fft = cfg.n_fft();
    let n_bins = n_fft / 2 + 1;
    let edges = mel_edges(cfg);
    let bin_hz = f64::from(cfg.sample_rate) / n_fft as f64;
    let mut fb = Matrix::zeros(cfg.n_mels, n_bins);
    for m in 0..cfg.n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = fb.row_mut(m);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > left && f <= centre {
                (f - left) / (centre - left)
            } else if f > centre && f < right {
                (right - f) / (right - centre)
            } else {
                0.0
            };
        }
    }
    fb
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Reusable spectrogram extractor (filterbank, window and FFT plan cached).
pub struct MelExtractor {
    cfg: MelConfig,
    filterbank: Matrix,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelExtractor {
    pub fn new(cfg: MelConfig) -> Result<Self> {
        cfg.validate()?;
        let filterbank = mel_filterbank(&cfg);
        let window = hann_window(cfg.window_samples());
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft());
        Ok(Self {
            cfg,
            filterbank,
            window,
            fft,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        let win = self.cfg.window_samples();
        if n_samples < win {
            0
        } else {
            1 + (n_samples - win) / self.cfg.hop_samples()
        }
    }

    /// Log-power mel spectrogram, `frames × n_mels`.
    pub fn compute(&self, waveform: &[f64]) -> Result<Matrix> {
        let win = self.cfg.window_samples();
        if waveform.len() < win {
            return Err(Error::Precondition(format!(
                "waveform of {} samples is shorter than one {win}-sample window",
                waveform.len()
            )));
        }
        if !linalg::all_finite(waveform) {
            return Err(Error::NonFinite("waveform sample".into()));
        }
        let hop = self.cfg.hop_samples();
        let n_fft = self.cfg.n_fft();
        let frames = self.n_frames(waveform.len());
        let mut out = Matrix::zeros(frames, self.cfg.n_mels);
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut power = vec![0.0; n_fft / 2 + 1];
        for f in 0..frames {
            let start = f * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < win {
                    Complex::new(waveform[start + i] * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            let row = out.row_mut(f);
            for (m, cell) in row.iter_mut().enumerate() {
                let energy = linalg::dot(self.filterbank.row(m), &power);
                *cell = energy.max(self.cfg.log_floor).ln();
            }
        }
        Ok(out)
    }
}

/// One-shot convenience wrapper around [`MelExtractor`].
pub fn mel_spectrogram(waveform: &[f64], cfg: &MelConfig) -> Result<Matrix> {
    MelExtractor::new(cfg.clone())?.compute(waveform)
}

/// Per-band mean over frames followed by per-band max, length `2·n_mels`.
pub fn pool_spectrogram(spec: &Matrix) -> Result<Vec<f64>> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::Precondition("empty spectrogram".into()));
    }
    let mut mean = vec![0.0; spec.cols];
    let mut max = vec![f64::NEG_INFINITY; spec.cols];
    for r in 0..spec.rows {
        for (b, &x) in spec.row(r).iter().enumerate() {
            mean[b] += x;
            max[b] = max[b].max(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= spec.rows as f64);
    mean.extend(max);
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioModel {
    pub weight: Vec<f64>,
    pub bias: f64,
    pub dropout_rate: f64,
    pub mel: MelConfig,
}

impl AudioModel {
    pub fn zeros(mel: MelConfig, dropout_rate: f64) -> Self {
        Self {
            weight: vec![0.0; 2 * mel.n_mels],
            bias: 0.0,
            dropout_rate,
            mel,
        }
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weight.len() {
            return Err(Error::Shape(format!(
                "audio model expects {} features, got {}",
                self.weight.len(),
                features.len()
            )));
        }
        Ok(linalg::dot(&self.weight, features) + self.bias)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file))?;
        if model.weight.len() != 2 * model.mel.n_mels {
            return Err(Error::Shape("weight length must be 2 × n_mels".into()));
        }
        Ok(model)
    }
}

/// `σ(w·x + b)`, no dropout.
pub fn predict_audio(model: &AudioModel, features: &[f64]) -> Result<f64> {
    model.logit(features).map(sigmoid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AudioTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            batch_size: 16,
            dropout: 0.1,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Mean BCE over `examples` and its gradient w.r.t. `(weight, bias)`, with
/// optional per-feature keep masks (already scaled by `1/(1-p)`).
pub fn audio_loss_grad(
    model: &AudioModel,
    examples: &[(&[f64], u8)],
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, Vec<f64>, f64)> {
    let inputs: Vec<Vec<f64>> = examples
        .iter()
        .enumerate()
        .map(|(i, (x, _))| match masks {
            Some(m) => x.iter().zip(&m[i]).map(|(a, b)| a * b).collect(),
            None => x.to_vec(),
        })
        .collect();
    let logits = inputs
        .iter()
        .map(|x| model.logit(x))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = examples.iter().map(|(_, y)| *y).collect();
    let loss = objective::bce_loss(&logits, &labels)?;
    let dz = objective::bce_grad(&logits, &labels)?;
    let mut gw = vec![0.0; model.weight.len()];
    let mut gb = 0.0;
    for (x, d) in inputs.iter().zip(&dz) {
        linalg::axpy(*d, x, &mut gw);
        gb += d;
    }
    Ok((loss, gw, gb))
}

/// Minibatch SGD on BCE with inverted input dropout, from a zero model.
pub fn train_audio(examples: &[(Vec<f64>, u8)], mel: MelConfig, cfg: &AudioTrainConfig) -> Result<AudioModel> {
    let n_pos = examples.iter().filter(|(_, y)| *y == 1).count();
    if n_pos == 0 || n_pos == examples.len() {
        return Err(Error::Precondition(
            "audio training needs both positive and negative examples".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.dropout) {
        return Err(Error::InvalidParameter("dropout must lie in [0, 1)".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be positive".into()));
    }
    let mut model = AudioModel::zeros(mel, cfg.dropout);
    if let Some((x, _)) = examples.iter().find(|(x, _)| x.len() != model.weight.len()) {
        return Err(Error::Shape(format!(
            "audio features of length {}, expected {}",
            x.len(),
            model.weight.len()
        )));
    }
    let keep_scale = 1.0 / (1.0 - cfg.dropout);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = rng::seeded(cfg.seed, &[rng::STREAM_DROPOUT, epoch as u64]);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], u8)> = chunk
                .iter()
                .map(|&i| (examples[i].0.as_slice(), examples[i].1))
                .collect();
            let masks: Vec<Vec<f64>> = batch
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .map(|_| {
                            if rng.random::<f64>() < cfg.dropout {
                                0.0
                            } else {
                                keep_scale
                            }
                        })
                        .collect()
                })
                .collect();
            let (loss, gw, gb) = audio_loss_grad(&model, &batch, Some(&masks))?;
            if !loss.is_finite() || !linalg::all_finite(&gw) || !gb.is_finite() {
                return Err(Error::NonFinite(format!("audio training, epoch {epoch}")));
            }
            linalg::axpy(-cfg.lr, &gw, &mut model.weight);
            model.bias -= cfg.lr * gb;
        }
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Synthetic signals

/// `amp·sin(2πft + phase)` for `seconds` of audio.
pub fn tone(freq_hz: f64, amp: f64, phase: f64, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let n = (seconds * f64::from(sample_rate)).round() as usize;
    let w = 2.0 * std::f64::consts::PI * freq_hz / f64::from(sample_rate);
    (0..n).map(|i| amp * (w * i as f64 + phase).sin()).collect()
}

/// A crude voiced signal: five harmonics of a pitch with 1/h roll-off plus
/// white noise. Visual narrations get a lower pitch band (110–170 Hz) than
/// non-visual ones (190–280 Hz), planting a prosodic cue for the audio model.
pub fn synth_voice(visual: bool, seconds: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(seed, &[rng::STREAM_SYNTH]);
    let f0 = if visual {
        rng.random_range(110.0..170.0)
    } else {
        rng.random_range(190.0..280.0)
    };
    let amp = rng.random_range(0.2..0.6);
    let mut wave = vec![0.0; (seconds * f64::from(sample_rate)).round() as usize];
    for h in 1..=5 {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let partial = tone(f0 * h as f64, amp / h as f64, phase, seconds, sample_rate);
        linalg::axpy(1.0, &partial, &mut wave);
    }
    for x in &mut wave {
        *x += 0.02 * (rng.random::<f64>() - 0.5);
    }
    wave
}

// ---------------------------------------------------------------------------
// Waveform files: one JSON header line, then little-endian f32 samples.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformHeader {
    pub sample_rate: u32,
    pub n_samples: usize,
    pub format: String,
}

pub const WAVEFORM_FORMAT: &str = "f32le";

pub fn write_waveform(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(
        &mut out,
        &WaveformHeader {
            sample_rate,
            n_samples: samples.len(),
            format: WAVEFORM_FORMAT.into(),
        },
    )?;
    out.write_all(b"\n").map_err(io)?;
    for &s in samples {
        out.write_all(&(s as f32).to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_waveform(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(io)?;
    let header: WaveformHeader = serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if header.format != WAVEFORM_FORMAT {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported sample format {}", header.format),
        });
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != 4 * header.n_samples {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: format!("expected {} samples, found {} bytes", header.n_samples, bytes.len()),
        });
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Ok((samples, header.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = MelConfig::new(16_000);
        assert_eq!(cfg.window_samples(), 400);
        assert_eq!(cfg.hop_samples(), 160);
        assert_eq!(cfg.n_fft(), 512);
        let ex = MelExtractor::new(cfg).unwrap();
        assert_eq!(ex.n_frames(16_000), 1 + (16_000 - 400) / 160);
        assert_eq!(ex.n_frames(399), 0);
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 440.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.985).abs() < 1e-2);
    }

    #[test]
    fn short_waveform_rejected() {
        assert!(mel_spectrogram(&[0.0; 100], &MelConfig::new(16_000)).is_err());
    }

    #[test]
    fn silence_hits_the_floor() {
        let cfg = MelConfig::new(16_000);
        let spec = mel_spectrogram(&vec![0.0; 4000], &cfg).unwrap();
        let floor = 1e-10f64.ln();
        assert!(spec.data.iter().all(|&x| x == floor));
    }

    #[test]
    fn pooling_by_hand() {
        let spec = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 0.0]]).unwrap();
        assert_eq!(pool_spectrogram(&spec).unwrap(), vec![2.0, 1.0, 3.0, 2.0]);
        let single = Matrix::from_rows(&[&[4.0, -1.0]]).unwrap();
        assert_eq!(pool_spectrogram(&single).unwrap(), vec![4.0, -1.0, 4.0, -1.0]);
        assert!(pool_spectrogram(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn predict_examples() {
        let mut model = AudioModel::zeros(
            MelConfig {
                n_mels: 1,
                ..MelConfig::new(16_000)
            },
            0.1,
        );
        assert_eq!(predict_audio(&model, &[3.0, -2.0]).unwrap(), 0.5);
        model.weight = vec![1.0, -1.0];
        let p = predict_audio(&model, &[2.0, 1.0]).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
        model.bias = 50.0;
        assert!(predict_audio(&model, &[2.0, 1.0]).unwrap() > 1.0 - 1e-12);
        assert!(predict_audio(&model, &[2.0]).is_err());
    }

    #[test]
    fn zero_epochs_predict_half() {
        let mel = MelConfig {
            n_mels: 2,
            ..MelConfig::new(16_000)
        };
        let data = vec![(vec![1.0, 0.0, 1.0, 0.0], 1), (vec![0.0, 1.0, 0.0, 1.0], 0)];
        let model = train_audio(&data, mel, &AudioTrainConfig { epochs: 0, ..Default::default() }).unwrap();
        assert_eq!(predict_audio(&model, &data[0].0).unwrap(), 0.5);
        assert!(train_audio(&data[..1], model.mel.clone(), &AudioTrainConfig::default()).is_err());
    }

    #[test]
    fn waveform_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav.raw");
        let samples: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        write_waveform(&path, &samples, 8000).unwrap();
        let (back, sr) = read_waveform(&path).unwrap();
        assert_eq!(sr, 8000);
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }
}
