//! Log-mel front end against a brute-force DFT and an independently written filterbank.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnd_core::audio::*;

const SR: u32 = 16_000;

fn sine(freq: f64, amp: f64, phase: f64, seconds: f64) -> Vec<f64> {
    let n = (seconds * SR as f64) as usize;
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / SR as f64 + phase).sin()).collect()
}

/// O(n²) power spectrum of one Hann-windowed, zero-padded frame.
fn dft_power(frame: &[f64], n_fft: usize) -> Vec<f64> {
    let w = frame.len();
    let windowed: Vec<f64> = frame
        .iter()
        .enumerate()
        .map(|(n, x)| x * (0.5 - 0.5 * (2.0 * PI * n as f64 / w as f64).cos()))
        .collect();
    (0..=n_fft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in windowed.iter().enumerate() {
                let a = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Triangles on HTK-mel-spaced edges, evaluated at bin frequencies.
fn oracle_filter(m: usize, f: f64, cfg: &MelConfig) -> f64 {
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
    let step = (mel(cfg.fmax) - mel(cfg.fmin)) / (cfg.n_mels as f64 + 1.0);
    let edge = |i: usize| hz(mel(cfg.fmin) + step * i as f64);
    let (l, c, r) = (edge(m), edge(m + 1), edge(m + 2));
    if f > l && f <= c {
        (f - l) / (c - l)
    } else if f > c && f < r {
        (r - f) / (r - c)
    } else {
        0.0
    }
}

fn oracle_frame(frame: &[f64], cfg: &MelConfig) -> Vec<f64> {
    let n_fft = cfg.n_fft();
    let power = dft_power(frame, n_fft);
    (0..cfg.n_mels)
        .map(|m| {
            let e: f64 = power
                .iter()
                .enumerate()
                .map(|(k, p)| p * oracle_filter(m, k as f64 * SR as f64 / n_fft as f64, cfg))
                .sum();
            e.max(cfg.log_floor).ln()
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b })
}

#[test]
fn sine_440_matches_dft_oracle() {
    let cfg = MelConfig::new(SR);
    let wave = sine(440.0, 0.5, 0.3, 0.2);
    let spec = mel_spectrogram(&wave, &cfg).unwrap();
    let (win, hop) = (cfg.window_samples(), cfg.hop_samples());
    for f in [0, 3, spec.rows - 1] {
        let want = oracle_frame(&wave[f * hop..f * hop + win], &cfg);
        let got = spec.row(f);
        for (m, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!((g - w).abs() < 1e-6, "frame {f} band {m}: {g} vs {w}");
        }
        assert_eq!(argmax(got), argmax(&want));
    }
    // the loudest band straddles 440 Hz
    let centres = mel_centers(&cfg);
    let peak = argmax(spec.row(2));
    let lo = if peak == 0 { cfg.fmin } else { centres[peak - 1] };
    let hi = centres.get(peak + 1).copied().unwrap_or(cfg.fmax);
    assert!(lo < 440.0 && 440.0 < hi, "peak band {peak}: ({lo}, {hi})");
}

#[test]
fn silence_sits_on_the_log_floor() {
    let cfg = MelConfig::new(SR);
    let spec = mel_spectrogram(&vec![0.0; 4000], &cfg).unwrap();
    let floor = cfg.log_floor.ln();
    assert!(spec.data.iter().all(|&x| x == floor));
}

#[test]
fn doubling_amplitude_adds_ln_four() {
    let cfg = MelConfig::new(SR);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wave: Vec<f64> = (0..8000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let loud: Vec<f64> = wave.iter().map(|x| 2.0 * x).collect();
    let a = mel_spectrogram(&wave, &cfg).unwrap();
    let b = mel_spectrogram(&loud, &cfg).unwrap();
    let floor = cfg.log_floor.ln();
    let mut compared = 0;
    for (x, y) in a.data.iter().zip(&b.data) {
        if *x > floor + 1.0 {
            assert!((y - x - 4f64.ln()).abs() < 1e-9);
            compared += 1;
        }
    }
    assert!(compared > a.data.len() / 2);
}

#[test]
fn shifting_by_one_hop_shifts_one_frame() {
    let cfg = MelConfig::new(SR);
    let hop = cfg.hop_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wave: Vec<f64> = (0..6000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = mel_spectrogram(&wave, &cfg).unwrap();
    let b = mel_spectrogram(&wave[hop..], &cfg).unwrap();
    assert_eq!(b.rows, a.rows - 1);
    for f in 0..b.rows {
        for (x, y) in a.row(f + 1).iter().zip(b.row(f)) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn filterbank_is_a_partition_of_unity_between_outer_centres() {
    let cfg = MelConfig::new(SR);
    let fb = mel_filterbank(&cfg);
    let centres = mel_centers(&cfg);
    let bin_hz = SR as f64 / cfg.n_fft() as f64;
    for k in 0..fb.cols {
        let f = k as f64 * bin_hz;
        let sum: f64 = (0..fb.rows).map(|m| fb.get(m, k)).sum();
        if f >= centres[0] && f <= centres[cfg.n_mels - 1] {
            assert!((sum - 1.0).abs() < 1e-9, "bin {k} ({f} Hz): {sum}");
        }
        for m in 0..fb.rows {
            assert!((fb.get(m, k) - oracle_filter(m, f, &cfg)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&fb.get(m, k)));
        }
    }
    assert!(centres.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn each_filter_has_one_contiguous_support() {
    let cfg = MelConfig::new(SR);
    let fb = mel_filterbank(&cfg);
    let mut empty = 0;
    for m in 0..fb.rows {
        let nz: Vec<usize> = (0..fb.cols).filter(|&k| fb.get(m, k) > 0.0).collect();
        match (nz.first(), nz.last()) {
            (Some(a), Some(b)) => assert_eq!(b - a + 1, nz.len(), "band {m} has a gap"),
            _ => empty += 1,
        }
    }
    // 64 bands over a 512-point FFT: the narrowest low bands are under one bin
    // wide and may miss every bin centre, but never more than a few.
    assert!(empty <= 4, "{empty} empty bands");
}

#[test]
fn mel_scale_round_trips() {
    for hz in [0.0, 100.0, 700.0, 1000.0, 8000.0] {
        assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
    }
    assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
}

#[test]
fn too_short_or_bad_input_is_rejected() {
    let cfg = MelConfig::new(SR);
    assert!(mel_spectrogram(&[0.0; 100], &cfg).is_err());
    let mut w = vec![0.0; 1000];
    w[3] = f64::NAN;
    assert!(mel_spectrogram(&w, &cfg).is_err());
    assert!(MelExtractor::new(MelConfig { hop_ms: 50.0, ..cfg.clone() }).is_err());
    assert!(MelExtractor::new(MelConfig { fmax: 9000.0, ..cfg }).is_err());
}

/// Low tones (positive) against high tones (negative), random amplitude and phase.
pub fn tone_examples(n: usize, seed: u64) -> Vec<(Vec<f64>, u8)> {
    let cfg = MelConfig::new(SR);
    let ex = MelExtractor::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let freq = if label == 1 { rng.random_range(200.0..400.0) } else { rng.random_range(2500.0..4000.0) };
            let wave = sine(freq, rng.random_range(0.2..1.0), rng.random_range(0.0..2.0 * PI), 0.25);
            (pool_spectrogram(&ex.compute(&wave).unwrap()).unwrap(), label)
        })
        .collect()
}

#[test]
fn logistic_head_separates_tones() {
    let start = Instant::now();
    let examples = tone_examples(40, 3);
    let model = train_audio(&examples, MelConfig::new(SR), &AudioTrainConfig::default()).unwrap();
    let correct = examples
        .iter()
        .filter(|(x, y)| u8::from(predict_audio(&model, x).unwrap() >= 0.5) == *y)
        .count();
    assert_eq!(correct, examples.len());
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn audio_training_is_seeded() {
    let examples = tone_examples(20, 4);
    let cfg = AudioTrainConfig { epochs: 5, ..AudioTrainConfig::default() };
    let a = train_audio(&examples, MelConfig::new(SR), &cfg).unwrap();
    let b = train_audio(&examples, MelConfig::new(SR), &cfg).unwrap();
    assert_eq!(a, b);
    let one_class: Vec<(Vec<f64>, u8)> = examples.iter().filter(|e| e.1 == 1).cloned().collect();
    assert!(train_audio(&one_class, MelConfig::new(SR), &cfg).is_err());
}

#[test]
fn waveform_and_model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let wave = sine(440.0, 0.5, 0.0, 0.05);
    let path = dir.path().join("w.bin");
    write_waveform(&path, &wave, SR).unwrap();
    let (back, sr) = read_waveform(&path).unwrap();
    assert_eq!(sr, SR);
    for (a, b) in wave.iter().zip(&back) {
        assert_eq!(*a as f32 as f64, *b);
    }

    let model = AudioModel::zeros(MelConfig::new(SR), 0.1);
    let p = dir.path().join("m.json");
    model.save(&p).unwrap();
    assert_eq!(AudioModel::load(&p).unwrap(), model);
}
