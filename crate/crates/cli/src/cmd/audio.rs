use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use vnd_core::audio::{self, AudioModel, AudioTrainConfig, MelConfig, MelExtractor};
use vnd_core::corpus::{AudioSource, ClipRecord};
use vnd_core::eval::{EvalReport, ScoredClip};

use crate::args::{AudioArgs, AudioCommand, AudioEvalArgs, AudioMelArgs, AudioTrainArgs};
use crate::cmd::{load_corpora, load_set, prepare_output};
use crate::manifest::Run;
use crate::{usage, CliResult};

pub fn run(a: &AudioArgs, run: &mut Run) -> CliResult<()> {
    match &a.command {
        AudioCommand::Mel(m) => mel(m, run),
        AudioCommand::Train(t) => train(t, run),
        AudioCommand::Eval(e) => evaluate(e, run),
    }
}

#[derive(Serialize)]
struct SpectrogramFile<'a> {
    config: &'a MelConfig,
    frames: usize,
    /// Row-major `frames × n_mels` log-power values.
    log_mel: &'a [f64],
}

fn mel(a: &AudioMelArgs, run: &mut Run) -> CliResult<()> {
    run.input(&a.waveform);
    let (wave, sr) = audio::read_waveform(&a.waveform)?;
    let mut cfg = MelConfig::new(sr);
    if let Some(n) = a.n_mels {
        cfg.n_mels = n;
    }
    run.param("mel", &cfg);
    let spec = audio::mel_spectrogram(&wave, &cfg)?;
    prepare_output(&a.out)?;
    let file = SpectrogramFile {
        config: &cfg,
        frames: spec.rows,
        log_mel: &spec.data,
    };
    std::fs::write(&a.out, serde_json::to_string(&file)? + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    run.output(&a.out);

    let pooled = audio::pool_spectrogram(&spec)?;
    let means = &pooled[..cfg.n_mels];
    let peak = (0..cfg.n_mels).fold(0, |b, i| if means[i] > means[b] { i } else { b });
    let centre = audio::mel_centers(&cfg)[peak];
    run.result("frames", spec.rows);
    run.result("peak_band", peak);
    println!(
        "{} frames × {} bands; loudest band {peak} (centre {centre:.1} Hz) -> {}",
        spec.rows,
        cfg.n_mels,
        a.out.display()
    );
    Ok(())
}

/// Pooled log-mel features for clips, reading waveforms relative to the
/// directory of the corpus file that listed them.
struct FeatureSource {
    base_dirs: Vec<PathBuf>,
    extractors: HashMap<u32, MelExtractor>,
}

impl FeatureSource {
    fn new(corpus_paths: &[PathBuf]) -> Self {
        let base_dirs = corpus_paths
            .iter()
            .map(|p| p.parent().map(Path::to_path_buf).unwrap_or_default())
            .collect();
        Self {
            base_dirs,
            extractors: HashMap::new(),
        }
    }

    fn features(&mut self, clip: &ClipRecord, mel: &MelConfig) -> CliResult<Vec<f64>> {
        match &clip.audio {
            None => Err(anyhow!("clip {} has no audio", clip.clip_id).into()),
            Some(AudioSource::Pooled { pooled }) => Ok(pooled.clone()),
            Some(AudioSource::Waveform { path, sample_rate }) => {
                if *sample_rate != mel.sample_rate {
                    return Err(anyhow!(
                        "clip {} is sampled at {sample_rate} Hz, the model expects {} Hz",
                        clip.clip_id,
                        mel.sample_rate
                    )
                    .into());
                }
                let file = self
                    .base_dirs
                    .iter()
                    .map(|d| d.join(path))
                    .find(|p| p.exists())
                    .ok_or_else(|| anyhow!("waveform {path} of clip {} not found", clip.clip_id))?;
                let (wave, sr) = audio::read_waveform(&file)?;
                if sr != *sample_rate {
                    return Err(anyhow!("{} declares {sr} Hz, corpus says {sample_rate} Hz", file.display()).into());
                }
                let ex = match self.extractors.entry(sr) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(v) => v.insert(MelExtractor::new(mel.clone())?),
                };
                Ok(audio::pool_spectrogram(&ex.compute(&wave)?)?)
            }
        }
    }
}

fn sample_rate_of(clip: &ClipRecord) -> Option<u32> {
    match &clip.audio {
        Some(AudioSource::Waveform { sample_rate, .. }) => Some(*sample_rate),
        _ => None,
    }
}

fn train(a: &AudioTrainArgs, run: &mut Run) -> CliResult<()> {
    run.seed(a.seed);
    let defaults = AudioTrainConfig::default();
    let cfg = AudioTrainConfig {
        lr: a.lr.unwrap_or(defaults.lr),
        batch_size: a.batch.unwrap_or(defaults.batch_size),
        dropout: a.dropout.unwrap_or(defaults.dropout),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        seed: a.seed,
    };
    if !(0.0..1.0).contains(&cfg.dropout) {
        return usage(format!("--dropout {} is outside [0, 1)", cfg.dropout));
    }
    run.param("audio_train", &cfg);
    let corpus = load_corpora(&a.corpus, run)?;
    let set = load_set(&a.labels, run)?;
    set.check_against(&corpus)?;

    let clips: Vec<&ClipRecord> = set.pairs().iter().map(|(id, _)| corpus.require(id)).collect::<Result<_, _>>()?;
    let sr = clips.iter().find_map(|c| sample_rate_of(c)).unwrap_or(16_000);
    let mel = MelConfig::new(sr);
    run.param("mel", &mel);
    let mut source = FeatureSource::new(&a.corpus);
    let mut examples = Vec::with_capacity(clips.len());
    for (clip, (_, label)) in clips.iter().zip(set.pairs()) {
        examples.push((source.features(clip, &mel)?, *label));
    }
    let model = audio::train_audio(&examples, mel, &cfg)?;

    let correct = examples
        .iter()
        .filter(|(x, y)| audio::predict_audio(&model, x).map(|p| u8::from(p >= 0.5) == *y).unwrap_or(false))
        .count();
    let accuracy = correct as f64 / examples.len() as f64;
    prepare_output(&a.out)?;
    model.save(&a.out)?;
    run.output(&a.out);
    run.result("train_accuracy", accuracy);
    println!(
        "trained audio head on {} clips, training accuracy {accuracy:.4} -> {}",
        examples.len(),
        a.out.display()
    );
    Ok(())
}

fn evaluate(a: &AudioEvalArgs, run: &mut Run) -> CliResult<()> {
    run.input(&a.model);
    let model = AudioModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let corpus = load_corpora(&a.corpus, run)?;
    let gold = load_set(&a.gold, run)?;
    let mut source = FeatureSource::new(&a.corpus);
    let mut rows = Vec::with_capacity(gold.len());
    for (id, label) in gold.pairs() {
        let clip = corpus.require(id)?;
        let x = source.features(clip, &model.mel)?;
        rows.push(ScoredClip {
            clip_id: id.clone(),
            score: audio::predict_audio(&model, &x)?,
            label: *label,
        });
    }
    let report = EvalReport::from_scores(rows)?;
    if let Some(out) = &a.out {
        prepare_output(out)?;
        report.write(out)?;
        run.output(out);
    }
    run.result("roc_auc", report.roc_auc);
    print!("{}", report.summary_table());
    println!("ROC-AUC {:.4}", report.roc_auc);
    Ok(())
}
