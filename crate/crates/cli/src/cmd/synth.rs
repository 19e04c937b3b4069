use std::collections::BTreeMap;

use anyhow::Context;
use vnd_core::audio;
use vnd_core::corpus::{self, AudioSource, Corpus, Dims, Split, SynthConfig};
use vnd_core::curation::{self, CuratedSet, SetName};
use vnd_core::rng;

use crate::args::SynthArgs;
use crate::manifest::Run;
use crate::{usage, CliResult};

const AUDIO_SAMPLE_RATE: u32 = 16_000;
const AUDIO_SECONDS: f64 = 0.5;

pub fn run(a: &SynthArgs, run: &mut Run) -> CliResult<()> {
    run.seed(a.seed);
    if a.clips == 0 {
        return usage("--clips must be at least 1");
    }
    let cfg = SynthConfig {
        n_tasks: a.tasks,
        n_keysteps_per_task: a.keysteps,
        n_clips: a.clips + a.val + a.test + a.unlabeled,
        visual_rate: a.visual_rate,
        noise_sigma: a.noise,
        dims: Dims::new(a.dim, a.dim, a.dim),
        tokens_per_clip: a.tokens,
        ..SynthConfig::default()
    };
    run.param("synth", &cfg);
    run.params(BTreeMap::from([
        ("train_clips".to_string(), a.clips.into()),
        ("val_clips".to_string(), a.val.into()),
        ("test_clips".to_string(), a.test.into()),
        ("unlabeled_clips".to_string(), a.unlabeled.into()),
        ("audio".to_string(), a.audio.into()),
    ]));
    let out = match corpus::synth_corpus(&cfg, a.seed) {
        Ok(o) => o,
        Err(vnd_core::Error::InvalidParameter(m)) => return usage(m),
        Err(e) => return Err(e.into()),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut clips = out.corpus.clips().to_vec();
    if a.audio {
        let dir = a.out.join("audio");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, clip) in clips.iter_mut().enumerate() {
            let visual = out.oracle[&clip.clip_id] == 1;
            let seed = rng::derive_seed(a.seed, &[rng::STREAM_SYNTH, i as u64]);
            let wave = audio::synth_voice(visual, AUDIO_SECONDS, AUDIO_SAMPLE_RATE, seed);
            let rel = format!("audio/{}.f32", clip.clip_id);
            audio::write_waveform(a.out.join(&rel), &wave, AUDIO_SAMPLE_RATE)?;
            clip.audio = Some(AudioSource::Waveform {
                path: rel,
                sample_rate: AUDIO_SAMPLE_RATE,
            });
        }
    }

    // Order: train, val, test, then unlabeled.
    let bounds = [a.clips, a.clips + a.val, a.clips + a.val + a.test];
    let split_of = |i: usize| match i {
        i if i < bounds[0] => Split::Train,
        i if i < bounds[1] => Split::Val,
        _ => Split::Test,
    };
    let labeled_clips = clips[..bounds[2]].to_vec();
    let split: BTreeMap<String, Split> = labeled_clips
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clip_id.clone(), split_of(i)))
        .collect();
    let labeled = Corpus::new(cfg.dims, labeled_clips, Some(split))?;
    let labeled_path = a.out.join("labeled.jsonl");
    corpus::write_corpus(&labeled, &labeled_path)?;
    run.output(&labeled_path);

    if a.unlabeled > 0 {
        let unlabeled = Corpus::new(cfg.dims, clips[bounds[2]..].to_vec(), None)?.to_unlabeled();
        let path = a.out.join("unlabeled.jsonl");
        corpus::write_corpus(&unlabeled, &path)?;
        run.output(&path);
    }

    let oracle_path = a.out.join("oracle.jsonl");
    corpus::write_labels(&out.oracle, &oracle_path)?;
    run.output(&oracle_path);

    for (name, split, n) in [("gold_val.jsonl", Split::Val, a.val), ("gold_test.jsonl", Split::Test, a.test)] {
        if n == 0 {
            continue;
        }
        let part = labeled.split_subset(split);
        let ids: Vec<&str> = part.clips().iter().map(|c| c.clip_id.as_str()).collect();
        let gold = CuratedSet::from_labels(SetName::Gold, &out.oracle, Some(&ids))?;
        let path = a.out.join(name);
        curation::write_curated(&gold, &path)?;
        run.output(&path);
    }

    let n_visual = out.oracle.values().filter(|&&y| y == 1).count();
    run.result("n_clips", out.oracle.len());
    run.result("n_visual", n_visual);
    println!(
        "wrote {} clips ({} visual) to {}",
        out.oracle.len(),
        n_visual,
        a.out.display()
    );
    Ok(())
}
