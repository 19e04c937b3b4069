#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnd_core::corpus::{ClipRecord, Corpus, Dims};

pub fn clip(id: &str, video: Vec<f64>, tokens: Vec<Vec<f64>>, sent: Vec<f64>) -> ClipRecord {
    ClipRecord {
        clip_id: id.to_string(),
        video_id: "v0".to_string(),
        start_s: 0.0,
        end_s: 3.0,
        video_feat: video,
        video_feat_wide: None,
        narration_text: format!("narration {id}"),
        token_embs: tokens,
        sent_emb: sent,
        keystep_text: None,
        keystep_emb: None,
        task_label: None,
        narration_objects: None,
        visible_objects: None,
        audio: None,
    }
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// `n` clips with random features; ids `a0, a1, ...`.
pub fn random_corpus(n: usize, dv: usize, dw: usize, tokens: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clips = (0..n)
        .map(|i| {
            let video = gaussian_vec(&mut rng, dv);
            let toks = (0..tokens).map(|_| gaussian_vec(&mut rng, dw)).collect();
            let sent = gaussian_vec(&mut rng, 3);
            let mut c = clip(&format!("a{i}"), video, toks, sent);
            c.start_s = 3.0 * i as f64;
            c.end_s = c.start_s + 3.0;
            c
        })
        .collect();
    Corpus::new(Dims::new(dv, dw, 3), clips, None).unwrap()
}
