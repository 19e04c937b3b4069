use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use vnd_core::corpus::{synth_corpus, SynthConfig};
use vnd_core::curation::*;
use vnd_core::linalg;

fn positives(set: &CuratedSet) -> BTreeSet<String> {
    set.positives().map(str::to_string).collect()
}

#[test]
fn noiseless_ss_recovers_planted_visual_set() {
    for seed in [0, 1, 17, 123] {
        let cfg = SynthConfig { noise_sigma: 0.0, n_clips: 300, ..SynthConfig::default() };
        let out = synth_corpus(&cfg, seed).unwrap();
        let ss = derive_ss(&out.corpus, 0.5);
        let planted: BTreeSet<String> = out.oracle.iter().filter(|(_, &y)| y == 1).map(|(k, _)| k.clone()).collect();
        assert_eq!(positives(&ss), planted, "seed {seed}");
    }
}

#[test]
fn ss_matches_brute_force_similarities() {
    let out = synth_corpus(&SynthConfig { noise_sigma: 0.2, n_clips: 200, ..SynthConfig::default() }, 5).unwrap();
    for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let set = derive_ss(&out.corpus, c);
        for clip in out.corpus.clips() {
            let k = clip.keystep_emb.as_ref().unwrap();
            let cos = linalg::dot(&clip.sent_emb, k) / (linalg::norm(&clip.sent_emb) * linalg::norm(k));
            let want = u8::from(cos.max(0.0) >= c);
            assert_eq!(set.label_of(&clip.clip_id), Some(want));
        }
    }
}

#[test]
fn ss_monotone_and_inside_vr_across_thresholds() {
    let out = synth_corpus(&SynthConfig { noise_sigma: 0.3, n_clips: 400, ..SynthConfig::default() }, 9).unwrap();
    let vr = positives(&derive_vr(&out.corpus));
    assert_eq!(vr.len(), out.corpus.clips().iter().filter(|c| c.has_keystep()).count());
    let mut prev: Option<BTreeSet<String>> = None;
    for i in 1..=9 {
        let c = i as f64 / 10.0;
        let cur = positives(&derive_ss(&out.corpus, c));
        assert!(cur.is_subset(&vr));
        if let Some(p) = &prev {
            assert!(cur.is_subset(p), "c = {c}");
        }
        prev = Some(cur);
    }
}

#[test]
fn mc_monotone_in_k_and_matches_top_k_intersection() {
    let out = synth_corpus(&SynthConfig { noise_sigma: 0.4, n_clips: 120, ..SynthConfig::default() }, 3).unwrap();
    let cfg = ClassifierConfig { iterations: 30, ..ClassifierConfig::default() };
    let fv = train_task_classifier(&out.corpus, Modality::Video, cfg).unwrap();
    let ft = train_task_classifier(&out.corpus, Modality::Text, cfg).unwrap();
    let n = out.corpus.len();

    let rank = |clf: &TaskClassifier| -> Vec<String> {
        let mut v: Vec<(String, f64)> = out
            .corpus
            .clips()
            .iter()
            .map(|c| (c.clip_id.clone(), clf.own_task_score(c).unwrap()))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(id, _)| id).collect()
    };
    let (rv, rt) = (rank(&fv), rank(&ft));

    let mut prev = BTreeSet::new();
    for k in 0..=n {
        let set = derive_mc(&out.corpus, &fv, &ft, k).unwrap();
        let got = positives(&set);
        let top_v: BTreeSet<String> = rv[..k].iter().cloned().collect();
        let top_t: BTreeSet<String> = rt[..k].iter().cloned().collect();
        assert_eq!(got, &top_v & &top_t, "k = {k}");
        assert!(prev.is_subset(&got));
        prev = got;
    }
    assert_eq!(prev.len(), n);
    assert!(derive_mc(&out.corpus, &fv, &ft, n + 1).is_err());
}

#[test]
fn mc_five_clip_hand_example() {
    // video ranks: e a b c d ; text ranks: a c e b d
    let video = [("a", 0.8), ("b", 0.7), ("c", 0.3), ("d", 0.1), ("e", 0.9)];
    let text = [("a", 0.95), ("b", 0.4), ("c", 0.9), ("d", 0.05), ("e", 0.6)];
    let set = mc_from_scores(&video, &text, 2).unwrap();
    assert_eq!(positives(&set), BTreeSet::from(["a".to_string()]));
    let set = mc_from_scores(&video, &text, 3).unwrap();
    assert_eq!(positives(&set), BTreeSet::from(["a".to_string(), "e".to_string()]));
}

#[test]
fn curation_is_deterministic() {
    let out = synth_corpus(&SynthConfig::default(), 4).unwrap();
    assert_eq!(derive_ss(&out.corpus, 0.5), derive_ss(&out.corpus, 0.5));
    assert_eq!(derive_vr(&out.corpus), derive_vr(&out.corpus));
}

#[test]
fn classifier_order_invariant() {
    let out = synth_corpus(&SynthConfig { n_clips: 80, noise_sigma: 0.3, ..SynthConfig::default() }, 2).unwrap();
    let mut ids: Vec<&str> = out.corpus.clips().iter().map(|c| c.clip_id.as_str()).collect();
    ids.reverse();
    let reversed = out.corpus.subset(&ids).unwrap();
    let cfg = ClassifierConfig::default();
    let a = train_task_classifier(&out.corpus, Modality::Text, cfg).unwrap();
    let b = train_task_classifier(&reversed, Modality::Text, cfg).unwrap();
    for (x, y) in a.weight.data.iter().zip(&b.weight.data) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn curated_set_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth_corpus(&SynthConfig { n_clips: 50, ..SynthConfig::default() }, 1).unwrap();
    let set = derive_ss(&out.corpus, 0.55);
    let path = dir.path().join("ss.jsonl");
    write_curated(&set, &path).unwrap();
    let back = load_curated(&path).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.provenance(), set.provenance());
}

#[test]
fn curated_set_rejects_duplicates_and_bad_labels() {
    let dup = vec![("a".to_string(), 1), ("a".to_string(), 0)];
    assert!(CuratedSet::new(SetName::Ss, BTreeMap::new(), dup).is_err());
    let bad = vec![("a".to_string(), 2)];
    assert!(CuratedSet::new(SetName::Ss, BTreeMap::new(), bad).is_err());
}

proptest! {
    #[test]
    fn similarity_is_scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 1..16), alpha in 0.001f64..1000.0) {
        prop_assume!(linalg::norm(&v) > 1e-6);
        let scaled: Vec<f64> = v.iter().map(|x| x * alpha).collect();
        let s = sentence_similarity(&v, &scaled).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_in_unit_interval(
        a in prop::collection::vec(-10.0f64..10.0, 5),
        b in prop::collection::vec(-10.0f64..10.0, 5),
    ) {
        let s = sentence_similarity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }
}
