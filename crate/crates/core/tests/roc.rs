use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnd_core::eval::*;

/// Pair-counting oracle: fraction of (pos, neg) pairs ordered correctly, ties half.
fn auc_by_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn random_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..60);
    // coarse grid so ties are common
    let levels = rng.random_range(1..12);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 1;
    labels[1] = 0;
    let scores = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25 - 1.0).collect();
    (scores, labels)
}

#[test]
fn auc_matches_pair_counting_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let (s, l) = random_set(&mut rng);
        let got = roc_auc(&s, &l).unwrap();
        let want = auc_by_pairs(&s, &l);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(roc_auc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.0);
    assert_eq!(roc_auc(&[0.5, 0.5, 0.5], &[0, 1, 1]).unwrap(), 0.5);
    assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    assert!(roc_auc(&[0.1, 0.2], &[0, 0]).is_err());
    assert!(roc_auc(&[], &[]).is_err());
    assert!(roc_auc(&[0.1, f64::NAN], &[0, 1]).is_err());
    assert!(roc_auc(&[0.1], &[0, 1]).is_err());
}

#[test]
fn roc_curve_area_equals_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (s, l) = random_set(&mut rng);
        let pts = roc_curve(&s, &l).unwrap();
        assert_eq!(pts[0], (0.0, 0.0));
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area - roc_auc(&s, &l).unwrap()).abs() < 1e-12);
    }
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((-50i32..50, 0u8..2), 2..80).prop_filter_map("both classes", |v| {
        let s: Vec<f64> = v.iter().map(|(x, _)| *x as f64 / 8.0).collect();
        let l: Vec<u8> = v.iter().map(|(_, y)| *y).collect();
        (l.contains(&0) && l.contains(&1)).then_some((s, l))
    })
}

proptest! {
    #[test]
    fn auc_invariant_under_strictly_increasing_maps((s, l) in scored_labels()) {
        let base = roc_auc(&s, &l).unwrap();
        let warped: Vec<f64> = s.iter().map(|x| (x * 0.7).exp() * 3.0 - 11.0).collect();
        prop_assert_eq!(roc_auc(&warped, &l).unwrap(), base);
        let cubed: Vec<f64> = s.iter().map(|x| x * x * x + x).collect();
        prop_assert_eq!(roc_auc(&cubed, &l).unwrap(), base);
    }

    #[test]
    fn negated_scores_complement_auc((s, l) in scored_labels()) {
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        let sum = roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_lies_in_unit_interval((s, l) in scored_labels()) {
        let a = roc_auc(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn selected_threshold_is_best_among_all_cuts((s, l) in scored_labels()) {
        let choice = select_threshold(&s, &l).unwrap();
        prop_assert_eq!(youden_j(&s, &l, choice.threshold).unwrap(), choice.youden_j);
        // exhaustive scan: every observed score as a cut, plus both infinities
        let mut cuts: Vec<f64> = s.clone();
        cuts.push(f64::INFINITY);
        cuts.push(f64::NEG_INFINITY);
        let best = cuts.iter().map(|&t| youden_j(&s, &l, t).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((choice.youden_j - best).abs() < 1e-12);
        // ties go to the larger threshold
        for &t in threshold_candidates(&s).iter().filter(|&&t| t > choice.threshold) {
            prop_assert!(youden_j(&s, &l, t).unwrap() < choice.youden_j);
        }
    }

    #[test]
    fn candidates_separate_distinct_scores((s, _l) in scored_labels()) {
        let c = threshold_candidates(&s);
        prop_assert_eq!(c[0], f64::INFINITY);
        prop_assert_eq!(*c.last().unwrap(), f64::NEG_INFINITY);
        prop_assert!(c.windows(2).all(|w| w[0] > w[1]));
        let mut distinct = s.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assert_eq!(c.len(), distinct.len() + 1);
    }
}

#[test]
fn random_scores_give_near_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let s: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
    let l: Vec<u8> = (0..4000).map(|_| rng.random_range(0..2)).collect();
    let a = roc_auc(&s, &l).unwrap();
    assert!((0.45..=0.55).contains(&a), "{a}");
}

#[test]
fn all_equal_scores_choose_infinity() {
    let c = select_threshold(&[0.3, 0.3, 0.3], &[1, 0, 1]).unwrap();
    assert_eq!(c.threshold, f64::INFINITY);
    assert_eq!(c.youden_j, 0.0);
}

fn objs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn object_baseline_sixty_percent_boundary() {
    let said = objs(&["pan", "egg", "oil", "salt", "fork"]);
    assert_eq!(object_baseline(&said, &objs(&["pan", "egg", "oil"])), 1);
    assert_eq!(object_baseline(&said, &objs(&["pan", "egg"])), 0);
    assert_eq!(object_baseline(&objs(&["pan"]), &objs(&["PAN "])), 1);
    assert_eq!(object_baseline(&[], &objs(&["pan"])), 0);
    // duplicates count once
    assert_eq!(object_baseline(&objs(&["pan", "pan", "egg"]), &objs(&["pan"])), 0);
    assert_eq!(object_baseline(&objs(&["a", "b", "c"]), &objs(&["a", "b"])), 1);
}

proptest! {
    #[test]
    fn object_baseline_matches_ratio(total in 1usize..40, hit_frac in 0.0f64..=1.0) {
        let hit = ((total as f64) * hit_frac).floor() as usize;
        let said: Vec<String> = (0..total).map(|i| format!("o{i}")).collect();
        let seen: Vec<String> = said[..hit].to_vec();
        let want = u8::from(hit as f64 / total as f64 >= 0.6 - 1e-12);
        prop_assert_eq!(object_baseline(&said, &seen), want);
    }
}
