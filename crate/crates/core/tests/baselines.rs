use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2rec::baselines::{
    fit_cocluster, fit_cocluster_traced, fit_knn, fit_rsvd, fit_rsvd_traced, fit_svdpp, svdpp_objective, KnnMode,
    Predictor, RatingIndex, SvdPpConfig,
};
use t2rec::data::Rating;

fn random_instance(seed: u64, n: usize, m: usize, density: f64) -> Vec<Rating> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n {
        for i in 0..m {
            if rng.random_bool(density) {
                out.push(Rating::new(u, i, f64::from(rng.random_range(1..=5u8))));
            }
        }
    }
    out
}

/// Exhaustive KNN: similarities from scratch, all candidates sorted.
fn knn_oracle(ratings: &[Rating], n: usize, m: usize, k: usize, user: usize, item: usize) -> (f64, bool) {
    let mut by_user: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    for r in ratings {
        by_user[r.user].insert(r.item, r.value);
    }
    let mean = ratings.iter().map(|r| r.value).sum::<f64>() / ratings.len() as f64;
    let mut cands: Vec<(f64, usize, f64)> = Vec::new();
    for v in 0..n {
        if v == user {
            continue;
        }
        let Some(&rv) = by_user[v].get(&item) else { continue };
        let common: Vec<f64> = (0..m)
            .filter_map(|j| Some((by_user[user].get(&j)? - by_user[v].get(&j)?).powi(2)))
            .collect();
        if common.is_empty() {
            continue;
        }
        let msd = common.iter().sum::<f64>() / common.len() as f64;
        cands.push((1.0 / (msd + 1.0), v, rv));
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.truncate(k);
    if cands.is_empty() {
        return (mean, true);
    }
    let w: f64 = cands.iter().map(|c| c.0).sum();
    (cands.iter().map(|c| c.0 * c.2).sum::<f64>() / w, false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_matches_brute_force_on_eight_users(seed in 0u64..10_000, k in 1usize..=8, density in 0.2f64..0.8) {
        let (n, m) = (8, 6);
        let ratings = random_instance(seed, n, m, density);
        prop_assume!(!ratings.is_empty());
        let index = RatingIndex::new(&ratings, n, m).unwrap();
        let model = fit_knn(&index, KnnMode::UserBased, k).unwrap();
        for u in 0..n {
            for i in 0..m {
                let got = model.predict_detailed(u, i);
                let (want, fb) = knn_oracle(&ratings, n, m, k, u, i);
                prop_assert!((got.value - want).abs() <= 1e-12, "({}, {}): {} vs {}", u, i, got.value, want);
                prop_assert_eq!(got.fallback, fb);
            }
        }
    }

    #[test]
    fn knn_similarity_symmetric_in_unit_interval(seed in 0u64..10_000, item_based in any::<bool>()) {
        let ratings = random_instance(seed, 10, 9, 0.4);
        prop_assume!(!ratings.is_empty());
        let index = RatingIndex::new(&ratings, 10, 9).unwrap();
        let mode = if item_based { KnnMode::ItemBased } else { KnnMode::UserBased };
        let size = if item_based { 9 } else { 10 };
        let model = fit_knn(&index, mode, 5).unwrap();
        for a in 0..size {
            for b in 0..size {
                let s = model.similarity(a, b);
                prop_assert_eq!(s, model.similarity(b, a));
                if let Some(v) = s {
                    prop_assert!(v > 0.0 && v <= 1.0);
                }
            }
        }
    }

    #[test]
    fn every_predictor_is_finite_everywhere(seed in 0u64..10_000) {
        let ratings = random_instance(seed, 7, 7, 0.3);
        prop_assume!(!ratings.is_empty());
        // Ids 7 and 8 never appear in the ratings.
        let index = RatingIndex::new(&ratings, 9, 9).unwrap();
        let models: Vec<Box<dyn Predictor>> = vec![
            Box::new(fit_rsvd(&index, 3, 0.1, 5, seed).unwrap()),
            Box::new(fit_svdpp(&index, &SvdPpConfig { rank: 3, epochs: 3, seed, ..SvdPpConfig::default() }).unwrap()),
            Box::new(fit_cocluster(&index, 2, 2, 5, seed).unwrap()),
            Box::new(fit_knn(&index, KnnMode::UserBased, 3).unwrap()),
        ];
        for model in &models {
            for u in 0..9 {
                for i in 0..9 {
                    prop_assert!(model.predict(u, i).is_finite());
                }
            }
        }
    }
}

#[test]
fn als_objective_monotone_on_fifty_instances() {
    for seed in 0..50 {
        let ratings = random_instance(seed, 20, 20, 0.5);
        let index = RatingIndex::new(&ratings, 20, 20).unwrap();
        let (_, trace) = fit_rsvd_traced(&index, 3, 0.1, 10, seed).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn rank_one_exact_recovery() {
    let ratings = vec![
        Rating::new(0, 0, 1.0),
        Rating::new(0, 1, 2.0),
        Rating::new(1, 0, 2.0),
        Rating::new(1, 1, 4.0),
    ];
    let index = RatingIndex::new(&ratings, 2, 2).unwrap();
    let model = fit_rsvd(&index, 1, 0.0, 50, 0).unwrap();
    let sse: f64 = ratings
        .iter()
        .map(|r| (model.predict(r.user, r.item) - r.value).powi(2))
        .sum();
    assert!((sse / 4.0).sqrt() < 1e-3);
}

#[test]
fn cocluster_sse_monotone_on_random_instances() {
    for seed in 0..20 {
        let ratings = random_instance(seed, 15, 15, 0.5);
        let index = RatingIndex::new(&ratings, 15, 15).unwrap();
        let (_, trace) = fit_cocluster_traced(&index, 3, 3, 20, seed).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn cocluster_two_level_users_split_by_exhaustive_check() {
    let ratings = vec![
        Rating::new(0, 0, 1.0),
        Rating::new(0, 1, 1.0),
        Rating::new(1, 0, 5.0),
        Rating::new(1, 1, 5.0),
    ];
    let index = RatingIndex::new(&ratings, 2, 2).unwrap();
    let model = fit_cocluster(&index, 2, 1, 10, 0).unwrap();
    assert_ne!(model.user_cluster[0], model.user_cluster[1]);
    assert!((model.predict(0, 1) - 1.0).abs() < 1e-12);
    assert!((model.predict(1, 0) - 5.0).abs() < 1e-12);
}

#[test]
fn svdpp_epoch_decreases_objective() {
    let ratings = random_instance(4, 10, 10, 0.5);
    let index = RatingIndex::new(&ratings, 10, 10).unwrap();
    let cfg = SvdPpConfig {
        rank: 3,
        reg: 0.02,
        lr: 1e-3,
        epochs: 0,
        seed: 1,
        ..SvdPpConfig::default()
    };
    let start = fit_svdpp(&index, &cfg).unwrap();
    let one = fit_svdpp(&index, &SvdPpConfig { epochs: 1, ..cfg }).unwrap();
    assert!(svdpp_objective(&one, &index) < svdpp_objective(&start, &index));
}
