use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2rec::data::{CovariateTable, ObservationSet, Rating};
use t2rec::nn::Activation;
use t2rec::twotower::{train, TrainConfig, TwoTowerModel};

fn toy(seed: u64, n_users: usize, n_items: usize, n: usize) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = |rows: usize, dim: usize| {
        let data: Vec<f64> = (0..rows * dim).map(|_| rng.random()).collect();
        Arc::new(CovariateTable::new(dim, data).unwrap())
    };
    let users = table(n_users, 3);
    let items = table(n_items, 4);
    let mut ratings = Vec::new();
    let mut cells: Vec<(usize, usize)> = (0..n_users).flat_map(|u| (0..n_items).map(move |i| (u, i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
    rand::seq::SliceRandom::shuffle(cells.as_mut_slice(), &mut rng);
    for &(u, i) in cells.iter().take(n) {
        ratings.push(Rating::new(u, i, rng.random_range(-2.0..2.0)));
    }
    ObservationSet::new(ratings, users, items).unwrap()
}

fn model(seed: u64, act: Activation) -> TwoTowerModel {
    TwoTowerModel::init(3, 4, &[5, 4], 3, act, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Flattened parameters of both towers, user first.
fn params(m: &TwoTowerModel) -> Vec<f64> {
    m.user_tower()
        .params()
        .chain(m.item_tower().params())
        .copied()
        .collect()
}

fn set_param(m: &mut TwoTowerModel, k: usize, v: f64) {
    let n_user = m.user_tower().param_count();
    let p = if k < n_user {
        m.user_tower_mut().params_mut().nth(k)
    } else {
        m.item_tower_mut().params_mut().nth(k - n_user)
    };
    *p.unwrap() = v;
}

fn flat_grad(m: &TwoTowerModel, data: &ObservationSet, lambda: f64) -> Vec<f64> {
    let (gu, gi) = m.minibatch_gradient(data, data.ratings(), lambda).unwrap();
    gu.iter()
        .chain(gi.iter())
        .flat_map(|l| l.params().copied().collect::<Vec<_>>())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn minibatch_gradient_matches_objective_differences(seed in 0u64..500, lambda in prop::sample::select(vec![0.0, 1e-3, 0.1])) {
        let data = toy(seed, 6, 5, 8);
        let m = model(seed, Activation::Sigmoid);
        let g = flat_grad(&m, &data, lambda);
        let theta = params(&m);
        let h = 1e-5;
        let mut work = m.clone();
        for (k, &t) in theta.iter().enumerate() {
            set_param(&mut work, k, t + h);
            let plus = work.objective(&data, lambda).unwrap();
            set_param(&mut work, k, t - h);
            let minus = work.objective(&data, lambda).unwrap();
            set_param(&mut work, k, t);
            let numeric = (plus - minus) / (2.0 * h);
            let err = (numeric - g[k]).abs();
            prop_assert!(err <= 1e-8 || err <= 1e-5 * numeric.abs().max(g[k].abs()), "entry {}: {} vs {}", k, g[k], numeric);
        }
    }

    #[test]
    fn small_step_matches_first_order_prediction(seed in 0u64..500) {
        let data = toy(seed, 6, 5, 10);
        // Sigmoid towers keep the objective smooth; ReLU kinks break first-order agreement.
        let m = model(seed, Activation::Sigmoid);
        let lambda = 1e-2;
        let lr = 1e-6;
        let g = flat_grad(&m, &data, lambda);
        let before = m.objective(&data, lambda).unwrap();
        let mut stepped = m.clone();
        stepped.sgd_step(&data, data.ratings(), lr, lambda).unwrap();
        let after = stepped.objective(&data, lambda).unwrap();
        let predicted = lr * g.iter().map(|v| v * v).sum::<f64>();
        prop_assume!(predicted > 1e-12);
        prop_assert!(((before - after) - predicted).abs() <= 0.1 * predicted, "{} vs {}", before - after, predicted);
    }
}

#[test]
fn best_epoch_contract_and_determinism() {
    let all = toy(3, 20, 20, 260);
    let part = |r: &[Rating]| {
        ObservationSet::new(r.to_vec(), all.shared_user_covariates(), all.shared_item_covariates()).unwrap()
    };
    let (data, val) = (part(&all.ratings()[..200]), part(&all.ratings()[200..]));
    let cfg = TrainConfig {
        lambda: 1e-4,
        batch_size: 16,
        max_epochs: 40,
        patience: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(model(1, Activation::Relu), &data, &val, &cfg).unwrap();
    let b = train(model(1, Activation::Relu), &data, &val, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    let min = a.history.iter().map(|r| r.val_rmse).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_val_rmse(), min);
    assert_eq!(a.model.rmse(&val).unwrap(), min);
    assert_eq!(a.history[a.best_epoch].val_rmse, min);
    assert!(a.history.iter().position(|r| r.val_rmse == min) == Some(a.best_epoch));
}

#[test]
fn constant_ratings_do_not_get_worse() {
    let base = toy(5, 15, 15, 120);
    let ratings: Vec<Rating> = base
        .ratings()
        .iter()
        .map(|r| Rating::new(r.user, r.item, 1.5))
        .collect();
    let data = ObservationSet::new(
        ratings[..90].to_vec(),
        base.shared_user_covariates(),
        base.shared_item_covariates(),
    )
    .unwrap();
    let val = ObservationSet::new(
        ratings[90..].to_vec(),
        base.shared_user_covariates(),
        base.shared_item_covariates(),
    )
    .unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        max_epochs: 60,
        patience: 60,
        ..TrainConfig::default()
    };
    let out = train(model(2, Activation::Relu), &data, &val, &cfg).unwrap();
    assert!(out.best_val_rmse() <= out.initial_val_rmse());
    assert!(
        out.best_val_rmse() < 0.5 * out.initial_val_rmse(),
        "{} vs {}",
        out.best_val_rmse(),
        out.initial_val_rmse()
    );
}
