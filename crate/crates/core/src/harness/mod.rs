//! Experiment protocol: train/test splits, validation tuning of the two-tower
//! model, cross-validated tuning of the baselines, replication and RMSE/SE
//! aggregation.
//!
//! Replication `r` of a scenario is driven only by `base_seed + r` plus the
//! fixed offsets in [`seed_offsets`]. Every scenario uses the same
//! replication seeds, so the same ground-truth coefficients are shared across
//! cells that differ only in size or intrinsic dimension.

mod config;
mod table;

pub use config::{
    default_k_grid, default_lambda_grid, seed_offsets, ExperimentConfig, Method, Scenario, T2recSettings,
};
pub use table::{ResultRow, ResultTable, RunRecord};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{fit_baseline, BaselineKind, BaselineSettings, Predictor, RatingIndex};
use crate::data::{ObservationSet, Rating};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::synthgen::generate;
use crate::twotower::{train, Embeddings, TrainConfig, TrainOutcome, TwoTowerModel};

impl Predictor for Embeddings {
    fn predict(&self, user: usize, item: usize) -> f64 {
        self.score(user, item)
    }
}

/// Uniformly random partition with `floor(ratio * n)` ratings on the first side.
pub fn split(data: &ObservationSet, ratio: f64, seed: u64) -> Result<(ObservationSet, ObservationSet)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut ratings = data.ratings().to_vec();
    ratings.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (ratio * ratings.len() as f64).floor() as usize;
    if cut == 0 || cut == ratings.len() {
        return Err(Error::Empty(format!(
            "splitting {} ratings at {ratio} leaves one side empty",
            ratings.len()
        )));
    }
    let rest = ratings.split_off(cut);
    Ok((data.with_ratings(ratings), data.with_ratings(rest)))
}

/// Root mean squared error of `predictor` over `test`.
pub fn evaluate_rmse(predictor: &(impl Predictor + ?Sized), test: &[Rating]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("no test ratings".into()));
    }
    let sse: f64 = test
        .iter()
        .map(|r| (r.value - predictor.predict(r.user, r.item)).powi(2))
        .sum();
    Ok((sse / test.len() as f64).sqrt())
}

/// Validation error of one penalty value during tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub value: f64,
    /// `None` when the run failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Tuned<M> {
    pub best: f64,
    pub model: M,
    pub grid: Vec<GridPoint>,
}

/// Index of the smallest score; ties go to the smaller grid value.
fn argmin(points: &[GridPoint]) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.score.map(|s| (i, s, p.value)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
        .map(|t| t.0)
}

/// Carves `val_fraction` of `train_set` off as a validation set, calls
/// `trainer(fit, val, lambda)` for every grid value and keeps the model with
/// the lowest returned validation RMSE.
pub fn tune_t2rec_with<M, F>(
    train_set: &ObservationSet,
    lambda_grid: &[f64],
    val_fraction: f64,
    seed: u64,
    mut trainer: F,
) -> Result<Tuned<M>>
where
    F: FnMut(&ObservationSet, &ObservationSet, f64) -> Result<(M, f64)>,
{
    if lambda_grid.is_empty() {
        return Err(Error::param("empty lambda grid"));
    }
    let (val, fit) = split(train_set, val_fraction, seed)?;
    let mut grid = Vec::with_capacity(lambda_grid.len());
    let mut models = Vec::with_capacity(lambda_grid.len());
    let mut last_err = None;
    for &lambda in lambda_grid {
        match trainer(&fit, &val, lambda) {
            Ok((m, score)) if score.is_finite() => {
                grid.push(GridPoint {
                    value: lambda,
                    score: Some(score),
                });
                models.push(Some(m));
            }
            Ok(_) => {
                grid.push(GridPoint {
                    value: lambda,
                    score: None,
                });
                models.push(None);
            }
            Err(e) => {
                last_err = Some(e);
                grid.push(GridPoint {
                    value: lambda,
                    score: None,
                });
                models.push(None);
            }
        }
    }
    let Some(i) = argmin(&grid) else {
        return Err(Error::Experiment(format!(
            "every lambda failed; last error: {}",
            last_err.map_or_else(|| "non-finite validation error".to_string(), |e| e.to_string())
        )));
    };
    Ok(Tuned {
        best: grid[i].value,
        model: models[i].take().expect("model present for a scored grid point"),
        grid,
    })
}

/// A freshly initialized two-tower model for `data`'s covariate widths.
pub fn init_t2rec(data: &ObservationSet, settings: &T2recSettings, seed: u64) -> Result<TwoTowerModel> {
    TwoTowerModel::init(
        data.user_covariates().dim(),
        data.item_covariates().dim(),
        &settings.hidden,
        settings.embed_dim,
        Activation::Relu,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// Validation-set tuning of the penalty. Every grid value starts from the
/// same initialization; the returned model is the best-validation model of
/// the selected value.
pub fn tune_t2rec(
    train_set: &ObservationSet,
    lambda_grid: &[f64],
    val_fraction: f64,
    settings: &T2recSettings,
    seed: u64,
) -> Result<Tuned<TrainOutcome>> {
    let init = init_t2rec(train_set, settings, seed + seed_offsets::INIT)?;
    tune_t2rec_with(
        train_set,
        lambda_grid,
        val_fraction,
        seed + seed_offsets::VALIDATION,
        |fit, val, lambda| {
            let cfg = TrainConfig {
                lambda,
                seed: seed + seed_offsets::TRAIN,
                ..settings.train.clone()
            };
            let out = train(init.clone(), fit, val, &cfg)?;
            let score = out.best_val_rmse();
            Ok((out, score))
        },
    )
}

/// `folds`-fold cross-validation over rating triples. `fit(index, value)`
/// builds a predictor; the value with the lowest mean held-out RMSE wins,
/// ties going to the smaller value.
pub fn tune_baseline_cv<P, F>(
    ratings: &[Rating],
    n_users: usize,
    n_items: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
    mut fit: F,
) -> Result<(f64, Vec<GridPoint>)>
where
    P: Predictor + ?Sized,
    F: FnMut(&RatingIndex, f64) -> Result<Box<P>>,
{
    if grid.is_empty() {
        return Err(Error::param("empty hyperparameter grid"));
    }
    if folds < 2 {
        return Err(Error::param("need at least 2 folds"));
    }
    if ratings.len() < folds {
        return Err(Error::Empty(format!(
            "{} ratings cannot fill {folds} folds",
            ratings.len()
        )));
    }
    if grid.len() == 1 {
        return Ok((
            grid[0],
            vec![GridPoint {
                value: grid[0],
                score: None,
            }],
        ));
    }
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; ratings.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut sums = vec![0.0; grid.len()];
    let mut ok = vec![true; grid.len()];
    for f in 0..folds {
        let mut held = Vec::new();
        let mut kept = Vec::new();
        for (r, &fold) in ratings.iter().zip(&fold_of) {
            if fold == f {
                held.push(*r);
            } else {
                kept.push(*r);
            }
        }
        let index = RatingIndex::new(&kept, n_users, n_items)?;
        for (g, &value) in grid.iter().enumerate() {
            if !ok[g] {
                continue;
            }
            match fit(&index, value).and_then(|p| evaluate_rmse(p.as_ref(), &held)) {
                Ok(rmse) if rmse.is_finite() => sums[g] += rmse,
                _ => ok[g] = false,
            }
        }
    }
    let points: Vec<GridPoint> = grid
        .iter()
        .zip(sums.iter().zip(&ok))
        .map(|(&value, (&s, &good))| GridPoint {
            value,
            score: good.then(|| s / folds as f64),
        })
        .collect();
    let best =
        argmin(&points).ok_or_else(|| Error::Experiment("every grid value failed in cross-validation".into()))?;
    Ok((points[best].value, points))
}

/// Hyperparameter grid of a baseline under `config`.
pub fn baseline_grid(config: &ExperimentConfig, kind: BaselineKind) -> Vec<f64> {
    match kind {
        BaselineKind::Rsvd => config.lambda_grid.clone(),
        BaselineKind::SvdPp => config.svdpp_grid().to_vec(),
        BaselineKind::CoCluster | BaselineKind::Knn => config.k_grid.iter().map(|&k| k as f64).collect(),
    }
}

/// Cross-validates `kind` on `train_set`, refits on all of it with the chosen
/// value and returns the test RMSE with the chosen value.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline(
    kind: BaselineKind,
    train_set: &[Rating],
    test_set: &[Rating],
    n_users: usize,
    n_items: usize,
    grid: &[f64],
    folds: usize,
    settings: &BaselineSettings,
    seed: u64,
) -> Result<(f64, f64)> {
    let fit_seed = seed + seed_offsets::BASELINE;
    let (best, _) = tune_baseline_cv(
        train_set,
        n_users,
        n_items,
        grid,
        folds,
        seed + seed_offsets::FOLDS,
        |index, value| fit_baseline(kind, index, value, settings, fit_seed),
    )?;
    let index = RatingIndex::new(train_set, n_users, n_items)?;
    let model = fit_baseline(kind, &index, best, settings, fit_seed)?;
    Ok((evaluate_rmse(model.as_ref(), test_set)?, best))
}

/// Seed of replication `r`.
pub fn replication_seed(config: &ExperimentConfig, r: usize) -> u64 {
    config.base_seed + r as u64
}

/// One replication of one scenario: generate, split, tune and test every
/// requested method. A failing method is recorded and the others go on.
pub fn run_replication(config: &ExperimentConfig, scenario: Scenario, r: usize) -> Result<Vec<RunRecord>> {
    let seed = replication_seed(config, r);
    let mut spec = config.spec_for(scenario);
    spec.seed = seed + seed_offsets::DATA;
    let data = generate(&spec)?.observations;
    let (train_set, test_set) = split(&data, config.split_ratio, seed + seed_offsets::SPLIT)?;
    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let result = match method.baseline() {
            None => tune_t2rec(
                &train_set,
                &config.lambda_grid,
                config.val_fraction,
                &config.t2rec,
                seed,
            )
            .and_then(|t| {
                let emb = t.model.model.embed(&test_set)?;
                Ok((evaluate_rmse(&emb, test_set.ratings())?, t.best))
            }),
            Some(kind) => run_baseline(
                kind,
                train_set.ratings(),
                test_set.ratings(),
                spec.n_users,
                spec.n_items,
                &baseline_grid(config, kind),
                config.folds,
                &config.baselines,
                seed,
            ),
        };
        out.push(match result {
            Ok((rmse, hyper)) => RunRecord {
                scenario,
                method,
                replication: r,
                rmse: Some(rmse),
                hyper: Some(hyper),
                error: None,
            },
            Err(e) => RunRecord {
                scenario,
                method,
                replication: r,
                rmse: None,
                hyper: None,
                error: Some(format!("{}: {e}", e.code())),
            },
        });
    }
    Ok(out)
}

/// All replications of `scenario`, using up to `jobs` worker threads.
pub fn run_scenario(
    config: &ExperimentConfig,
    scenario: Scenario,
    jobs: usize,
) -> Result<(Vec<ResultRow>, Vec<RunRecord>)> {
    config.validate()?;
    let records = run_cells(config, &[scenario], jobs)?;
    Ok((ResultTable::aggregate(config, &records).rows, records))
}

/// Every scenario of `config`.
pub fn run_sweep(config: &ExperimentConfig, jobs: usize) -> Result<(ResultTable, Vec<RunRecord>)> {
    config.validate()?;
    let records = run_cells(config, &config.scenarios(), jobs)?;
    Ok((ResultTable::aggregate(config, &records), records))
}

fn run_cells(config: &ExperimentConfig, scenarios: &[Scenario], jobs: usize) -> Result<Vec<RunRecord>> {
    let cells: Vec<(Scenario, usize)> = scenarios
        .iter()
        .flat_map(|&s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Experiment(e.to_string()))?;
    let results: Vec<Vec<RunRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, r)| {
                run_replication(config, s, r).unwrap_or_else(|e| {
                    config
                        .methods
                        .iter()
                        .map(|&method| RunRecord {
                            scenario: s,
                            method,
                            replication: r,
                            rmse: None,
                            hyper: None,
                            error: Some(format!("{}: {e}", e.code())),
                        })
                        .collect()
                })
            })
            .collect()
    });
    Ok(results.into_iter().flatten().collect())
}
