use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use t2rec::data::{format_f64, read_ratings_csv, CovariateTable, ObservationSet};
use t2rec::error::Error;
use t2rec::harness::{evaluate_rmse, run_sweep, seed_offsets, split, tune_t2rec, ExperimentConfig};
use t2rec::synthgen::{generate, SyntheticSpec};
use t2rec::theory::{
    covariate_dimension, dimension_suite, embedding_suite, empirical_rate_experiment, gradient_suite, lipschitz_suite,
    rate_report, BoundInputs, BoundReport, RateConfig, SuiteReport,
};
use t2rec::twotower::{write_history_csv, ModelBundle, TrainConfig};

use crate::manifest::{now_ms, OutputDir};
use crate::{CliError, Common};

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_toml<T: DeserializeOwned>(common: &Common) -> Result<T, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {}", path.display(), e.message())).into())
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = load_toml(common)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The generator spec used by `gen` and by `train` without `--data`.
fn data_spec(cfg: &ExperimentConfig) -> SyntheticSpec {
    SyntheticSpec {
        seed: cfg.base_seed + seed_offsets::DATA,
        ..cfg.spec.clone()
    }
}

fn seeds(base: u64, used: &[(&str, u64)]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::from([("base".to_string(), base)]);
    for &(name, offset) in used {
        m.insert(name.to_string(), base + offset);
    }
    m
}

fn load_dataset(dir: &Path) -> Result<ObservationSet, CliError> {
    for f in ["ratings.csv", "users.csv", "items.csv"] {
        if !dir.join(f).is_file() {
            return Err(CliError::Io(format!("dataset directory {} has no {f}", dir.display())));
        }
    }
    Ok(ObservationSet::load(
        &dir.join("ratings.csv"),
        &dir.join("users.csv"),
        &dir.join("items.csv"),
    )?)
}

pub fn gen(common: &Common) -> Result<(), CliError> {
    let started = now_ms();
    let cfg = experiment_config(common)?;
    let spec = data_spec(&cfg);
    let ds = generate(&spec)?;
    let obs = &ds.observations;
    let mut out = OutputDir::create(&common.out)?;
    out.write_with("ratings.csv", |w| obs.write_ratings_csv(w))?;
    out.write_with("users.csv", |w| obs.user_covariates().write_csv(w))?;
    out.write_with("items.csv", |w| obs.item_covariates().write_csv(w))?;
    out.write_str("ground_truth.json", &ds.truth.to_json()?)?;
    out.finish(
        "gen",
        &cfg,
        seeds(cfg.base_seed, &[("data", seed_offsets::DATA)]),
        started,
    )?;
    println!(
        "generated {} ratings for {} users and {} items into {}",
        obs.len(),
        obs.n_users(),
        obs.n_items(),
        common.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainRun<'a> {
    experiment: &'a ExperimentConfig,
    data: Option<String>,
    tune: bool,
}

pub fn train(common: &Common, data: Option<&Path>, tune: bool) -> Result<(), CliError> {
    let started = now_ms();
    let cfg = experiment_config(common)?;
    let seed = cfg.base_seed;
    let dataset = match data {
        Some(dir) => load_dataset(dir)?,
        None => generate(&data_spec(&cfg))?.observations,
    };
    let (train_set, test_set) = split(&dataset, cfg.split_ratio, seed + seed_offsets::SPLIT)?;
    let grid = if tune {
        cfg.lambda_grid.clone()
    } else {
        vec![cfg.t2rec.train.lambda]
    };
    let tuned = tune_t2rec(&train_set, &grid, cfg.val_fraction, &cfg.t2rec, seed)?;
    let outcome = &tuned.model;
    let train_cfg = TrainConfig {
        lambda: tuned.best,
        seed: seed + seed_offsets::TRAIN,
        ..cfg.t2rec.train.clone()
    };
    let test_rmse = evaluate_rmse(&outcome.model.embed(&test_set)?, test_set.ratings())?;

    let mut out = OutputDir::create(&common.out)?;
    let bundle = ModelBundle::new(&outcome.model, &train_cfg, &outcome.history);
    out.write_str("model.json", &bundle.to_json()?)?;
    out.write_with("history.csv", |w| write_history_csv(&outcome.history, w))?;
    out.write_with("test_ratings.csv", |w| test_set.write_ratings_csv(w))?;
    let mut tuning = String::from("lambda,val_rmse\n");
    for p in &tuned.grid {
        let _ = writeln!(
            tuning,
            "{},{}",
            format_f64(p.value),
            p.score.map(format_f64).unwrap_or_default()
        );
    }
    out.write_str("tuning.csv", &tuning)?;
    let run = TrainRun {
        experiment: &cfg,
        data: data.map(|d| d.display().to_string()),
        tune,
    };
    let mut used = vec![
        ("split", seed_offsets::SPLIT),
        ("validation", seed_offsets::VALIDATION),
        ("init", seed_offsets::INIT),
        ("train", seed_offsets::TRAIN),
    ];
    if data.is_none() {
        used.push(("data", seed_offsets::DATA));
    }
    out.finish("train", &run, seeds(seed, &used), started)?;
    println!("lambda {}", format_f64(tuned.best));
    println!("best_epoch {}", outcome.best_epoch);
    println!("val_rmse {}", format_f64(outcome.best_val_rmse()));
    println!("test_rmse {}", format_f64(test_rmse));
    Ok(())
}

pub fn eval(common: &Common, model: &Path, data: &Path, ratings: Option<&Path>) -> Result<(), CliError> {
    let started = now_ms();
    let bundle = ModelBundle::from_json(&read_text(model)?)?;
    let net = bundle.model()?;
    let set = match ratings {
        None => load_dataset(data)?,
        Some(r) => {
            let users = CovariateTable::read_csv(open(&data.join("users.csv"))?)?;
            let items = CovariateTable::read_csv(open(&data.join("items.csv"))?)?;
            ObservationSet::new(read_ratings_csv(open(r)?)?, Arc::new(users), Arc::new(items))?
        }
    };
    let rmse = evaluate_rmse(&net.embed(&set)?, set.ratings())?;
    let mut out = OutputDir::create(&common.out)?;
    let report = json!({ "rmse": rmse, "ratings": set.len() });
    out.write_str(
        "eval.json",
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    let args = json!({
        "model": model.display().to_string(),
        "data": data.display().to_string(),
        "ratings": ratings.map(|r| r.display().to_string()),
    });
    out.finish("eval", &args, BTreeMap::new(), started)?;
    println!("rmse {}", format_f64(rmse));
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

pub fn sweep(common: &Common) -> Result<(), CliError> {
    let started = now_ms();
    let cfg = experiment_config(common)?;
    let (table, records) = run_sweep(&cfg, common.jobs)?;
    let mut out = OutputDir::create(&common.out)?;
    out.write_with("results.csv", |w| table.write_csv(w))?;
    let text = table.to_text();
    out.write_str("results.txt", &text)?;
    out.write_str(
        "runs.json",
        &serde_json::to_string_pretty(&records).map_err(Error::from)?,
    )?;
    let reps: Vec<(String, u64)> = (0..cfg.replications)
        .map(|r| (format!("replication_{r}"), r as u64))
        .collect();
    let used: Vec<(&str, u64)> = reps.iter().map(|(n, o)| (n.as_str(), *o)).collect();
    out.finish("sweep", &cfg, seeds(cfg.base_seed, &used), started)?;
    print!("{text}");
    let failed: Vec<String> = records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                format!(
                    "{} replication {} ({},{},{}): {e}",
                    r.method.name(),
                    r.replication,
                    r.scenario.n_users,
                    r.scenario.n_items,
                    r.scenario.d
                )
            })
        })
        .collect();
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(Error::Experiment(format!("{} cell(s) failed; first: {first}", failed.len())).into()),
    }
}

/// `(quantity, value)` rows of a bound report.
pub fn bound_rows(r: &BoundReport) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = vec![
        ("lipschitz_C".into(), format_f64(r.lipschitz_c)),
        ("lipschitz_C_tilde".into(), format_f64(r.lipschitz_c_tilde)),
        ("C1".into(), format_f64(r.c1)),
        ("C2".into(), format_f64(r.c2)),
        ("C3".into(), format_f64(r.c3)),
        ("eps".into(), format_f64(r.eps)),
        ("approx_bound".into(), format_f64(r.approx_bound)),
        ("d_ui".into(), format_f64(r.d_ui)),
        ("L_ui".into(), r.l_ui.to_string()),
        ("rate_exponent".into(), format_f64(r.rate_exponent)),
        ("rate_value".into(), format_f64(r.rate_value)),
        ("lambda_condition_holds".into(), r.lambda_condition_holds.to_string()),
        ("width_order".into(), format_f64(r.width_order)),
        ("depth_order".into(), format_f64(r.depth_order)),
        ("depth_order_item".into(), format_f64(r.depth_order_item)),
    ];
    for p in &r.entropy {
        rows.push((
            format!("entropy_bound@{}", format_f64(p.eps)),
            p.bound.map(format_f64).unwrap_or_else(|| "undefined".into()),
        ));
    }
    rows
}

pub fn bounds(common: &Common) -> Result<(), CliError> {
    let started = now_ms();
    let inputs: BoundInputs = load_toml(common)?;
    let report = rate_report(&inputs)?;
    let rows = bound_rows(&report);
    let mut out = OutputDir::create(&common.out)?;
    out.write_str(
        "bounds.json",
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    let mut csv = String::from("quantity,value\n");
    for (k, v) in &rows {
        let _ = writeln!(csv, "{k},{v}");
    }
    out.write_str("bounds.csv", &csv)?;
    out.finish("bounds", &inputs, BTreeMap::new(), started)?;
    for (k, v) in &rows {
        println!("{k} {v}");
    }
    Ok(())
}

/// Sizes of the `theorycheck` suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryCheckConfig {
    pub gradient_nets: usize,
    pub embedding_nets: usize,
    pub embedding_inputs: usize,
    pub lipschitz_trials: usize,
    pub base_seed: u64,
}

impl Default for TheoryCheckConfig {
    fn default() -> Self {
        Self {
            gradient_nets: 100,
            embedding_nets: 50,
            embedding_inputs: 1000,
            lipschitz_trials: 500,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TheoryCheckReport {
    suites: Vec<SuiteReport>,
    /// Box-counting estimate on generated covariates with `d = 20`, `D = 50`;
    /// informational, not a pass/fail check.
    covariate_dimension_d20: f64,
}

pub fn theorycheck(common: &Common) -> Result<(), CliError> {
    let started = now_ms();
    let mut cfg: TheoryCheckConfig = match common.config {
        Some(_) => load_toml(common)?,
        None => TheoryCheckConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let s = cfg.base_seed;
    let suites = vec![
        gradient_suite(cfg.gradient_nets, s)?,
        embedding_suite(cfg.embedding_nets, cfg.embedding_inputs, s + 1)?,
        lipschitz_suite(cfg.lipschitz_trials, s + 2)?,
        dimension_suite(s + 3)?,
    ];
    let mut spec = SyntheticSpec::desk_scale(20, s + 4);
    spec.n_users = 10_000;
    let cov_dim = covariate_dimension(&spec, 10_000)?;
    let report = TheoryCheckReport {
        suites,
        covariate_dimension_d20: cov_dim,
    };
    let mut out = OutputDir::create(&common.out)?;
    out.write_str(
        "theorycheck.json",
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    out.finish("theorycheck", &cfg, seeds(s, &[]), started)?;
    for r in &report.suites {
        println!(
            "{} {}: cases {}, violations {}, worst {:e} ({})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.violations,
            r.worst,
            r.note
        );
    }
    println!("info covariate box-counting estimate at d = 20: {cov_dim:.4}");
    let failed: Vec<&str> = report
        .suites
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "property violations in: {}",
            failed.join(", ")
        )))
    }
}

pub fn rate(common: &Common) -> Result<(), CliError> {
    let started = now_ms();
    let mut cfg: RateConfig = load_toml(common)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let table = empirical_rate_experiment(&cfg, common.jobs)?;
    let mut out = OutputDir::create(&common.out)?;
    out.write_str("rate.json", &serde_json::to_string_pretty(&table).map_err(Error::from)?)?;
    out.write_with("rate_slopes.csv", |w| table.write_slopes_csv(w))?;
    out.write_with("rate_cells.csv", |w| table.write_cells_csv(w))?;
    let reps: Vec<(String, u64)> = (0..cfg.replications)
        .map(|r| (format!("replication_{r}"), r as u64))
        .collect();
    let used: Vec<(&str, u64)> = reps.iter().map(|(n, o)| (n.as_str(), *o)).collect();
    out.finish("rate", &cfg, seeds(cfg.base_seed, &used), started)?;
    for s in &table.slopes {
        match s.slope {
            Some(v) => println!("d {} slope {}", s.d, format_f64(v)),
            None => println!("d {} slope degenerate", s.d),
        }
    }
    Ok(())
}
