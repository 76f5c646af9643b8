//! Two-tower recommender: a user tower and an item tower map covariates into a
//! shared `p`-dimensional space and the predicted rating is their inner product.
//!
//! Training minimizes
//!
//! ```text
//! (1/|Ω|) Σ (k_ui - <f(x_u), g(x_i)>)^2 + λ (J(f) + J(g))
//! ```
//!
//! where `J` sums squared weights and biases over all layers, using minibatch
//! SGD with a geometrically decaying, floored learning rate and early stopping
//! on a validation set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{format_f64, CovariateTable, ObservationSet, Rating};
use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, Mlp, MlpDocument};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Hidden widths of the default tower: five fully-connected layers with 50
/// hidden units each and a linear output layer.
pub const DEFAULT_HIDDEN: [usize; 4] = [50, 50, 50, 50];
pub const DEFAULT_EMBED_DIM: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerModel {
    user_tower: Mlp,
    item_tower: Mlp,
}

impl TwoTowerModel {
    pub fn new(user_tower: Mlp, item_tower: Mlp) -> Result<Self> {
        if user_tower.output_dim() != item_tower.output_dim() {
            return Err(Error::invariant(
                "tower_output_width",
                format!(
                    "user tower emits {} values, item tower emits {}",
                    user_tower.output_dim(),
                    item_tower.output_dim()
                ),
            ));
        }
        Ok(Self { user_tower, item_tower })
    }

    /// Glorot-initialized towers `D_u -> hidden... -> p` and `D_i -> hidden... -> p`.
    pub fn init<R: Rng + ?Sized>(
        user_dim: usize,
        item_dim: usize,
        hidden: &[usize],
        embed_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let widths = |input: usize| {
            std::iter::once(input)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(embed_dim))
                .collect::<Vec<_>>()
        };
        let user = Mlp::glorot(&widths(user_dim), activation, rng)?;
        let item = Mlp::glorot(&widths(item_dim), activation, rng)?;
        Self::new(user, item)
    }

    pub fn user_tower(&self) -> &Mlp {
        &self.user_tower
    }

    pub fn item_tower(&self) -> &Mlp {
        &self.item_tower
    }

    pub fn user_tower_mut(&mut self) -> &mut Mlp {
        &mut self.user_tower
    }

    pub fn item_tower_mut(&mut self) -> &mut Mlp {
        &mut self.item_tower
    }

    pub fn embed_dim(&self) -> usize {
        self.user_tower.output_dim()
    }

    pub fn score(&self, x_user: &[f64], x_item: &[f64]) -> Result<f64> {
        let u = self.user_tower.forward(x_user)?;
        let v = self.item_tower.forward(x_item)?;
        Ok(dot(&u, &v))
    }

    /// Sum of squared weights and biases over both towers.
    pub fn penalty(&self) -> f64 {
        self.user_tower
            .params()
            .chain(self.item_tower.params())
            .map(|p| p * p)
            .sum()
    }

    fn check_covariates(&self, data: &ObservationSet) -> Result<()> {
        if data.user_covariates().dim() != self.user_tower.input_dim() {
            return Err(Error::dim(format!(
                "user covariates have width {} but the user tower expects {}",
                data.user_covariates().dim(),
                self.user_tower.input_dim()
            )));
        }
        if data.item_covariates().dim() != self.item_tower.input_dim() {
            return Err(Error::dim(format!(
                "item covariates have width {} but the item tower expects {}",
                data.item_covariates().dim(),
                self.item_tower.input_dim()
            )));
        }
        Ok(())
    }

    /// Embeds every row of both covariate tables once.
    pub fn embed(&self, data: &ObservationSet) -> Result<Embeddings> {
        self.check_covariates(data)?;
        Ok(Embeddings {
            dim: self.embed_dim(),
            users: embed_table(&self.user_tower, data.user_covariates()),
            items: embed_table(&self.item_tower, data.item_covariates()),
        })
    }

    /// Mean squared error over `data` (no penalty).
    pub fn mse(&self, data: &ObservationSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("observation set has no ratings".into()));
        }
        let emb = self.embed(data)?;
        let sse: f64 = data
            .ratings()
            .iter()
            .map(|r| {
                let e = r.value - emb.score(r.user, r.item);
                e * e
            })
            .sum();
        Ok(sse / data.len() as f64)
    }

    pub fn rmse(&self, data: &ObservationSet) -> Result<f64> {
        Ok(self.mse(data)?.sqrt())
    }

    /// Regularized training objective over all of `data`.
    pub fn objective(&self, data: &ObservationSet, lambda: f64) -> Result<f64> {
        Ok(self.mse(data)? + lambda * self.penalty())
    }

    /// Gradient of the minibatch objective
    /// `(1/|M|) Σ_M (k - score)^2 + λ J` with respect to both towers.
    ///
    /// Covariates are looked up in `data`; the ratings in `batch` need not
    /// belong to `data.ratings()`.
    pub fn minibatch_gradient(
        &self,
        data: &ObservationSet,
        batch: &[Rating],
        lambda: f64,
    ) -> Result<(Gradients, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Empty("minibatch is empty".into()));
        }
        self.check_covariates(data)?;
        let users = data.user_covariates();
        let items = data.item_covariates();
        if let Some(r) = batch.iter().find(|r| r.user >= users.len() || r.item >= items.len()) {
            return Err(Error::invariant(
                "covariates_present",
                format!("pair ({}, {}) has no covariates", r.user, r.item),
            ));
        }
        let b = batch.len();
        let p = self.embed_dim();
        let xu = gather(users, batch.iter().map(|r| r.user));
        let xi = gather(items, batch.iter().map(|r| r.item));
        let tu = self.user_tower.forward_batch(&xu, b);
        let ti = self.item_tower.forward_batch(&xi, b);
        let (eu, ei) = (tu.output(), ti.output());

        let mut up_user = vec![0.0; b * p];
        let mut up_item = vec![0.0; b * p];
        let scale = -2.0 / b as f64;
        for (k, r) in batch.iter().enumerate() {
            let row = k * p..(k + 1) * p;
            let resid = r.value - dot(&eu[row.clone()], &ei[row.clone()]);
            let w = scale * resid;
            for j in row {
                up_user[j] = w * ei[j];
                up_item[j] = w * eu[j];
            }
        }
        let mut gu = self.user_tower.zero_gradients();
        let mut gi = self.item_tower.zero_gradients();
        self.user_tower.backward_batch(&tu, &up_user, &mut gu);
        self.item_tower.backward_batch(&ti, &up_item, &mut gi);
        if lambda != 0.0 {
            add_penalty_gradient(&self.user_tower, &mut gu, lambda);
            add_penalty_gradient(&self.item_tower, &mut gi, lambda);
        }
        Ok((gu, gi))
    }

    /// One SGD step on the minibatch objective: `θ ← θ - lr ∇θ`.
    pub fn sgd_step(&mut self, data: &ObservationSet, batch: &[Rating], lr: f64, lambda: f64) -> Result<()> {
        let (gu, gi) = self.minibatch_gradient(data, batch, lambda)?;
        apply_step(&mut self.user_tower, &gu, lr);
        apply_step(&mut self.item_tower, &gi, lr);
        Ok(())
    }
}

/// Precomputed embeddings for every user and item id.
#[derive(Debug, Clone)]
pub struct Embeddings {
    dim: usize,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl Embeddings {
    #[inline]
    pub fn user(&self, id: usize) -> &[f64] {
        &self.users[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    pub fn item(&self, id: usize) -> &[f64] {
        &self.items[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user(user), self.item(item))
    }
}

fn embed_table(net: &Mlp, table: &CovariateTable) -> Vec<f64> {
    // chunked so the forward trace stays small
    const CHUNK: usize = 512;
    let d = table.dim();
    let mut out = Vec::with_capacity(table.len() * net.output_dim());
    for rows in table.as_slice().chunks(CHUNK * d.max(1)) {
        let n = rows.len() / d.max(1);
        out.extend_from_slice(net.forward_batch(rows, n).output());
    }
    out
}

fn gather(table: &CovariateTable, ids: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut out = Vec::new();
    for id in ids {
        out.extend_from_slice(table.row(id));
    }
    out
}

fn add_penalty_gradient(net: &Mlp, grads: &mut Gradients, lambda: f64) {
    for (layer, g) in net.layers().iter().zip(grads.iter_mut()) {
        for (gv, &p) in g.params_mut().zip(layer.params()) {
            *gv += 2.0 * lambda * p;
        }
    }
}

fn apply_step(net: &mut Mlp, grads: &Gradients, lr: f64) {
    for (layer, g) in net.layers_mut().iter_mut().zip(grads) {
        for (p, &gv) in layer.params_mut().zip(g.params()) {
            *p -= lr * gv;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            lr_init: 1e-2,
            lr_decay: 0.9,
            lr_min: 5e-3,
            batch_size: 128,
            max_epochs: 300,
            patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, name: &'static str, detail: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::invariant(name, detail.to_string()))
            }
        };
        ok(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda_nonneg",
            "lambda must be finite and >= 0",
        )?;
        ok(
            self.lr_min > 0.0 && self.lr_min <= self.lr_init,
            "lr_bounds",
            "need 0 < lr_min <= lr_init",
        )?;
        ok(
            self.lr_decay > 0.0 && self.lr_decay <= 1.0,
            "lr_decay_range",
            "need 0 < lr_decay <= 1",
        )?;
        ok(self.batch_size >= 1, "batch_size_positive", "batch_size must be >= 1")?;
        ok(self.patience >= 1, "patience_positive", "patience must be >= 1")?;
        ok(self.max_epochs >= 1, "max_epochs_positive", "max_epochs must be >= 1")
    }

    /// Learning rate after `decays` epochs of decay: `max(lr_init * lr_decay^decays, lr_min)`.
    pub fn learning_rate(&self, decays: usize) -> f64 {
        (self.lr_init * self.lr_decay.powi(decays as i32)).max(self.lr_min)
    }
}

/// One row of the training history. Epoch 0 is the untrained model and
/// carries `lr = 0`; training epoch `e >= 1` ran at `learning_rate(e - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_objective: f64,
    pub val_rmse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation RMSE.
    pub model: TwoTowerModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best_val_rmse(&self) -> f64 {
        self.history[self.best_epoch].val_rmse
    }

    pub fn initial_val_rmse(&self) -> f64 {
        self.history[0].val_rmse
    }
}

/// Writes the history as `epoch,train_objective,val_rmse,lr` with round-trip floats.
pub fn write_history_csv<W: std::io::Write>(history: &[EpochRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "train_objective", "val_rmse", "lr"])?;
    for r in history {
        out.write_record([
            r.epoch.to_string(),
            format_f64(r.train_objective),
            format_f64(r.val_rmse),
            format_f64(r.lr),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Minibatch SGD with early stopping on `val`.
///
/// Each epoch visits a fresh uniform shuffle of the training ratings in
/// minibatches of `cfg.batch_size` (the last batch may be smaller). Training
/// stops after `cfg.patience` epochs without a strict improvement of the
/// validation RMSE, or after `cfg.max_epochs`. Ties keep the earliest epoch.
pub fn train(
    model: TwoTowerModel,
    train: &ObservationSet,
    val: &ObservationSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set has no ratings".into()));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set has no ratings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = model;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_objective: model.objective(train, cfg.lambda)?,
        val_rmse: model.rmse(val)?,
        lr: 0.0,
    }];
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_rmse = history[0].val_rmse;
    let mut order: Vec<Rating> = train.ratings().to_vec();

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate(epoch - 1);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            model.sgd_step(train, batch, lr, cfg.lambda)?;
        }
        let record = EpochRecord {
            epoch,
            train_objective: model.objective(train, cfg.lambda)?,
            val_rmse: model.rmse(val)?,
            lr,
        };
        history.push(record);
        if !record.val_rmse.is_finite() || !record.train_objective.is_finite() {
            return Err(Error::Experiment(format!(
                "training diverged at epoch {epoch} (lr {lr}, lambda {})",
                cfg.lambda
            )));
        }
        if record.val_rmse < best_rmse {
            best_rmse = record.val_rmse;
            best_epoch = epoch;
            best = model.clone();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
    })
}

/// Persisted model: both towers plus the configuration and history that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub embed_dim: usize,
    pub user_tower: MlpDocument,
    pub item_tower: MlpDocument,
    pub train_config: TrainConfig,
    pub history: Vec<EpochRecord>,
}

impl ModelBundle {
    pub fn new(model: &TwoTowerModel, cfg: &TrainConfig, history: &[EpochRecord]) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            embed_dim: model.embed_dim(),
            user_tower: model.user_tower.to_document(),
            item_tower: model.item_tower.to_document(),
            train_config: cfg.clone(),
            history: history.to_vec(),
        }
    }

    pub fn model(&self) -> Result<TwoTowerModel> {
        if self.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported bundle format_version {}",
                self.format_version
            )));
        }
        let model = TwoTowerModel::new(
            Mlp::from_document(self.user_tower.clone())?,
            Mlp::from_document(self.item_tower.clone())?,
        )?;
        if model.embed_dim() != self.embed_dim {
            return Err(Error::Format(format!(
                "bundle declares embed_dim {} but towers emit {}",
                self.embed_dim,
                model.embed_dim()
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerParams;
    use std::sync::Arc;

    fn linear(w: &[&[f64]], b: &[f64]) -> Mlp {
        Mlp::new(vec![LayerParams::from_rows(w, b).unwrap()], Activation::Relu).unwrap()
    }

    fn one_obs(xu: Vec<f64>, xi: Vec<f64>, k: f64) -> ObservationSet {
        ObservationSet::new(
            vec![Rating::new(0, 0, k)],
            Arc::new(CovariateTable::from_rows(&[xu]).unwrap()),
            Arc::new(CovariateTable::from_rows(&[xi]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn score_of_aligned_and_zero_embeddings() {
        let m = TwoTowerModel::new(
            linear(&[&[1.0], &[0.0]], &[0.0, 0.0]),
            linear(&[&[1.0], &[0.0]], &[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(m.score(&[1.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(m.score(&[0.0], &[1.0]).unwrap(), 0.0);
        assert!(m.score(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn towers_must_agree_on_width() {
        let r = TwoTowerModel::new(linear(&[&[1.0]], &[0.0]), linear(&[&[1.0], &[1.0]], &[0.0, 0.0]));
        assert!(r.is_err());
    }

    #[test]
    fn penalty_by_hand() {
        let m = TwoTowerModel::new(linear(&[&[1.0, 1.0]], &[1.0]), linear(&[&[2.0]], &[0.0])).unwrap();
        assert_eq!(m.penalty(), 7.0);
        let mut scaled = m.clone();
        scaled.user_tower_mut().scale_params(3.0);
        scaled.item_tower_mut().scale_params(3.0);
        assert!((scaled.penalty() - 63.0).abs() < 1e-12);
    }

    #[test]
    fn objective_single_observation() {
        let m = TwoTowerModel::new(linear(&[&[0.0]], &[0.0]), linear(&[&[0.0]], &[0.0])).unwrap();
        let data = one_obs(vec![1.0], vec![1.0], 2.0);
        assert_eq!(m.objective(&data, 0.0).unwrap(), 4.0);
        let empty = data.with_ratings(vec![]);
        assert!(matches!(m.objective(&empty, 0.0), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_residual_step_leaves_params() {
        let m = TwoTowerModel::new(linear(&[&[1.0]], &[0.5]), linear(&[&[2.0]], &[0.0])).unwrap();
        // score = (1*0.4 + 0.5) * (2*0.3) = 0.54
        let data = one_obs(vec![0.4], vec![0.3], 0.54);
        let mut stepped = m.clone();
        stepped.sgd_step(&data, data.ratings(), 0.1, 0.0).unwrap();
        for (a, b) in m.user_tower().params().zip(stepped.user_tower().params()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_towers_step_matches_hand_gradient() {
        // f(x) = W x (no bias), g(y) = V y, loss = (k - x^T W^T V y)^2
        // dL/dW = -2 r (V y) x^T, dL/dV = -2 r (W x) y^T
        let w = [[0.3, -0.2], [0.1, 0.4]];
        let v = [[0.5, 0.2], [-0.3, 0.6]];
        let x = [0.7, 0.2];
        let y = [0.1, 0.9];
        let k = 1.3;
        let m = TwoTowerModel::new(
            linear(&[&w[0], &w[1]], &[0.0, 0.0]),
            linear(&[&v[0], &v[1]], &[0.0, 0.0]),
        )
        .unwrap();
        let wx: Vec<f64> = (0..2).map(|r| w[r][0] * x[0] + w[r][1] * x[1]).collect();
        let vy: Vec<f64> = (0..2).map(|r| v[r][0] * y[0] + v[r][1] * y[1]).collect();
        let resid = k - (wx[0] * vy[0] + wx[1] * vy[1]);

        let data = one_obs(x.to_vec(), y.to_vec(), k);
        let lr = 0.05;
        let mut stepped = m.clone();
        stepped.sgd_step(&data, data.ratings(), lr, 0.0).unwrap();
        let uw = stepped.user_tower().layers()[0].weights();
        let iw = stepped.item_tower().layers()[0].weights();
        for r in 0..2 {
            for c in 0..2 {
                let expect_w = w[r][c] + lr * 2.0 * resid * vy[r] * x[c];
                let expect_v = v[r][c] + lr * 2.0 * resid * wx[r] * y[c];
                assert!((uw[r * 2 + c] - expect_w).abs() < 1e-14);
                assert!((iw[r * 2 + c] - expect_v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig::default();
        for e in 0..40 {
            let expect = (1e-2 * 0.9f64.powi(e as i32)).max(5e-3);
            assert_eq!(cfg.learning_rate(e), expect);
        }
        assert_eq!(cfg.learning_rate(0), 1e-2);
        assert_eq!(cfg.learning_rate(7), 5e-3);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                lr_min: 0.0,
                ..Default::default()
            },
            TrainConfig {
                lr_min: 0.1,
                ..Default::default()
            },
            TrainConfig {
                lr_decay: 1.5,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                patience: 0,
                ..Default::default()
            },
            TrainConfig {
                lambda: -1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn bundle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = TwoTowerModel::init(3, 4, &[5], 2, Activation::Relu, &mut rng).unwrap();
        let hist = vec![EpochRecord {
            epoch: 0,
            train_objective: 1.5,
            val_rmse: 1.2,
            lr: 0.0,
        }];
        let bundle = ModelBundle::new(&m, &TrainConfig::default(), &hist);
        let back = ModelBundle::from_json(&bundle.to_json().unwrap()).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(back.model().unwrap(), m);
    }
}
