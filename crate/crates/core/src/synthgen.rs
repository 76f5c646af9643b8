//! Seeded synthetic benchmark: trigonometric-plus-interaction ground-truth
//! embeddings, covariates on a low-dimensional manifold, Gaussian noise.
//!
//! The true user embedding has components
//!
//! ```text
//! f_j(x) = Σ_l α_jl sin(2π x_l) + Σ_l β_jl cos(2π x_l) + Σ_{l<D} ζ_jl x_l x_{l+1}
//! ```
//!
//! and the item embedding mirrors it with its own coefficients. Only the first
//! `d` covariate coordinates are free; coordinate `l > d` copies `l - d`.
//!
//! Every random quantity comes from a ChaCha8 generator seeded with
//! `spec.seed`, one stream per purpose (see [`Stream`]). Gaussian noise uses
//! the ziggurat sampler of `rand_distr::Normal`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{CovariateTable, ObservationSet, Rating};
use crate::error::{Error, Result};
use crate::twotower::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Nominal user covariate width.
    #[serde(rename = "D_u")]
    pub user_dim: usize,
    /// Nominal item covariate width.
    #[serde(rename = "D_i")]
    pub item_dim: usize,
    /// Embedding width of the ground truth.
    #[serde(rename = "p")]
    pub embed_dim: usize,
    /// Number of free covariate coordinates.
    #[serde(rename = "d")]
    pub intrinsic_dim: usize,
    pub n_ratings: usize,
    pub noise_var: f64,
    #[serde(default = "default_coeff_range")]
    pub coeff_range: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_coeff_range() -> f64 {
    0.15
}

impl SyntheticSpec {
    /// The (1500, 1500), 100k-rating scenario with `D = 50`, `p = 30`, `σ² = 0.1`.
    pub fn full_scale(intrinsic_dim: usize, seed: u64) -> Self {
        Self {
            n_users: 1500,
            n_items: 1500,
            user_dim: 50,
            item_dim: 50,
            embed_dim: 30,
            intrinsic_dim,
            n_ratings: 100_000,
            noise_var: 0.1,
            coeff_range: 0.15,
            seed,
        }
    }

    /// Desk-scale default: 300 x 300 with 10k ratings.
    pub fn desk_scale(intrinsic_dim: usize, seed: u64) -> Self {
        Self {
            n_users: 300,
            n_items: 300,
            n_ratings: 10_000,
            ..Self::full_scale(intrinsic_dim, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::invariant("positive_sizes", "n_users and n_items must be >= 1"));
        }
        if self.embed_dim == 0 {
            return Err(Error::invariant("positive_sizes", "p must be >= 1"));
        }
        if self.intrinsic_dim < 1 || self.intrinsic_dim > self.user_dim.min(self.item_dim) {
            return Err(Error::invariant(
                "intrinsic_dim_range",
                format!(
                    "need 1 <= d <= min(D_u, D_i), got d = {}, D_u = {}, D_i = {}",
                    self.intrinsic_dim, self.user_dim, self.item_dim
                ),
            ));
        }
        let cells = self.n_users.saturating_mul(self.n_items);
        if self.n_ratings > cells {
            return Err(Error::invariant(
                "n_ratings_fit",
                format!("n_ratings {} exceeds n_users * n_items = {cells}", self.n_ratings),
            ));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invariant(
                "noise_var_nonneg",
                "noise_var must be finite and >= 0",
            ));
        }
        if !(self.coeff_range >= 0.0 && self.coeff_range.is_finite()) {
            return Err(Error::invariant(
                "coeff_range_nonneg",
                "coeff_range must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Fraction of the rating grid that is observed.
    pub fn density(&self) -> f64 {
        self.n_ratings as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

/// ChaCha stream index used for each random quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GroundTruth = 0,
    UserCovariates = 1,
    ItemCovariates = 2,
    Pairs = 3,
    Noise = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

/// Coefficients of one side's true embedding function. Matrices are
/// row-major with `p` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEmbedding {
    pub input_dim: usize,
    pub embed_dim: usize,
    /// `p x D` sine coefficients.
    pub alpha: Vec<f64>,
    /// `p x D` cosine coefficients.
    pub beta: Vec<f64>,
    /// `p x (D-1)` coefficients of neighbouring-coordinate products.
    pub zeta: Vec<f64>,
}

impl TrueEmbedding {
    fn draw<R: Rng>(input_dim: usize, embed_dim: usize, range: f64, rng: &mut R) -> Self {
        let mut draw = |len: usize| -> Vec<f64> {
            if range == 0.0 {
                vec![0.0; len]
            } else {
                (0..len).map(|_| rng.random_range(-range..=range)).collect()
            }
        };
        let alpha = draw(embed_dim * input_dim);
        let beta = draw(embed_dim * input_dim);
        let zeta = draw(embed_dim * input_dim.saturating_sub(1));
        Self {
            input_dim,
            embed_dim,
            alpha,
            beta,
            zeta,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::dim(format!(
                "covariate has length {} but the true embedding expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let d = self.input_dim;
        let sin: Vec<f64> = x.iter().map(|v| (2.0 * PI * v).sin()).collect();
        let cos: Vec<f64> = x.iter().map(|v| (2.0 * PI * v).cos()).collect();
        let prod: Vec<f64> = x.windows(2).map(|w| w[0] * w[1]).collect();
        Ok((0..self.embed_dim)
            .map(|j| {
                dot(&self.alpha[j * d..(j + 1) * d], &sin)
                    + dot(&self.beta[j * d..(j + 1) * d], &cos)
                    + dot(&self.zeta[j * (d - 1)..(j + 1) * (d - 1)], &prod)
            })
            .collect())
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &f64> {
        self.alpha.iter().chain(&self.beta).chain(&self.zeta)
    }
}

/// Ground-truth functions for both sides plus the noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub user: TrueEmbedding,
    pub item: TrueEmbedding,
    pub noise_var: f64,
}

impl GroundTruth {
    pub fn true_user_embedding(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.user.evaluate(x)
    }

    pub fn true_item_embedding(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.item.evaluate(x)
    }

    /// Noise-free rating for one covariate pair.
    pub fn true_score(&self, x_user: &[f64], x_item: &[f64]) -> Result<f64> {
        Ok(dot(
            &self.true_user_embedding(x_user)?,
            &self.true_item_embedding(x_item)?,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All six coefficient families i.i.d. uniform on `[-coeff_range, coeff_range]`.
pub fn draw_ground_truth(spec: &SyntheticSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = spec.rng(Stream::GroundTruth);
    let user = TrueEmbedding::draw(spec.user_dim, spec.embed_dim, spec.coeff_range, &mut rng);
    let item = TrueEmbedding::draw(spec.item_dim, spec.embed_dim, spec.coeff_range, &mut rng);
    Ok(GroundTruth {
        user,
        item,
        noise_var: spec.noise_var,
    })
}

/// `count` covariate rows whose first `d` coordinates are uniform on `[0,1]`
/// and whose remaining coordinates repeat them with period `d`.
pub fn generate_covariates(spec: &SyntheticSpec, count: usize, side: Side) -> Result<CovariateTable> {
    spec.validate()?;
    let (dim, stream) = match side {
        Side::User => (spec.user_dim, Stream::UserCovariates),
        Side::Item => (spec.item_dim, Stream::ItemCovariates),
    };
    let d = spec.intrinsic_dim;
    let mut rng = spec.rng(stream);
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let start = data.len();
        for _ in 0..d {
            data.push(rng.random::<f64>());
        }
        for l in d..dim {
            let v = data[start + l - d];
            data.push(v);
        }
    }
    CovariateTable::new(dim, data)
}

/// Samples `n_ratings` distinct pairs uniformly from the full grid and rates
/// them with the true score plus `N(0, noise_var)` noise.
pub fn generate_ratings(
    spec: &SyntheticSpec,
    truth: &GroundTruth,
    users: Arc<CovariateTable>,
    items: Arc<CovariateTable>,
) -> Result<ObservationSet> {
    spec.validate()?;
    if users.len() != spec.n_users || items.len() != spec.n_items {
        return Err(Error::dim(format!(
            "covariate tables have {} users and {} items, spec wants {} and {}",
            users.len(),
            items.len(),
            spec.n_users,
            spec.n_items
        )));
    }
    let user_emb = users
        .rows()
        .map(|x| truth.true_user_embedding(x))
        .collect::<Result<Vec<_>>>()?;
    let item_emb = items
        .rows()
        .map(|x| truth.true_item_embedding(x))
        .collect::<Result<Vec<_>>>()?;

    let mut pair_rng = spec.rng(Stream::Pairs);
    let cells = spec.n_users * spec.n_items;
    let picks = rand::seq::index::sample(&mut pair_rng, cells, spec.n_ratings);

    let noise =
        Normal::new(0.0, spec.noise_var.sqrt()).map_err(|e| Error::param(format!("noise distribution: {e}")))?;
    let mut noise_rng = spec.rng(Stream::Noise);
    let ratings = picks
        .into_iter()
        .map(|cell| {
            let (u, i) = (cell / spec.n_items, cell % spec.n_items);
            let eps: f64 = noise.sample(&mut noise_rng);
            Rating::new(u, i, dot(&user_emb[u], &item_emb[i]) + eps)
        })
        .collect();
    ObservationSet::new(ratings, users, items)
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub truth: GroundTruth,
    pub observations: ObservationSet,
}

/// Ground truth, covariates for every user and item, and the observed ratings.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let truth = draw_ground_truth(spec)?;
    let users = Arc::new(generate_covariates(spec, spec.n_users, Side::User)?);
    let items = Arc::new(generate_covariates(spec, spec.n_items, Side::Item)?);
    let observations = generate_ratings(spec, &truth, users, items)?;
    Ok(SyntheticDataset { truth, observations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(d: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_users: 20,
            n_items: 15,
            user_dim: 6,
            item_dim: 5,
            embed_dim: 3,
            intrinsic_dim: d,
            n_ratings: 100,
            noise_var: 0.1,
            coeff_range: 0.15,
            seed: 9,
        }
    }

    #[test]
    fn validation_names_the_invariant() {
        let mut s = small(2);
        s.intrinsic_dim = 7;
        assert!(matches!(
            s.validate(),
            Err(Error::Invariant {
                name: "intrinsic_dim_range",
                ..
            })
        ));
        let mut s = small(2);
        s.n_ratings = 301;
        assert!(matches!(
            s.validate(),
            Err(Error::Invariant {
                name: "n_ratings_fit",
                ..
            })
        ));
    }

    #[test]
    fn zero_range_gives_zero_coefficients() {
        let mut s = small(2);
        s.coeff_range = 0.0;
        let gt = draw_ground_truth(&s).unwrap();
        assert!(gt.user.coefficients().chain(gt.item.coefficients()).all(|&c| c == 0.0));
        assert_eq!(gt.true_user_embedding(&[0.3; 6]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hand_trigonometry() {
        let mut t = TrueEmbedding {
            input_dim: 2,
            embed_dim: 1,
            alpha: vec![0.0, 0.0],
            beta: vec![1.0, 0.0],
            zeta: vec![0.0],
        };
        let v = t.evaluate(&[0.25, 0.8]).unwrap();
        assert!(v[0].abs() < 1e-15);
        t.beta = vec![1.0, 1.0];
        assert_eq!(t.evaluate(&[0.0, 0.0]).unwrap(), vec![2.0]);
        assert!(t.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn full_dimension_has_no_replication() {
        let s = small(5);
        let c = generate_covariates(&s, 50, Side::Item).unwrap();
        assert_eq!(c.dim(), 5);
        // distinct uniforms: no coordinate equals the previous one
        assert!(c.rows().all(|r| r.windows(2).all(|w| w[0] != w[1])));
    }

    #[test]
    fn replication_structure() {
        let s = SyntheticSpec::desk_scale(20, 4);
        let c = generate_covariates(&s, 200, Side::User).unwrap();
        for r in c.rows() {
            assert_eq!(r[20], r[0]);
            assert_eq!(r[40], r[20]);
            for l in 20..50 {
                assert_eq!(r[l], r[l - 20]);
            }
            assert!(r.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn noiseless_ratings_equal_true_scores() {
        let mut s = small(3);
        s.noise_var = 0.0;
        let ds = generate(&s).unwrap();
        let obs = &ds.observations;
        assert_eq!(obs.len(), 100);
        for r in obs.ratings() {
            let expect = ds
                .truth
                .true_score(obs.user_covariates().row(r.user), obs.item_covariates().row(r.item))
                .unwrap();
            assert!((r.value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.observations.ratings(), b.observations.ratings());
        let mut other = small(3);
        other.seed += 1;
        let c = generate(&other).unwrap();
        assert_ne!(a.observations.ratings(), c.observations.ratings());
    }

    #[test]
    fn full_scale_density() {
        let s = SyntheticSpec::full_scale(20, 0);
        assert!((s.density() - 100_000.0 / 2_250_000.0).abs() < 1e-15);
        assert!((s.density() - 0.0444).abs() < 1e-4);
    }
}
