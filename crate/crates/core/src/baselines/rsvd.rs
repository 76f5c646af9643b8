//! Regularized SVD fitted by alternating least squares.
//!
//! Minimizes `Σ (r_ui - <p_u, q_i>)^2 + reg (|P|_F^2 + |Q|_F^2)` by exact
//! ridge solves, alternating between all user rows and all item rows. Every
//! half-sweep is an exact block minimization, so the objective never rises.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Predictor, RatingIndex};
use crate::error::{Error, Result};
use crate::twotower::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    rank: usize,
    reg: f64,
    global_mean: f64,
    /// `n x k`, row-major.
    user_factors: Vec<f64>,
    /// `m x k`, row-major.
    item_factors: Vec<f64>,
    user_seen: Vec<bool>,
    item_seen: Vec<bool>,
}

impl MfModel {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn user_factor(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.rank..(u + 1) * self.rank]
    }

    pub fn item_factor(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.rank..(i + 1) * self.rank]
    }

    /// `|P|_F^2 + |Q|_F^2`.
    pub fn factor_norm_sq(&self) -> f64 {
        self.user_factors.iter().chain(&self.item_factors).map(|v| v * v).sum()
    }

    /// Regularized training objective on `index`.
    pub fn objective(&self, index: &RatingIndex) -> f64 {
        let sse: f64 = index
            .triples()
            .map(|r| {
                let e = r.value - dot(self.user_factor(r.user), self.item_factor(r.item));
                e * e
            })
            .sum();
        sse + self.reg * self.factor_norm_sq()
    }
}

impl Predictor for MfModel {
    /// `<p_u, q_i>`; the global mean when either side had no training ratings.
    fn predict(&self, user: usize, item: usize) -> f64 {
        let known =
            self.user_seen.get(user).copied().unwrap_or(false) && self.item_seen.get(item).copied().unwrap_or(false);
        if known {
            dot(self.user_factor(user), self.item_factor(item))
        } else {
            self.global_mean
        }
    }
}

pub fn fit_rsvd(index: &RatingIndex, rank: usize, reg: f64, sweeps: usize, seed: u64) -> Result<MfModel> {
    fit(index, rank, reg, sweeps, seed, false).map(|(m, _)| m)
}

/// Like [`fit_rsvd`] but also returns the objective before fitting and after
/// every half-sweep (`1 + 2 * sweeps` values).
pub fn fit_rsvd_traced(
    index: &RatingIndex,
    rank: usize,
    reg: f64,
    sweeps: usize,
    seed: u64,
) -> Result<(MfModel, Vec<f64>)> {
    fit(index, rank, reg, sweeps, seed, true)
}

fn fit(
    index: &RatingIndex,
    rank: usize,
    reg: f64,
    sweeps: usize,
    seed: u64,
    traced: bool,
) -> Result<(MfModel, Vec<f64>)> {
    if rank == 0 {
        return Err(Error::param("rank must be >= 1"));
    }
    if sweeps == 0 {
        return Err(Error::param("ALS needs at least one sweep"));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::param("reg must be finite and >= 0"));
    }
    let (n, m) = (index.n_users(), index.n_items());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rank as f64).sqrt();
    let mut init = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(0.0..scale)).collect() };
    let user_seen: Vec<bool> = (0..n).map(|u| !index.user_ratings(u).is_empty()).collect();
    let item_seen: Vec<bool> = (0..m).map(|i| !index.item_ratings(i).is_empty()).collect();
    let mut user_factors = init(n * rank);
    let mut item_factors = init(m * rank);
    zero_unseen(&mut user_factors, &user_seen, rank);
    zero_unseen(&mut item_factors, &item_seen, rank);

    let mut model = MfModel {
        rank,
        reg,
        global_mean: index.global_mean(),
        user_factors,
        item_factors,
        user_seen,
        item_seen,
    };
    let mut trace = Vec::new();
    let mut record = |model: &MfModel| {
        if traced {
            trace.push(model.objective(index));
        }
    };
    record(&model);
    for _ in 0..sweeps {
        solve_side(
            &mut model.user_factors,
            &model.item_factors,
            (0..n).map(|u| index.user_ratings(u)),
            rank,
            reg,
        );
        record(&model);
        solve_side(
            &mut model.item_factors,
            &model.user_factors,
            (0..m).map(|i| index.item_ratings(i)),
            rank,
            reg,
        );
        record(&model);
    }
    Ok((model, trace))
}

fn zero_unseen(factors: &mut [f64], seen: &[bool], rank: usize) {
    for (row, &s) in factors.chunks_exact_mut(rank).zip(seen) {
        if !s {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Ridge solve for every row of `target` given the fixed `other` factors.
fn solve_side<'a>(
    target: &mut [f64],
    other: &[f64],
    rows: impl Iterator<Item = &'a [(usize, f64)]>,
    rank: usize,
    reg: f64,
) {
    // Lower triangle, row-major; mirrored into the symmetric matrix below.
    let mut lower = vec![0.0; rank * rank];
    for (row, observed) in target.chunks_exact_mut(rank).zip(rows) {
        if observed.is_empty() {
            continue;
        }
        lower.iter_mut().for_each(|v| *v = 0.0);
        let mut rhs = DVector::<f64>::zeros(rank);
        for &(j, r) in observed {
            let q = &other[j * rank..(j + 1) * rank];
            for (a, &qa) in q.iter().enumerate() {
                rhs[a] += r * qa;
                for (g, &qb) in lower[a * rank..=a * rank + a].iter_mut().zip(q) {
                    *g += qa * qb;
                }
            }
        }
        let gram = DMatrix::<f64>::from_fn(rank, rank, |a, b| {
            let v = if b <= a {
                lower[a * rank + b]
            } else {
                lower[b * rank + a]
            };
            if a == b {
                v + reg
            } else {
                v
            }
        });
        let solution = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            // singular normal equations (reg = 0, too few ratings): minimum-norm solution
            None => match gram.svd(true, true).solve(&rhs, 1e-12) {
                Ok(s) => s,
                Err(_) => continue,
            },
        };
        row.copy_from_slice(solution.as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rating;

    fn full(matrix: &[&[f64]]) -> RatingIndex {
        let mut r = Vec::new();
        for (u, row) in matrix.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                r.push(Rating::new(u, i, v));
            }
        }
        RatingIndex::from_ratings(&r).unwrap()
    }

    #[test]
    fn rank_one_exact_recovery() {
        let idx = full(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let m = fit_rsvd(&idx, 1, 0.0, 50, 1).unwrap();
        let sse: f64 = idx
            .triples()
            .map(|r| (r.value - m.predict(r.user, r.item)).powi(2))
            .sum();
        assert!((sse / 4.0).sqrt() < 1e-3);
    }

    #[test]
    fn heavy_reg_shrinks_factors() {
        let idx = full(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 1.0], &[5.0, 1.0, 2.0]]);
        let norms: Vec<f64> = [0.1, 10.0, 1e3, 1e6]
            .iter()
            .map(|&reg| fit_rsvd(&idx, 2, reg, 10, 3).unwrap().factor_norm_sq())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
        assert!(norms[3] < 1e-8);
    }

    #[test]
    fn unseen_ids_fall_back_to_global_mean() {
        let r = vec![Rating::new(0, 0, 2.0), Rating::new(1, 1, 4.0)];
        let idx = RatingIndex::new(&r, 3, 3).unwrap();
        let m = fit_rsvd(&idx, 2, 0.1, 5, 0).unwrap();
        assert_eq!(m.predict(2, 0), 3.0);
        assert_eq!(m.predict(0, 2), 3.0);
        assert_eq!(m.predict(17, 0), 3.0);
        assert!(m.user_factor(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn objective_trace_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = Vec::new();
        for u in 0..20 {
            for i in 0..20 {
                if rng.random_bool(0.5) {
                    r.push(Rating::new(u, i, rng.random_range(1.0..5.0)));
                }
            }
        }
        let idx = RatingIndex::new(&r, 20, 20).unwrap();
        let (_, trace) = fit_rsvd_traced(&idx, 3, 0.5, 15, 2).unwrap();
        assert_eq!(trace.len(), 31);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let idx = full(&[&[1.0]]);
        assert!(fit_rsvd(&idx, 0, 0.1, 5, 0).is_err());
        assert!(fit_rsvd(&idx, 1, 0.1, 0, 0).is_err());
        assert!(fit_rsvd(&idx, 1, -1.0, 1, 0).is_err());
    }
}
