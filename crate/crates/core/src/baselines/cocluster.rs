//! Co-clustering baseline.
//!
//! Users are split into `g_u` clusters and items into `g_i` clusters. A rating
//! is predicted as
//!
//! ```text
//! r̂_ui = C̄(c_u, c_i) + (μ_u - C̄_U(c_u)) + (μ_i - C̄_I(c_i))
//! ```
//!
//! with `C̄` the mean rating of the co-cluster, `C̄_U`/`C̄_I` the mean ratings of
//! the user/item clusters and `μ_u`/`μ_i` the user/item means. Clusters
//! without ratings use the global mean.
//!
//! Fitting alternates a batch reassignment of all users (each to the cluster
//! minimizing its own squared error under the current means) and then of all
//! items. A reassignment that would raise the training SSE once the means are
//! recomputed is rejected, which also ends the fit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Predictor, RatingIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterModel {
    pub user_cluster: Vec<usize>,
    pub item_cluster: Vec<usize>,
    /// `g_u x g_i`, row-major.
    pub cocluster_mean: Vec<f64>,
    pub user_cluster_mean: Vec<f64>,
    pub item_cluster_mean: Vec<f64>,
    pub user_mean: Vec<Option<f64>>,
    pub item_mean: Vec<Option<f64>>,
    pub global_mean: f64,
}

impl CoClusterModel {
    pub fn user_clusters(&self) -> usize {
        self.user_cluster_mean.len()
    }

    pub fn item_clusters(&self) -> usize {
        self.item_cluster_mean.len()
    }

    fn build(index: &RatingIndex, user_cluster: Vec<usize>, item_cluster: Vec<usize>, gu: usize, gi: usize) -> Self {
        let mu = index.global_mean();
        let mut co = vec![(0.0, 0usize); gu * gi];
        let mut uc = vec![(0.0, 0usize); gu];
        let mut ic = vec![(0.0, 0usize); gi];
        for r in index.triples() {
            let (a, b) = (user_cluster[r.user], item_cluster[r.item]);
            for cell in [&mut co[a * gi + b], &mut uc[a], &mut ic[b]] {
                cell.0 += r.value;
                cell.1 += 1;
            }
        }
        let avg = |v: Vec<(f64, usize)>| -> Vec<f64> {
            v.into_iter()
                .map(|(s, n)| if n > 0 { s / n as f64 } else { mu })
                .collect()
        };
        Self {
            user_cluster,
            item_cluster,
            cocluster_mean: avg(co),
            user_cluster_mean: avg(uc),
            item_cluster_mean: avg(ic),
            user_mean: (0..index.n_users()).map(|u| index.user_mean(u)).collect(),
            item_mean: (0..index.n_items()).map(|i| index.item_mean(i)).collect(),
            global_mean: mu,
        }
    }

    /// Prediction for a user and item that both have training ratings.
    #[inline]
    fn predict_known(&self, uc: usize, ic: usize, user_mean: f64, item_mean: f64) -> f64 {
        self.cocluster_mean[uc * self.item_clusters() + ic]
            + (user_mean - self.user_cluster_mean[uc])
            + (item_mean - self.item_cluster_mean[ic])
    }

    pub fn sse(&self, index: &RatingIndex) -> f64 {
        index
            .triples()
            .map(|r| (r.value - self.predict(r.user, r.item)).powi(2))
            .sum()
    }
}

impl Predictor for CoClusterModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let um = self.user_mean.get(user).copied().flatten();
        let im = self.item_mean.get(item).copied().flatten();
        match (um, im) {
            (Some(a), Some(b)) => self.predict_known(self.user_cluster[user], self.item_cluster[item], a, b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => self.global_mean,
        }
    }
}

pub fn fit_cocluster(
    index: &RatingIndex,
    g_users: usize,
    g_items: usize,
    iters: usize,
    seed: u64,
) -> Result<CoClusterModel> {
    fit_cocluster_traced(index, g_users, g_items, iters, seed).map(|(m, _)| m)
}

/// Also returns the training SSE after initialization and after every iteration.
pub fn fit_cocluster_traced(
    index: &RatingIndex,
    g_users: usize,
    g_items: usize,
    iters: usize,
    seed: u64,
) -> Result<(CoClusterModel, Vec<f64>)> {
    let (n, m) = (index.n_users(), index.n_items());
    if g_users < 1 || g_users > n || g_items < 1 || g_items > m {
        return Err(Error::param(format!(
            "cluster counts must satisfy 1 <= g_u <= {n} and 1 <= g_i <= {m}, got {g_users} and {g_items}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user_cluster = round_robin(n, g_users, &mut rng);
    let item_cluster = round_robin(m, g_items, &mut rng);
    let mut model = CoClusterModel::build(index, user_cluster, item_cluster, g_users, g_items);
    let mut sse = model.sse(index);
    let mut trace = vec![sse];

    for _ in 0..iters {
        let mut changed = false;
        for side in [Side::Users, Side::Items] {
            let proposal = reassign(&model, index, side);
            let (uc, ic) = match side {
                Side::Users => (proposal, model.item_cluster.clone()),
                Side::Items => (model.user_cluster.clone(), proposal),
            };
            if uc == model.user_cluster && ic == model.item_cluster {
                continue;
            }
            let candidate = CoClusterModel::build(index, uc, ic, g_users, g_items);
            let cand_sse = candidate.sse(index);
            if cand_sse <= sse {
                model = candidate;
                sse = cand_sse;
                changed = true;
            }
        }
        trace.push(sse);
        if !changed {
            break;
        }
    }
    Ok((model, trace))
}

#[derive(Clone, Copy)]
enum Side {
    Users,
    Items,
}

fn round_robin(count: usize, groups: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let mut out = vec![0; count];
    for (pos, id) in order.into_iter().enumerate() {
        out[id] = pos % groups;
    }
    out
}

/// Best cluster for every id on `side` under the current means. Ties keep
/// the current cluster, otherwise the lowest index wins.
fn reassign(model: &CoClusterModel, index: &RatingIndex, side: Side) -> Vec<usize> {
    let (current, groups, count) = match side {
        Side::Users => (&model.user_cluster, model.user_clusters(), index.n_users()),
        Side::Items => (&model.item_cluster, model.item_clusters(), index.n_items()),
    };
    (0..count)
        .map(|id| {
            let (rated, own_mean) = match side {
                Side::Users => (index.user_ratings(id), model.user_mean[id]),
                Side::Items => (index.item_ratings(id), model.item_mean[id]),
            };
            let Some(own_mean) = own_mean else {
                return current[id];
            };
            let cost = |c: usize| -> f64 {
                rated
                    .iter()
                    .map(|&(other, r)| {
                        let pred = match side {
                            Side::Users => model.predict_known(
                                c,
                                model.item_cluster[other],
                                own_mean,
                                model.item_mean[other].unwrap_or(model.global_mean),
                            ),
                            Side::Items => model.predict_known(
                                model.user_cluster[other],
                                c,
                                model.user_mean[other].unwrap_or(model.global_mean),
                                own_mean,
                            ),
                        };
                        (r - pred).powi(2)
                    })
                    .sum()
            };
            let mut best = current[id];
            let mut best_cost = cost(best);
            for c in 0..groups {
                let v = cost(c);
                if v < best_cost {
                    best = c;
                    best_cost = v;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rating;
    use rand::Rng;

    #[test]
    fn constant_ratings_predict_constant() {
        let mut r = Vec::new();
        for u in 0..6 {
            for i in 0..5 {
                if (u + i) % 2 == 0 {
                    r.push(Rating::new(u, i, 3.5));
                }
            }
        }
        let idx = RatingIndex::new(&r, 7, 6).unwrap();
        let m = fit_cocluster(&idx, 3, 2, 10, 1).unwrap();
        for u in 0..8 {
            for i in 0..7 {
                assert!((m.predict(u, i) - 3.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_levels_split() {
        let r = vec![
            Rating::new(0, 0, 1.0),
            Rating::new(0, 1, 1.0),
            Rating::new(1, 0, 5.0),
            Rating::new(1, 1, 5.0),
        ];
        let idx = RatingIndex::from_ratings(&r).unwrap();
        let m = fit_cocluster(&idx, 2, 1, 10, 4).unwrap();
        assert_ne!(m.user_cluster[0], m.user_cluster[1]);
        assert!((m.predict(0, 1) - 1.0).abs() < 1e-12);
        assert!((m.predict(1, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sse_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut r = Vec::new();
        for u in 0..15 {
            for i in 0..15 {
                if rng.random_bool(0.5) {
                    r.push(Rating::new(u, i, rng.random_range(1.0..5.0)));
                }
            }
        }
        let idx = RatingIndex::new(&r, 15, 15).unwrap();
        let (_, trace) = fit_cocluster_traced(&idx, 3, 3, 20, 0).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
    }

    #[test]
    fn marginal_fallbacks() {
        let r = vec![Rating::new(0, 0, 2.0), Rating::new(1, 1, 4.0)];
        let idx = RatingIndex::new(&r, 3, 3).unwrap();
        let m = fit_cocluster(&idx, 1, 1, 3, 0).unwrap();
        assert_eq!(m.predict(0, 2), 2.0);
        assert_eq!(m.predict(2, 1), 4.0);
        assert_eq!(m.predict(2, 2), 3.0);
        assert!(fit_cocluster(&idx, 4, 1, 3, 0).is_err());
    }
}
