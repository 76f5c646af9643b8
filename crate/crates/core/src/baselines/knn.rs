//! Top-K neighbourhood prediction with MSD similarity.
//!
//! `sim(a, b) = 1 / (msd(a, b) + 1)` where `msd` is the mean squared
//! difference over co-rated entries. Pairs without a co-rated entry are not
//! linked. A prediction for `(u, i)` is the similarity-weighted mean of the
//! ratings of `i` by the `k` most similar linked neighbours of `u` that rated
//! `i` (item-based mode swaps the roles of users and items).

use super::{Predictor, RatingIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMode {
    UserBased,
    ItemBased,
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    mode: KnnMode,
    k: usize,
    /// Number of entities on the neighbour side.
    size: usize,
    /// Dense `size x size`; 0 means unlinked.
    sim: Vec<f64>,
    index: RatingIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnPrediction {
    pub value: f64,
    /// True when no neighbour qualified and the global mean was returned.
    pub fallback: bool,
}

impl KnnModel {
    pub fn mode(&self) -> KnnMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `None` when `a` and `b` share no rated entry.
    pub fn similarity(&self, a: usize, b: usize) -> Option<f64> {
        let s = self.sim[a * self.size + b];
        (s > 0.0).then_some(s)
    }

    pub fn predict_detailed(&self, user: usize, item: usize) -> KnnPrediction {
        let (me, target) = match self.mode {
            KnnMode::UserBased => (user, item),
            KnnMode::ItemBased => (item, user),
        };
        let fallback = KnnPrediction {
            value: self.index.global_mean(),
            fallback: true,
        };
        let raters = match self.mode {
            KnnMode::UserBased if me < self.size && target < self.index.n_items() => self.index.item_ratings(target),
            KnnMode::ItemBased if me < self.size && target < self.index.n_users() => self.index.user_ratings(target),
            _ => return fallback,
        };
        let mut cands: Vec<(f64, usize, f64)> = raters
            .iter()
            .filter(|&&(v, _)| v != me)
            .filter_map(|&(v, r)| self.similarity(me, v).map(|s| (s, v, r)))
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        cands.truncate(self.k);
        let (num, den) = cands.iter().fold((0.0, 0.0), |(n, d), &(s, _, r)| (n + s * r, d + s));
        if den > 0.0 {
            KnnPrediction {
                value: num / den,
                fallback: false,
            }
        } else {
            fallback
        }
    }
}

impl Predictor for KnnModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        self.predict_detailed(user, item).value
    }
}

pub fn fit_knn(index: &RatingIndex, mode: KnnMode, k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::param("k must be >= 1"));
    }
    let (size, others) = match mode {
        KnnMode::UserBased => (index.n_users(), index.n_items()),
        KnnMode::ItemBased => (index.n_items(), index.n_users()),
    };
    let mut sq = vec![0.0; size * size];
    let mut support = vec![0u32; size * size];
    for o in 0..others {
        let col = match mode {
            KnnMode::UserBased => index.item_ratings(o),
            KnnMode::ItemBased => index.user_ratings(o),
        };
        for (x, &(a, ra)) in col.iter().enumerate() {
            for &(b, rb) in &col[x + 1..] {
                let d = (ra - rb).powi(2);
                sq[a * size + b] += d;
                support[a * size + b] += 1;
            }
        }
    }
    let mut sim = vec![0.0; size * size];
    for a in 0..size {
        sim[a * size + a] = 1.0;
        for b in a + 1..size {
            let n = support[a * size + b];
            if n > 0 {
                let s = 1.0 / (sq[a * size + b] / f64::from(n) + 1.0);
                sim[a * size + b] = s;
                sim[b * size + a] = s;
            }
        }
    }
    Ok(KnnModel {
        mode,
        k,
        size,
        sim,
        index: index.clone(),
    })
}
