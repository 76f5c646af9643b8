//! Observed ratings and the covariate tables that describe users and items.
//!
//! File formats (comma separated, with header):
//!
//! - ratings: `user_id,item_id,rating`
//! - covariates: `id,c1,...,cD`, one row per id

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Self { user, item, value }
    }
}

/// Dense table mapping ids `0..len` to covariate vectors of a common width.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    dim: usize,
    data: Vec<f64>,
}

impl CovariateTable {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(Error::dim("zero-width covariate table with data"));
            }
        } else if !data.len().is_multiple_of(dim) {
            return Err(Error::dim(format!(
                "covariate buffer of length {} is not a multiple of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::dim("ragged covariate rows"));
        }
        Self::new(dim, rows.concat())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        (id < self.len()).then(|| self.row(id))
    }

    /// Row-major `len x dim` buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.dim).map(|c| format!("c{c}")));
        out.write_record(&header)?;
        for (id, row) in self.rows().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(row.iter().map(|v| format_f64(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a covariate file. Ids must cover `0..N` exactly once, in any order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::Format("covariate header must start with `id`".into()));
        }
        let dim = header.len() - 1;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Format(format!(
                    "covariate row has {} fields, header has {}",
                    rec.len(),
                    dim + 1
                )));
            }
            let id = parse_field::<usize>(&rec[0], "id")?;
            let vals = (1..=dim)
                .map(|c| parse_field::<f64>(&rec[c], "covariate"))
                .collect::<Result<Vec<_>>>()?;
            rows.push((id, vals));
        }
        rows.sort_by_key(|(id, _)| *id);
        for (expect, (id, _)) in rows.iter().enumerate() {
            if *id != expect {
                return Err(Error::Format(format!(
                    "covariate ids must be 0..N without gaps or repeats (found {id}, expected {expect})"
                )));
            }
        }
        let data: Vec<f64> = rows.into_iter().flat_map(|(_, v)| v).collect();
        Self::new(dim, data)
    }
}

/// A set of observed ratings together with shared covariate tables.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    ratings: Vec<Rating>,
    users: Arc<CovariateTable>,
    items: Arc<CovariateTable>,
}

impl ObservationSet {
    /// Validates that every rated pair has covariates and no pair repeats.
    pub fn new(ratings: Vec<Rating>, users: Arc<CovariateTable>, items: Arc<CovariateTable>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ratings.len());
        for r in &ratings {
            if r.user >= users.len() {
                return Err(Error::invariant(
                    "covariates_present",
                    format!("user {} has no covariate row", r.user),
                ));
            }
            if r.item >= items.len() {
                return Err(Error::invariant(
                    "covariates_present",
                    format!("item {} has no covariate row", r.item),
                ));
            }
            if !r.value.is_finite() {
                return Err(Error::invariant("finite_ratings", "rating is NaN or Inf"));
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::invariant(
                    "unique_pairs",
                    format!("pair ({}, {}) appears twice", r.user, r.item),
                ));
            }
        }
        Ok(Self { ratings, users, items })
    }

    /// Same covariate tables, different ratings. The ratings must come from
    /// a set already validated against these tables.
    pub(crate) fn with_ratings(&self, ratings: Vec<Rating>) -> Self {
        Self {
            ratings,
            users: Arc::clone(&self.users),
            items: Arc::clone(&self.items),
        }
    }

    #[inline]
    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn user_covariates(&self) -> &CovariateTable {
        &self.users
    }

    pub fn item_covariates(&self) -> &CovariateTable {
        &self.items
    }

    pub fn shared_user_covariates(&self) -> Arc<CovariateTable> {
        Arc::clone(&self.users)
    }

    pub fn shared_item_covariates(&self) -> Arc<CovariateTable> {
        Arc::clone(&self.items)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn write_ratings_csv<W: Write>(&self, w: W) -> Result<()> {
        write_ratings_csv(&self.ratings, w)
    }

    /// Loads the three files of an observation set.
    pub fn load(ratings: &Path, users: &Path, items: &Path) -> Result<Self> {
        let r = read_ratings_csv(std::fs::File::open(ratings)?)?;
        let u = CovariateTable::read_csv(std::fs::File::open(users)?)?;
        let i = CovariateTable::read_csv(std::fs::File::open(items)?)?;
        Self::new(r, Arc::new(u), Arc::new(i))
    }
}

pub fn write_ratings_csv<W: Write>(ratings: &[Rating], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["user_id", "item_id", "rating"])?;
    for r in ratings {
        out.write_record([r.user.to_string(), r.item.to_string(), format_f64(r.value)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ratings_csv<R: Read>(r: R) -> Result<Vec<Rating>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["user_id", "item_id", "rating"] {
        return Err(Error::Format("ratings header must be `user_id,item_id,rating`".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Format(format!("ratings row has {} fields", rec.len())));
            }
            Ok(Rating::new(
                parse_field(&rec[0], "user_id")?,
                parse_field(&rec[1], "item_id")?,
                parse_field(&rec[2], "rating")?,
            ))
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from `{s}`")))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}
