use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, Scenario};
use crate::data::format_f64;
use crate::error::Result;

/// Outcome of one method on one replication of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub method: Method,
    pub replication: usize,
    pub rmse: Option<f64>,
    /// Selected penalty, cluster count or neighbourhood size.
    pub hyper: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub method: Method,
    /// `NaN` when every replication failed.
    pub rmse_mean: f64,
    /// Sample standard deviation over `sqrt(replications)`; 0 for a single run.
    pub rmse_se: f64,
    /// Replications that produced an RMSE.
    pub replications: usize,
    pub failures: usize,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.replications == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: &str = "scenario_n,scenario_m,d,method,rmse_mean,rmse_se,replications";

impl ResultTable {
    /// One row per requested `(scenario, method)`, in config order.
    pub fn aggregate(config: &ExperimentConfig, records: &[RunRecord]) -> Self {
        let mut by_cell: BTreeMap<(Scenario, Method), Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            by_cell.entry((r.scenario, r.method)).or_default().push(r);
        }
        let mut rows = Vec::new();
        for s in config.scenarios() {
            for &m in &config.methods {
                let cell = by_cell.get(&(s, m)).map(Vec::as_slice).unwrap_or(&[]);
                let mut ok: Vec<(usize, f64)> =
                    cell.iter().filter_map(|r| r.rmse.map(|v| (r.replication, v))).collect();
                ok.sort_by_key(|t| t.0);
                let values: Vec<f64> = ok.into_iter().map(|t| t.1).collect();
                let (mean, se) = mean_se(&values);
                rows.push(ResultRow {
                    scenario: s,
                    method: m,
                    rmse_mean: mean,
                    rmse_se: se,
                    replications: values.len(),
                    failures: cell.len().max(config.replications) - values.len(),
                });
            }
        }
        Self { rows }
    }

    pub fn get(&self, scenario: Scenario, method: Method) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER.split(','))?;
        for r in &self.rows {
            out.write_record([
                r.scenario.n_users.to_string(),
                r.scenario.n_items.to_string(),
                r.scenario.d.to_string(),
                r.method.name().to_string(),
                format_f64(r.rmse_mean),
                format_f64(r.rmse_se),
                r.replications.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Scenarios as rows and methods as RMSE/SE column pairs.
    pub fn to_text(&self) -> String {
        let mut methods: Vec<Method> = Vec::new();
        let mut scenarios: Vec<Scenario> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
            if !scenarios.contains(&r.scenario) {
                scenarios.push(r.scenario);
            }
        }
        let mut s = String::new();
        let _ = write!(s, "{:<18}", "(n,m),d");
        for m in &methods {
            let _ = write!(s, " | {:>9} {:>7}", m.name(), "SE");
        }
        s.push('\n');
        let _ = writeln!(s, "{}", "-".repeat(18 + methods.len() * 20));
        for sc in &scenarios {
            let _ = write!(s, "{:<18}", format!("({},{}),{}", sc.n_users, sc.n_items, sc.d));
            for &m in &methods {
                match self.get(*sc, m) {
                    Some(r) if !r.failed() => {
                        let _ = write!(s, " | {:>9.3} {:>7.3}", r.rmse_mean, r.rmse_se);
                    }
                    _ => {
                        let _ = write!(s, " | {:>9} {:>7}", "failed", "");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::SyntheticSpec;

    #[test]
    fn se_hand_value() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
    }

    #[test]
    fn aggregate_and_csv() {
        let mut cfg = ExperimentConfig::new(SyntheticSpec::desk_scale(20, 0));
        cfg.methods = vec![Method::T2rec, Method::Knn];
        cfg.replications = 2;
        let s = cfg.scenarios()[0];
        let rec = |method, replication, rmse: Option<f64>| RunRecord {
            scenario: s,
            method,
            replication,
            rmse,
            hyper: None,
            error: rmse.is_none().then(|| "E_EXPERIMENT: x".into()),
        };
        let records = vec![
            rec(Method::T2rec, 0, Some(1.0)),
            rec(Method::T2rec, 1, Some(3.0)),
            rec(Method::Knn, 0, None),
            rec(Method::Knn, 1, None),
        ];
        let t = ResultTable::aggregate(&cfg, &records);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].rmse_mean, 2.0);
        assert!((t.rows[0].rmse_se - 1.0).abs() < 1e-15);
        assert!(t.rows[1].failed());
        assert_eq!(t.rows[1].failures, 2);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "300,300,20,t2rec,2.0,1.0,2");
        assert!(t.to_text().contains("failed"));
    }
}
