//! Aggregated error statistics and their CSV/JSON forms.

use super::config::{ExperimentConfig, Method};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Which relative error a row summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Std,
    Rms,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Mean, Stat::Std, Stat::Rms];

    pub fn name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Std => "std",
            Stat::Rms => "rms",
        }
    }
}

/// Errors of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub rep: usize,
    pub method: Method,
    pub seed: u64,
    pub epsilon: f64,
    pub converged: bool,
    pub rel_err_mean: f64,
    pub rel_err_std: f64,
    pub rel_rms: f64,
}

impl ReplicateRecord {
    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Mean => self.rel_err_mean,
            Stat::Std => self.rel_err_std,
            Stat::Rms => self.rel_rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub n: usize,
    pub rep: usize,
    pub method: Method,
    pub seed: u64,
    pub message: String,
}

/// Average and 10th/90th percentiles of one statistic across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub method: Method,
    pub stat: Stat,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
    pub replicates: Vec<ReplicateRecord>,
    pub failures: Vec<FailureRecord>,
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + t * (sorted[i + 1] - sorted[i])
    }
}

impl ErrorReport {
    /// Builds the per-(N, method, stat) rows. Records are sorted by
    /// `(N, method, rep)` first so the result does not depend on their order.
    /// Groups without a single success produce no row.
    pub fn aggregate(
        cfg: &ExperimentConfig,
        mut replicates: Vec<ReplicateRecord>,
        mut failures: Vec<FailureRecord>,
    ) -> Self {
        replicates.sort_by_key(|r| (r.n, r.method, r.rep));
        failures.sort_by_key(|f| (f.n, f.method, f.rep));
        let mut rows = Vec::new();
        for &n in &cfg.n_list {
            for &method in &cfg.methods {
                let group: Vec<&ReplicateRecord> = replicates
                    .iter()
                    .filter(|r| r.n == n && r.method == method)
                    .collect();
                let failed = failures
                    .iter()
                    .filter(|f| f.n == n && f.method == method)
                    .count();
                if group.is_empty() {
                    continue;
                }
                for stat in Stat::ALL {
                    let mut v: Vec<f64> = group.iter().map(|r| r.get(stat)).collect();
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    v.sort_by(f64::total_cmp);
                    rows.push(ReportRow {
                        n,
                        method,
                        stat,
                        mean,
                        lo: percentile(&v, 0.1),
                        hi: percentile(&v, 0.9),
                        count: v.len(),
                        failures: failed,
                    });
                }
            }
        }
        Self {
            config_hash: cfg.hash(),
            rows,
            replicates,
            failures,
        }
    }

    pub fn row(&self, n: usize, method: Method, stat: Stat) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.method == method && r.stat == stat)
    }

    /// Per-replication values of one statistic, in replication order.
    pub fn values(&self, n: usize, method: Method, stat: Stat) -> Vec<(usize, f64)> {
        self.replicates
            .iter()
            .filter(|r| r.n == n && r.method == method)
            .map(|r| (r.rep, r.get(stat)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "method", "stat", "mean", "lo", "hi"])?;
        for r in &self.rows {
            wr.write_record([
                r.n.to_string(),
                r.method.name().to_string(),
                r.stat.name().to_string(),
                format!("{:.16e}", r.mean),
                format!("{:.16e}", r.lo),
                format!("{:.16e}", r.hi),
            ])?;
        }
        wr.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes the report to `path`.
pub fn emit(report: &ErrorReport, path: &Path, format: ReportFormat) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    match format {
        ReportFormat::Csv => report.write_csv(&mut w)?,
        ReportFormat::Json => w
            .write_all(report.to_json()?.as_bytes())
            .map_err(|e| Error::io(path, e))?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}
