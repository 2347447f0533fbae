use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, dgp_sample, ratio_statistic, select_lambda_ic, RatioScale, DEFAULT_LAMBDA_COEFS};
use crate::error::{Error, Result};
use crate::estimators::LassoOptions;

/// One `(n, p, s₀)` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    pub reps: usize,
    pub seed: u64,
    pub lambda_coefs: Vec<f64>,
    #[serde(default)]
    pub ratio_scale: RatioScale,
}

impl SimCell {
    pub fn validate(&self) -> Result<()> {
        if self.s0 == 0 || self.s0 > self.p {
            return Err(Error::InvalidArgument(format!("cell needs 0 < s0 <= p, got s0 = {}, p = {}", self.s0, self.p)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("cell needs reps >= 1".into()));
        }
        if self.p < 3 {
            return Err(Error::InvalidArgument(format!("log log p needs p >= 3, got {}", self.p)));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("cell needs n >= 2, got {}", self.n)));
        }
        if self.lambda_coefs.is_empty() {
            return Err(Error::InvalidArgument("cell has an empty lambda grid".into()));
        }
        Ok(())
    }

    /// Seed of replication `rep`; independent of scheduling.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &[self.n as u64, self.p as u64, self.s0 as u64, rep as u64])
    }
}

/// Cell entry in a simulation config; unset fields fall back to the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_coefs() -> Vec<f64> {
    DEFAULT_LAMBDA_COEFS.to_vec()
}

fn default_reps() -> usize {
    1000
}

/// JSON simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Master seed; the CLI falls back to `HD_DELTA_SEED` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_coefs")]
    pub lambda_coefs: Vec<f64>,
    #[serde(default)]
    pub ratio_scale: RatioScale,
    #[serde(default)]
    pub keep_ratios: bool,
    pub cells: Vec<CellSpec>,
}

impl SimConfig {
    /// The 24 cells `n ∈ {100,200,300} × s₀ ∈ {5,10} × p ∈ {50,100,200,300}`.
    pub fn table1(seed: u64, reps: usize) -> Self {
        let mut cells = Vec::new();
        for s0 in [5, 10] {
            for n in [100, 200, 300] {
                for p in [50, 100, 200, 300] {
                    cells.push(CellSpec { n, p, s0, reps: None, seed: None });
                }
            }
        }
        SimConfig {
            seed: Some(seed),
            reps,
            lambda_coefs: default_coefs(),
            ratio_scale: RatioScale::Printed,
            keep_ratios: false,
            cells,
        }
    }

    pub fn cells(&self) -> Result<Vec<SimCell>> {
        if self.cells.is_empty() {
            return Err(Error::InvalidArgument("config lists no cells".into()));
        }
        let seed = self
            .seed
            .ok_or_else(|| Error::InvalidArgument("config has no seed".into()))?;
        self.cells
            .iter()
            .map(|c| {
                let cell = SimCell {
                    n: c.n,
                    p: c.p,
                    s0: c.s0,
                    reps: c.reps.unwrap_or(self.reps),
                    seed: c.seed.unwrap_or(seed),
                    lambda_coefs: self.lambda_coefs.clone(),
                    ratio_scale: self.ratio_scale,
                };
                cell.validate()?;
                Ok(cell)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub cell: SimCell,
    pub mean_ratio: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_sd: f64,
    pub used_reps: usize,
    /// Replications with `D(β̂ − β₀) = 0`, left out of the mean.
    pub excluded_reps: usize,
    /// Replications whose ratio fell below the scale factor.
    pub ratio_violations: usize,
    pub nonconverged_fits: usize,
    pub mean_selected_c: f64,
    pub mean_support_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_rep_ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTable {
    pub results: Vec<SimResult>,
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    ratio: Option<f64>,
    c_star: f64,
    support: usize,
    nonconverged: usize,
}

fn run_rep(cell: &SimCell, rep: usize, opts: &LassoOptions) -> Result<RepOutcome> {
    let data = dgp_sample(cell.n, cell.p, cell.s0, cell.rep_seed(rep))?;
    let sel = select_lambda_ic(&data, &cell.lambda_coefs, opts)?;
    let beta0 = data.beta_true().expect("dgp sets beta_true");
    Ok(RepOutcome {
        ratio: ratio_statistic(&sel.estimate.beta_hat, beta0, cell.s0, cell.ratio_scale)?,
        c_star: sel.c_star,
        support: sel.estimate.support_size(),
        nonconverged: sel.path.iter().filter(|p| !p.converged).count(),
    })
}

fn summarize(cell: &SimCell, reps: &[RepOutcome], keep_ratios: bool) -> SimResult {
    let ratios: Vec<f64> = reps.iter().filter_map(|r| r.ratio).collect();
    let used = ratios.len();
    let mean = if used > 0 { ratios.iter().sum::<f64>() / used as f64 } else { f64::NAN };
    let sd = if used > 1 {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    let floor = cell.ratio_scale.factor(cell.s0);
    let count = reps.len() as f64;
    SimResult {
        cell: cell.clone(),
        mean_ratio: mean,
        ratio_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        ratio_max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ratio_sd: sd,
        used_reps: used,
        excluded_reps: reps.len() - used,
        ratio_violations: ratios.iter().filter(|r| **r < floor).count(),
        nonconverged_fits: reps.iter().map(|r| r.nonconverged).sum(),
        mean_selected_c: reps.iter().map(|r| r.c_star).sum::<f64>() / count,
        mean_support_size: reps.iter().map(|r| r.support as f64).sum::<f64>() / count,
        per_rep_ratios: keep_ratios.then_some(ratios),
    }
}

/// Runs every replication of every cell on the current rayon pool.
///
/// Replications are seeded from `(seed, n, p, s₀, rep)` and reduced in
/// replication order, so the table does not depend on the thread count.
pub fn run_table1(cells: &[SimCell], keep_ratios: bool) -> Result<SimTable> {
    for c in cells {
        c.validate()?;
    }
    let opts = LassoOptions::default();
    let jobs: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.reps).map(move |r| (ci, r)))
        .collect();
    let outcomes: Vec<Result<RepOutcome>> = jobs
        .par_iter()
        .map(|&(ci, rep)| run_rep(&cells[ci], rep, &opts))
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    let mut it = outcomes.into_iter();
    for cell in cells {
        let reps: Vec<RepOutcome> = it.by_ref().take(cell.reps).collect::<Result<_>>()?;
        results.push(summarize(cell, &reps, keep_ratios));
    }
    Ok(SimTable { results })
}

/// [`run_table1`] on a dedicated pool; `Some(1)` runs sequentially.
pub fn run_table1_with_threads(cells: &[SimCell], threads: Option<usize>, keep_ratios: bool) -> Result<SimTable> {
    match threads {
        None => run_table1(cells, keep_ratios),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| run_table1(cells, keep_ratios))
        }
    }
}

impl SimTable {
    pub fn get(&self, n: usize, s0: usize, p: usize) -> Option<&SimResult> {
        self.results.iter().find(|r| r.cell.n == n && r.cell.s0 == s0 && r.cell.p == p)
    }

    /// Table layout: one row per `(n, s₀)` in order of appearance, one
    /// column per `p` ascending, mean ratios to four decimals.
    pub fn to_csv(&self) -> String {
        let ps: BTreeSet<usize> = self.results.iter().map(|r| r.cell.p).collect();
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for r in &self.results {
            if !rows.contains(&(r.cell.n, r.cell.s0)) {
                rows.push((r.cell.n, r.cell.s0));
            }
        }
        let mut out = String::from("n,s0");
        for p in &ps {
            let _ = write!(out, ",p={p}");
        }
        out.push('\n');
        for (n, s0) in rows {
            let _ = write!(out, "{n},{s0}");
            for &p in &ps {
                match self.get(n, s0, p) {
                    Some(r) => {
                        let _ = write!(out, ",{:.4}", r.mean_ratio);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// `(n, p_small, p_large)` for adjacent columns of a row where the mean
    /// ratio rises with `p`.
    pub fn increases_in_p(&self, s0: usize) -> Vec<(usize, usize, usize)> {
        let ns: BTreeSet<usize> = self.results.iter().filter(|r| r.cell.s0 == s0).map(|r| r.cell.n).collect();
        let mut out = Vec::new();
        for n in ns {
            let mut row: Vec<&SimResult> = self.results.iter().filter(|r| r.cell.s0 == s0 && r.cell.n == n).collect();
            row.sort_by_key(|r| r.cell.p);
            for w in row.windows(2) {
                if w[1].mean_ratio > w[0].mean_ratio {
                    out.push((n, w[0].cell.p, w[1].cell.p));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cells() -> Vec<SimCell> {
        let mut cfg = SimConfig::table1(5, 6);
        cfg.cells.retain(|c| c.p <= 100 && c.n == 100);
        cfg.cells().unwrap()
    }

    #[test]
    fn table1_grid() {
        let cfg = SimConfig::table1(1, 1000);
        let cells = cfg.cells().unwrap();
        assert_eq!(cells.len(), 24);
        assert!(cells.iter().all(|c| c.reps == 1000 && c.lambda_coefs.len() == 13));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SimConfig = serde_json::from_str(r#"{"seed": 3, "cells": [{"n": 50, "p": 10, "s0": 2, "reps": 4}]}"#).unwrap();
        let cells = cfg.cells().unwrap();
        assert_eq!(cells[0].reps, 4);
        assert_eq!(cells[0].seed, 3);
        let unseeded: SimConfig = serde_json::from_str(r#"{"cells": [{"n": 50, "p": 10, "s0": 2}]}"#).unwrap();
        assert!(unseeded.cells().is_err());
        assert_eq!(cells[0].lambda_coefs, DEFAULT_LAMBDA_COEFS.to_vec());
        assert_eq!(cells[0].ratio_scale, RatioScale::Printed);

        let bad: SimConfig = serde_json::from_str(r#"{"seed": 3, "cells": [{"n": 50, "p": 10, "s0": 20}]}"#).unwrap();
        assert!(bad.cells().is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cells = small_cells();
        let a = run_table1_with_threads(&cells, Some(1), true).unwrap();
        let b = run_table1_with_threads(&cells, Some(4), true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        for r in &a.results {
            assert_eq!(r.ratio_violations, 0);
            assert!(r.ratio_min >= r.cell.s0 as f64);
            assert_eq!(r.used_reps + r.excluded_reps, r.cell.reps);
        }
    }

    #[test]
    fn csv_layout() {
        let table = run_table1_with_threads(&small_cells(), None, false).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,s0,p=50,p=100");
        assert!(lines[1].starts_with("100,5,"));
        assert!(lines[2].starts_with("100,10,"));
        assert_eq!(lines.len(), 3);
    }
}
