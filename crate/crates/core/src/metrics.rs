//! Mean-variance values, regret and information-gain bookkeeping, and
//! cross-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::algorithms::RunResult;
use crate::benchmarks::Benchmark;
use crate::config::ReportRule;
use crate::error::{input, Result};

/// One acquisition round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub round: usize,
    pub x: Vec<f64>,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub mv_true: f64,
    pub r_inst: f64,
    pub r_cum: f64,
    pub r_cum_per_sample: f64,
    pub info_gain_f: f64,
    pub info_gain_var: f64,
    pub beta_used: f64,
    pub beta_var_used: f64,
}

/// `f(x) - alpha rho^2(x)`.
pub fn mv_value(bench: &Benchmark, alpha: f64, x: &[f64]) -> Result<f64> {
    Ok(bench.mean(x)? - alpha * bench.variance(x)?)
}

/// Regret reference point for one benchmark and `alpha`: the best MV over the
/// dense grid, the analytic optima and any extra points (the candidate grid).
#[derive(Debug, Clone)]
pub struct RegretOracle {
    pub alpha: f64,
    pub mv_star: f64,
}

impl RegretOracle {
    pub fn new(bench: &Benchmark, alpha: f64, extra: &[Vec<f64>]) -> Self {
        let mut mv_star = bench.mv_optimum(alpha);
        for p in extra {
            mv_star = mv_star.max(bench.mv_unchecked(alpha, p));
        }
        RegretOracle { alpha, mv_star }
    }

    /// `MV(x*) - MV(x)`, clamped at zero.
    pub fn regret(&self, bench: &Benchmark, x: &[f64]) -> Result<f64> {
        Ok((self.mv_star - mv_value(bench, self.alpha, x)?).max(0.0))
    }
}

pub fn instantaneous_regret(bench: &Benchmark, alpha: f64, x: &[f64]) -> Result<f64> {
    RegretOracle::new(bench, alpha, &[]).regret(bench, x)
}

/// Same formula as [`instantaneous_regret`], applied to a reported point.
pub fn simple_regret(bench: &Benchmark, alpha: f64, reported: &[f64]) -> Result<f64> {
    instantaneous_regret(bench, alpha, reported)
}

/// `1/2 ln(1 + sigma^2 / noise)`.
pub fn info_gain_step(sigma_prev_sq: f64, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return input(format!("noise variance must be > 0, got {noise_var}"));
    }
    if !(sigma_prev_sq >= 0.0) {
        return input(format!("posterior variance must be >= 0, got {sigma_prev_sq}"));
    }
    Ok(0.5 * (sigma_prev_sq / noise_var).ln_1p())
}

/// Mean, standard error and `mean +- 2 SE` band of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Standard error uses the `n - 1` sample deviation; a single value has SE 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Band {
            mean,
            se,
            lo: mean - 2.0 * se,
            hi: mean + 2.0 * se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub r_cum: Band,
    /// Indexed like [`ReportRule::ALL`].
    pub simple: [Band; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn final_row(&self) -> &SummaryRow {
        self.rows.last().expect("summary has at least one round")
    }

    pub fn simple(&self, rule: ReportRule) -> Band {
        self.final_row().simple[rule.index()]
    }
}

/// Per-round statistics across runs of equal length.
pub fn aggregate(results: &[RunResult]) -> Result<Summary> {
    let Some(first) = results.first() else {
        return input("aggregate needs at least one run");
    };
    let t = first.trace.len();
    if let Some(bad) = results.iter().find(|r| r.trace.len() != t) {
        return input(format!(
            "runs have different lengths: {} vs {} (seed {})",
            t,
            bad.trace.len(),
            bad.seed
        ));
    }
    let rows = (0..t)
        .map(|i| {
            let r_cum: Vec<f64> = results.iter().map(|r| r.trace[i].r_cum).collect();
            let simple = std::array::from_fn(|j| {
                let v: Vec<f64> = results.iter().map(|r| r.simple_regret[i][j]).collect();
                Band::of(&v)
            });
            SummaryRow {
                round: i + 1,
                r_cum: Band::of(&r_cum),
                simple,
            }
        })
        .collect();
    Ok(Summary {
        runs: results.len(),
        rows,
    })
}
