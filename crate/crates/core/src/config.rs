//! JSON experiment configuration: parsing, normalization, validation and
//! canonical hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{benchmark_by_name, Benchmark, BENCHMARK_NAMES};
use crate::error::{Error, Result};
use crate::gp::BetaSchedule;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::sobol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rahbo,
    GpUcb,
    RahboKnown,
    RahboUs,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Rahbo => "rahbo",
            Algorithm::GpUcb => "gp_ucb",
            Algorithm::RahboKnown => "rahbo_known",
            Algorithm::RahboUs => "rahbo_us",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportRule {
    /// `argmax lcb^MV` over acquired points, bounds from the final models.
    LcbMv,
    /// `argmax lcb^MV_t(x_t)`, each bound taken at the round it was acquired.
    LcbMvPerRound,
    BestObserved,
    MaxEmpiricalMv,
}

impl ReportRule {
    pub const ALL: [ReportRule; 4] = [
        ReportRule::LcbMv,
        ReportRule::LcbMvPerRound,
        ReportRule::BestObserved,
        ReportRule::MaxEmpiricalMv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReportRule::LcbMv => "lcb_mv",
            ReportRule::LcbMvPerRound => "lcb_mv_per_round",
            ReportRule::BestObserved => "best_observed",
            ReportRule::MaxEmpiricalMv => "max_empirical_mv",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|r| r == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTag {
    Fit,
}

/// Either `"fit"` (marginal-likelihood search on the initial design) or an
/// explicit kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Fit(FitTag),
    Spec(KernelSpec),
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Fit(FitTag::Fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: String,
    pub algorithm: Algorithm,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(alias = "T")]
    pub rounds: usize,
    #[serde(default = "defaults::n_init")]
    pub n_init: usize,
    #[serde(default = "defaults::n_us")]
    pub n_us: usize,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub beta: BetaSchedule,
    #[serde(default)]
    pub beta_var: BetaSchedule,
    #[serde(default)]
    pub kernel_f: KernelChoice,
    #[serde(default)]
    pub kernel_var: KernelChoice,
    /// Family used when a kernel is `"fit"`.
    #[serde(default = "defaults::family")]
    pub kernel_family: KernelFamily,
    #[serde(default = "defaults::hyper_budget")]
    pub hyper_budget: usize,
    /// Refit `"fit"` kernels every this many rounds; 0 freezes them after
    /// the initial design.
    #[serde(default = "defaults::refit_every")]
    pub refit_every: usize,
    /// Defaults to `1000 * d`.
    #[serde(default)]
    pub candidate_grid: Option<usize>,
    /// `None` uses the unscrambled Sobol sequence.
    #[serde(default)]
    pub candidate_seed: Option<u64>,
    /// Default to the benchmark's known bounds.
    #[serde(default)]
    pub var_lo: Option<f64>,
    #[serde(default)]
    pub var_hi: Option<f64>,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: String,
    #[serde(default = "defaults::report_rule")]
    pub report_rule: ReportRule,
}

mod defaults {
    use super::*;
    pub fn alpha() -> f64 {
        1.0
    }
    pub fn k() -> usize {
        10
    }
    pub fn n_init() -> usize {
        10
    }
    pub fn n_us() -> usize {
        10
    }
    pub fn lambda() -> f64 {
        1.0
    }
    pub fn family() -> KernelFamily {
        KernelFamily::Matern52
    }
    pub fn hyper_budget() -> usize {
        128
    }
    pub fn refit_every() -> usize {
        10
    }
    pub fn seeds() -> Vec<u64> {
        vec![0]
    }
    pub fn output_dir() -> String {
        "runs".into()
    }
    pub fn report_rule() -> ReportRule {
        ReportRule::LcbMv
    }
}

impl ExperimentConfig {
    /// Defaults for everything except the benchmark, algorithm and rounds.
    pub fn new(benchmark: &str, algorithm: Algorithm, rounds: usize) -> Self {
        ExperimentConfig {
            benchmark: benchmark.into(),
            algorithm,
            alpha: defaults::alpha(),
            k: defaults::k(),
            rounds,
            n_init: defaults::n_init(),
            n_us: defaults::n_us(),
            lambda: defaults::lambda(),
            beta: BetaSchedule::default(),
            beta_var: BetaSchedule::default(),
            kernel_f: KernelChoice::default(),
            kernel_var: KernelChoice::default(),
            kernel_family: defaults::family(),
            hyper_budget: defaults::hyper_budget(),
            refit_every: defaults::refit_every(),
            candidate_grid: None,
            candidate_seed: None,
            var_lo: None,
            var_hi: None,
            seeds: defaults::seeds(),
            output_dir: defaults::output_dir(),
            report_rule: defaults::report_rule(),
        }
    }

    pub fn bench(&self) -> Result<Benchmark> {
        benchmark_by_name(&self.benchmark)
    }

    /// Every violated constraint, one message per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let bench = benchmark_by_name(&self.benchmark).ok();
        if bench.is_none() {
            out.push(format!(
                "benchmark: unknown {:?} (available: {})",
                self.benchmark,
                BENCHMARK_NAMES.join(", ")
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            out.push(format!("alpha: must be >= 0, got {}", self.alpha));
        }
        if self.k < 2 {
            out.push(format!(
                "k: must be >= 2 so the sample variance is defined, got {}",
                self.k
            ));
        }
        if self.rounds < 1 {
            out.push("rounds: must be >= 1".into());
        }
        if self.n_init < 1 {
            out.push("n_init: must be >= 1".into());
        }
        if self.algorithm == Algorithm::RahboUs && self.n_us > self.rounds {
            out.push(format!(
                "n_us: uncertainty-sampling budget {} exceeds rounds {}",
                self.n_us, self.rounds
            ));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            out.push(format!("lambda: must be > 0, got {}", self.lambda));
        }
        out.extend(self.beta.violations("beta"));
        out.extend(self.beta_var.violations("beta_var"));
        let dim = bench.as_ref().map(|b| b.dim());
        for (name, choice) in [("kernel_f", &self.kernel_f), ("kernel_var", &self.kernel_var)] {
            if let KernelChoice::Spec(spec) = choice {
                if let Err(e) = spec.validate() {
                    out.push(format!("{name}: {e}"));
                }
                if let Some(d) = dim {
                    if spec.dim() != d {
                        out.push(format!(
                            "{name}: {} lengthscales for a {d}-dimensional benchmark",
                            spec.dim()
                        ));
                    }
                }
            }
        }
        if self.hyper_budget < 1 {
            out.push("hyper_budget: must be >= 1".into());
        }
        if self.candidate_grid == Some(0) {
            out.push("candidate_grid: must be >= 1".into());
        }
        if let Some(d) = dim {
            if d > sobol::MAX_DIM {
                out.push(format!("benchmark: dimension {d} exceeds Sobol limit"));
            }
        }
        let lo = self.var_lo.or(bench.as_ref().map(|b| b.var_lo));
        let hi = self.var_hi.or(bench.as_ref().map(|b| b.var_hi));
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                out.push(format!(
                    "var_lo/var_hi: need 0 <= var_lo < var_hi, got [{lo}, {hi}]"
                ));
            }
        }
        if self.seeds.is_empty() {
            out.push("seeds: must be non-empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            out.push("seeds: must be distinct".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Resolves every benchmark-dependent default. Assumes a valid config.
    pub fn normalized(&self) -> Result<Self> {
        self.validate()?;
        let bench = self.bench()?;
        let mut c = self.clone();
        c.candidate_grid = Some(self.candidate_grid.unwrap_or(1000 * bench.dim()));
        c.var_lo = Some(self.var_lo.unwrap_or(bench.var_lo));
        c.var_hi = Some(self.var_hi.unwrap_or(bench.var_hi));
        Ok(c)
    }

    pub fn candidate_size(&self) -> usize {
        self.candidate_grid.unwrap_or(1000)
    }

    pub fn variance_bounds(&self) -> (f64, f64) {
        (self.var_lo.unwrap_or(0.0), self.var_hi.unwrap_or(1.0))
    }

    /// SHA-256 of the canonical JSON of the normalized config; the output
    /// directory does not take part.
    pub fn config_hash(&self) -> Result<String> {
        let mut c = self.normalized()?;
        c.output_dir.clear();
        let canonical = serde_json::to_vec(&c)?;
        let digest = Sha256::digest(&canonical);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Parses and validates JSON text, reporting every violation with the
    /// line of the offending key when it appears in the source.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(vec![format!("line {}, column {}: {e}", e.line(), e.column())])
        })?;
        let violations = cfg.violations();
        if violations.is_empty() {
            return Ok(cfg);
        }
        Err(Error::Config(
            violations
                .into_iter()
                .map(|msg| match locate_key(text, &msg) {
                    Some(line) => format!("line {line}: {msg}"),
                    None => msg,
                })
                .collect(),
        ))
    }
}

/// 1-based line of the first `"key"` in `text`, where `key` is the message
/// prefix up to the first `:` or `.`.
fn locate_key(text: &str, msg: &str) -> Option<usize> {
    let key = msg.split([':', '.', '/']).next()?.trim();
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json_str(&text)?.normalized()
}
