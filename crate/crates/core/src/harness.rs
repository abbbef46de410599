//! Runs configured experiments across seeds and writes CSV and JSON
//! artifacts; compares finished runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{self, RunResult};
use crate::config::{ExperimentConfig, ReportRule};
use crate::error::{input, Error, Result};
use crate::metrics::{aggregate, Band, RegretTrace, Summary};

pub const TRACE_PREFIX: &str = "trace_seed_";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const COMPARISON_TABLE_FILE: &str = "comparison.txt";
pub const HISTOGRAM_FILE: &str = "variance_histogram.csv";
pub const HISTOGRAM_BINS: usize = 20;

/// Real number with 17 significant digits; round-trips exactly.
pub fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

pub fn trace_header(dim: usize) -> String {
    let mut cols = vec!["round".to_string()];
    cols.extend((0..dim).map(|i| format!("x_{i}")));
    cols.extend(
        [
            "sample_mean",
            "sample_var",
            "mv_true",
            "r_inst",
            "r_cum",
            "r_cum_per_sample",
            "info_gain_f",
            "info_gain_var",
            "beta_used",
            "beta_var_used",
        ]
        .map(String::from),
    );
    cols.join(",")
}

pub fn trace_csv(trace: &[RegretTrace], dim: usize) -> String {
    let mut out = trace_header(dim);
    out.push('\n');
    for row in trace {
        let mut fields = vec![row.round.to_string()];
        fields.extend(row.x.iter().map(|v| fmt_real(*v)));
        fields.extend(
            [
                row.sample_mean,
                row.sample_var,
                row.mv_true,
                row.r_inst,
                row.r_cum,
                row.r_cum_per_sample,
                row.info_gain_f,
                row.info_gain_var,
                row.beta_used,
                row.beta_var_used,
            ]
            .map(fmt_real),
        );
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses a trace CSV written by [`trace_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<RegretTrace>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let dim = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.len() != dim + 11 || header[0] != "round" {
        return input(format!("unexpected trace header: {}", header.join(",")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Input(format!("bad number {s:?} in trace: {e}")))
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != header.len() {
                return input(format!("trace row has {} fields, expected {}", f.len(), header.len()));
            }
            let round = f[0]
                .parse::<usize>()
                .map_err(|e| Error::Input(format!("bad round {:?}: {e}", f[0])))?;
            let x = f[1..=dim].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let v = f[dim + 1..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            Ok(RegretTrace {
                round,
                x,
                sample_mean: v[0],
                sample_var: v[1],
                mv_true: v[2],
                r_inst: v[3],
                r_cum: v[4],
                r_cum_per_sample: v[5],
                info_gain_f: v[6],
                info_gain_var: v[7],
                beta_used: v[8],
                beta_var_used: v[9],
            })
        })
        .collect()
}

fn push_band(fields: &mut Vec<String>, b: &Band) {
    fields.extend([b.mean, b.se, b.lo, b.hi].map(fmt_real));
}

fn band_header(cols: &mut Vec<String>, name: &str) {
    cols.extend(["mean", "se", "lo", "hi"].map(|s| format!("{name}_{s}")));
}

pub fn aggregate_csv(summary: &Summary) -> String {
    let mut cols = vec!["round".to_string()];
    band_header(&mut cols, "r_cum");
    for rule in ReportRule::ALL {
        band_header(&mut cols, &format!("simple_{}", rule.as_str()));
    }
    let mut out = cols.join(",");
    out.push('\n');
    for row in &summary.rows {
        let mut fields = vec![row.round.to_string()];
        push_band(&mut fields, &row.r_cum);
        for b in &row.simple {
            push_band(&mut fields, b);
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Per-seed record kept in the metadata file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub trace_file: String,
    pub reported_point: Vec<f64>,
    pub reports: Vec<algorithms::ReportedPoint>,
    /// True noise variance at every acquired point, in round order.
    pub acquired_rho_sq: Vec<f64>,
    pub info_gain_true_noise: f64,
    /// Simple regret after each round, one column per report rule.
    pub simple_regret: Vec<[f64; 4]>,
    pub kernel_f: crate::kernel::KernelSpec,
    pub kernel_var: crate::kernel::KernelSpec,
    pub mv_star: f64,
    pub sampler_calls: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub toolkit_version: String,
    pub wall_time_secs: f64,
    pub dim: usize,
    pub candidate_grid: usize,
    pub seeds: Vec<SeedRecord>,
}

impl Metadata {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(METADATA_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Results and output location of [`run_experiment`].
#[derive(Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub results: Vec<RunResult>,
    pub summary: Summary,
}

/// Runs every seed of `config` (seeds in parallel on `threads` workers),
/// writing `trace_seed_<s>.csv`, `aggregate.csv` and `metadata.json` into
/// `config.output_dir`. CSV output does not depend on `threads`.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let cfg = config.normalized()?;
    let bench = cfg.bench()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunResult>> = pool.install(|| {
        use rayon::prelude::*;
        cfg.seeds
            .par_iter()
            .map(|&s| algorithms::run(&cfg, &bench, s))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&results)?;

    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir)?;
    let dim = bench.dim();
    let mut seeds = Vec::with_capacity(results.len());
    for r in &results {
        let name = format!("{TRACE_PREFIX}{}.csv", r.seed);
        fs::write(dir.join(&name), trace_csv(&r.trace, dim))?;
        seeds.push(SeedRecord {
            seed: r.seed,
            trace_file: name,
            reported_point: r.reported_point.clone(),
            reports: r.reports.clone(),
            acquired_rho_sq: r.trace.iter().map(|t| (bench.rho_sq)(&t.x)).collect(),
            info_gain_true_noise: r.info_gain_true_noise,
            simple_regret: r.simple_regret.clone(),
            kernel_f: r.kernel_f.clone(),
            kernel_var: r.kernel_var.clone(),
            mv_star: r.mv_star,
            sampler_calls: r.sampler_calls,
        });
    }
    fs::write(dir.join(AGGREGATE_FILE), aggregate_csv(&summary))?;
    let meta = Metadata {
        config_hash: cfg.config_hash()?,
        candidate_grid: cfg.candidate_size(),
        config: cfg,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        dim,
        seeds,
    };
    fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(ExperimentOutput {
        dir,
        results,
        summary,
    })
}

/// Quantity compared across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMetric {
    CumulativeRegret,
    SimpleRegret,
}

impl CompareMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompareMetric::CumulativeRegret => "cumulative_regret",
            CompareMetric::SimpleRegret => "simple_regret",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cumulative_regret" | "cumulative" => Ok(CompareMetric::CumulativeRegret),
            "simple_regret" | "simple" => Ok(CompareMetric::SimpleRegret),
            _ => input(format!(
                "unknown metric {s:?}; expected cumulative_regret or simple_regret"
            )),
        }
    }
}

/// A finished run loaded back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub meta: Metadata,
    pub traces: Vec<Vec<RegretTrace>>,
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let meta = Metadata::load(dir)?;
        let traces = meta
            .seeds
            .iter()
            .map(|s| parse_trace_csv(&fs::read_to_string(dir.join(&s.trace_file))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedRun {
            dir: dir.to_path_buf(),
            meta,
            traces,
        })
    }

    pub fn label(&self) -> String {
        self.meta.config.algorithm.to_string()
    }

    /// Per-round band of `metric` across seeds.
    pub fn bands(&self, metric: CompareMetric) -> Vec<Band> {
        let t = self.meta.config.rounds;
        (0..t)
            .map(|i| {
                let v: Vec<f64> = match metric {
                    CompareMetric::CumulativeRegret => self.traces.iter().map(|tr| tr[i].r_cum).collect(),
                    CompareMetric::SimpleRegret => self.simple_at(i),
                };
                Band::of(&v)
            })
            .collect()
    }

    /// Simple regret of the configured report rule after round `i + 1`.
    fn simple_at(&self, i: usize) -> Vec<f64> {
        let rule = self.meta.config.report_rule.index();
        self.meta.seeds.iter().map(|s| s.simple_regret[i][rule]).collect()
    }
}

/// Fields that must agree for runs to be comparable.
fn mismatches(a: &LoadedRun, b: &LoadedRun) -> Vec<String> {
    let (ca, cb) = (&a.meta.config, &b.meta.config);
    let mut out = Vec::new();
    if ca.benchmark != cb.benchmark {
        out.push(format!("benchmark: {} vs {}", ca.benchmark, cb.benchmark));
    }
    if ca.alpha != cb.alpha {
        out.push(format!("alpha: {} vs {}", ca.alpha, cb.alpha));
    }
    if ca.rounds != cb.rounds {
        out.push(format!("T: {} vs {}", ca.rounds, cb.rounds));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub csv: String,
    pub table: String,
    pub histogram_csv: String,
}

/// Side-by-side bands of `metric` per run, difference columns against the
/// first run, and the histogram of true noise variance at acquired points.
/// Writes the three artifacts into `out_dir` when given.
pub fn compare(run_dirs: &[PathBuf], metric: CompareMetric, out_dir: Option<&Path>) -> Result<Comparison> {
    if run_dirs.is_empty() {
        return input("compare needs at least one run directory");
    }
    let runs = run_dirs
        .iter()
        .map(|d| LoadedRun::load(d))
        .collect::<Result<Vec<_>>>()?;
    let mut problems = Vec::new();
    for r in &runs[1..] {
        for m in mismatches(&runs[0], r) {
            problems.push(format!("{}: {m}", r.dir.display()));
        }
    }
    if !problems.is_empty() {
        return input(format!("incompatible runs: {}", problems.join("; ")));
    }

    let labels = unique_labels(&runs);
    let bands: Vec<Vec<Band>> = runs.iter().map(|r| r.bands(metric)).collect();
    let t = runs[0].meta.config.rounds;

    let mut cols = vec!["round".to_string()];
    for l in &labels {
        band_header(&mut cols, l);
    }
    for l in &labels[1..] {
        cols.push(format!("diff_{l}_vs_{}", labels[0]));
    }
    let mut csv = cols.join(",");
    csv.push('\n');
    for i in 0..t {
        let mut f = vec![(i + 1).to_string()];
        for b in &bands {
            push_band(&mut f, &b[i]);
        }
        for b in &bands[1..] {
            f.push(fmt_real(b[i].mean - bands[0][i].mean));
        }
        csv.push_str(&f.join(","));
        csv.push('\n');
    }

    let mut table = String::new();
    let _ = writeln!(
        table,
        "{} on {} (alpha = {}, T = {})",
        metric.as_str(),
        runs[0].meta.config.benchmark,
        runs[0].meta.config.alpha,
        t
    );
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(table, "{:<width$}  {:>6}  {:>14}  {:>12}", "algorithm", "seeds", "mean", "2SE");
    for (l, (r, b)) in labels.iter().zip(runs.iter().zip(&bands)) {
        let last = b[t - 1];
        let _ = writeln!(
            table,
            "{:<width$}  {:>6}  {:>14.6}  {:>12.6}",
            l,
            r.meta.seeds.len(),
            last.mean,
            2.0 * last.se
        );
    }

    let histogram_csv = variance_histogram(&runs, &labels)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(COMPARISON_FILE), &csv)?;
        fs::write(dir.join(COMPARISON_TABLE_FILE), &table)?;
        fs::write(dir.join(HISTOGRAM_FILE), &histogram_csv)?;
    }
    Ok(Comparison {
        csv,
        table,
        histogram_csv,
    })
}

fn unique_labels(runs: &[LoadedRun]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(runs.len());
    for r in runs {
        let base = r.label();
        let mut name = base.clone();
        let mut n = 2;
        while labels.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        labels.push(name);
    }
    labels
}

/// Counts of true `rho^2(x_t)` over all rounds and seeds, binned evenly over
/// `[var_lo, var_hi]` of the first run; out-of-range values go to the end bins.
fn variance_histogram(runs: &[LoadedRun], labels: &[String]) -> Result<String> {
    let (lo, hi) = runs[0].meta.config.variance_bounds();
    if !(hi > lo) {
        return input(format!("empty variance range [{lo}, {hi}]"));
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let counts: Vec<Vec<u64>> = runs
        .iter()
        .map(|r| {
            let mut c = vec![0u64; HISTOGRAM_BINS];
            for s in &r.meta.seeds {
                for v in &s.acquired_rho_sq {
                    let b = ((v - lo) / width).floor().clamp(0.0, (HISTOGRAM_BINS - 1) as f64);
                    c[b as usize] += 1;
                }
            }
            c
        })
        .collect();
    let mut out = String::from("bin,rho_sq_lo,rho_sq_hi");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for b in 0..HISTOGRAM_BINS {
        let mut f = vec![
            b.to_string(),
            fmt_real(lo + b as f64 * width),
            fmt_real(lo + (b + 1) as f64 * width),
        ];
        f.extend(counts.iter().map(|c| c[b].to_string()));
        out.push_str(&f.join(","));
        out.push('\n');
    }
    Ok(out)
}
