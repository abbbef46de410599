//! Optimization loops: RAHBO (unknown variance), GP-UCB, RAHBO with the true
//! variance, and the two-stage uncertainty-sampling baseline.
//!
//! All four share one loop. Per round:
//!
//! 1. bounds on the variance model and the objective model are formed,
//! 2. the next point maximizes the algorithm's score over the candidate grid,
//! 3. `k` samples are drawn and reduced to a sample mean and variance,
//! 4. the variance GP is refitted with the new sample variance,
//! 5. the objective noise diagonal is rebuilt from the truncated variance UCB,
//! 6. the objective GP is refitted on sample means with that diagonal.
//!
//! Objective targets are standardized with the mean and deviation of the
//! initial design's sample means; the variance model works in raw units.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{argmax_index, lower, mean_std_many, penalize, upper, CandidateSet};
use crate::benchmarks::{sample_observation, sobol_design, Benchmark};
use crate::config::{Algorithm, ExperimentConfig, KernelChoice, ReportRule};
use crate::error::{input, Error, Result};
use crate::gp::{self, beta_theoretical, fit_hyperparameters, Posterior, ScaledGp, TargetScaling};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::metrics::{info_gain_step, RegretOracle, RegretTrace};
use crate::variance::{build_hat_sigma, sample_stats, VarianceModelState};

/// Lengthscale used when there are too few initial points to fit one.
const FALLBACK_LENGTHSCALE: f64 = 0.2;

const STREAM_OBSERVATIONS: u64 = 1 << 32;
const SEED_SALT_HYPER_F: u64 = 0x5EED_F00D;
const SEED_SALT_HYPER_VAR: u64 = 0x5EED_BEEF;

/// Draws `k` noisy evaluations per call. Evaluation `i` of a run uses its
/// own ChaCha stream, so samples depend only on `(seed, i)`.
#[derive(Debug)]
pub struct ObjectiveSampler<'a> {
    bench: &'a Benchmark,
    seed: u64,
    evaluations: u64,
    calls: u64,
}

impl<'a> ObjectiveSampler<'a> {
    pub fn new(bench: &'a Benchmark, seed: u64) -> Self {
        ObjectiveSampler {
            bench,
            seed,
            evaluations: 0,
            calls: 0,
        }
    }

    pub fn sample(&mut self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(STREAM_OBSERVATIONS + self.evaluations);
        self.evaluations += 1;
        self.calls += k as u64;
        sample_observation(self.bench, x, k, &mut rng)
    }

    /// Number of single objective samples drawn so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedPoint {
    pub rule: ReportRule,
    pub x: Vec<f64>,
    /// Round (1-based) at which the point was acquired.
    pub round: usize,
    pub simple_regret: f64,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config_hash: String,
    pub trace: Vec<RegretTrace>,
    pub reported_point: Vec<f64>,
    pub reported_rule: ReportRule,
    /// Final report under every rule, indexed like [`ReportRule::ALL`].
    pub reports: Vec<ReportedPoint>,
    /// `simple_regret[t][j]`: regret of rule `j`'s report after round `t + 1`.
    pub simple_regret: Vec<[f64; 4]>,
    pub initial_design: Vec<Vec<f64>>,
    pub candidate_indices: Vec<usize>,
    pub kernel_f: KernelSpec,
    pub kernel_var: KernelSpec,
    pub scaling: TargetScaling,
    pub lambda: f64,
    pub var_lo: f64,
    pub var_hi: f64,
    pub eta_proxy: f64,
    /// Kernels behind the information-gain columns: those fitted on the
    /// initial design, kept fixed while the models are refitted.
    pub info_kernel_f: KernelSpec,
    pub info_kernel_var: KernelSpec,
    /// Noise variance (standardized units) behind `info_gain_f`: `var_hi / k / scale^2`.
    pub info_noise_f: f64,
    /// Information gain over the acquired points with the true noise
    /// `rho^2(x_t) / k / scale^2`.
    pub info_gain_true_noise: f64,
    pub mv_star: f64,
    pub sampler_calls: u64,
}

impl RunResult {
    pub fn rounds(&self) -> usize {
        self.trace.len()
    }

    pub fn report(&self, rule: ReportRule) -> &ReportedPoint {
        &self.reports[rule.index()]
    }

    pub fn final_cumulative_regret(&self) -> f64 {
        self.trace.last().map_or(0.0, |t| t.r_cum)
    }
}

/// Which variance information drives selection and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Selection {
    Ucb,
    MvUcb,
    MvKnown,
    UncertaintyThenMvMean,
}

impl Selection {
    fn of(alg: Algorithm) -> Self {
        match alg {
            Algorithm::GpUcb => Selection::Ucb,
            Algorithm::Rahbo => Selection::MvUcb,
            Algorithm::RahboKnown => Selection::MvKnown,
            Algorithm::RahboUs => Selection::UncertaintyThenMvMean,
        }
    }
}

/// Models and data needed to report a point.
pub struct ReportContext<'a, P: Posterior> {
    pub f_model: &'a P,
    pub var_model: &'a VarianceModelState,
    /// True variance at each visited point, for the known-variance variant.
    pub known_rho_sq: Option<&'a [f64]>,
    pub beta: f64,
    pub beta_var: f64,
    pub alpha: f64,
    pub visited: &'a [Vec<f64>],
    pub sample_means: &'a [f64],
    pub sample_vars: &'a [f64],
    /// `lcb^MV` of each visited point at the round it was acquired.
    pub per_round_lcb: &'a [f64],
}

/// Index into `visited` of the reported point; lowest index wins ties.
pub fn report_point<P: Posterior>(ctx: &ReportContext<'_, P>, rule: ReportRule) -> Result<usize> {
    if ctx.visited.is_empty() {
        return input("cannot report from an empty set of visited points");
    }
    let scores = match rule {
        ReportRule::LcbMv => {
            let (m, s) = mean_std_many(ctx.f_model, ctx.visited)?;
            let lcb_f = lower(&m, &s, ctx.beta);
            let risk = match ctx.known_rho_sq {
                Some(r) => r.to_vec(),
                None => {
                    let (vm, vs) = mean_std_many(&ctx.var_model.gp, ctx.visited)?;
                    upper(&vm, &vs, ctx.beta_var)
                }
            };
            penalize(&lcb_f, &risk, ctx.alpha)
        }
        ReportRule::LcbMvPerRound => ctx.per_round_lcb.to_vec(),
        ReportRule::BestObserved => ctx.sample_means.to_vec(),
        ReportRule::MaxEmpiricalMv => penalize(ctx.sample_means, ctx.sample_vars, ctx.alpha),
    };
    argmax_index(&scores)
}

fn resolve_kernel(
    choice: &KernelChoice,
    family: KernelFamily,
    dim: usize,
    x: &[Vec<f64>],
    y: &[f64],
    noise: &[f64],
    lambda: f64,
    budget: usize,
    seed: u64,
) -> Result<KernelSpec> {
    match choice {
        KernelChoice::Spec(spec) => Ok(spec.clone()),
        KernelChoice::Fit(_) if x.len() >= 2 => {
            fit_hyperparameters(family, x, y, noise, lambda, budget, seed)
        }
        KernelChoice::Fit(_) => KernelSpec::isotropic(family, dim, FALLBACK_LENGTHSCALE),
    }
}

/// Incremental information gain of a fixed-noise GP over acquired points.
struct InfoTracker {
    kernel: KernelSpec,
    lambda: f64,
    points: Vec<Vec<f64>>,
    noise: Vec<f64>,
    total: f64,
}

impl InfoTracker {
    fn new(kernel: KernelSpec, lambda: f64) -> Self {
        InfoTracker {
            kernel,
            lambda,
            points: Vec::new(),
            noise: Vec::new(),
            total: 0.0,
        }
    }

    fn add(&mut self, x: &[f64], noise: f64) -> Result<f64> {
        let zeros = vec![0.0; self.points.len()];
        let state = gp::fit(&self.kernel, &self.points, &zeros, &self.noise, self.lambda)?;
        let var = gp::posterior_var(&state, x)?;
        self.total += info_gain_step(var, noise)?;
        self.points.push(x.to_vec());
        self.noise.push(noise);
        Ok(self.total)
    }
}

fn run_loop(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    let cfg = config.normalized()?;
    let selection = Selection::of(cfg.algorithm);
    let alpha = cfg.alpha;
    // GP-UCB is risk-neutral: alpha plays no part in its selection or report.
    let alpha_alg = if selection == Selection::Ucb { 0.0 } else { alpha };
    let k = cfg.k;
    let kf = k as f64;
    let lambda = cfg.lambda;
    let dim = bench.dim();
    let (var_lo, var_hi) = cfg.variance_bounds();
    let domain = &bench.domain;

    let cands = CandidateSet::sobol(domain, cfg.candidate_size(), cfg.candidate_seed)?;
    let oracle = RegretOracle::new(bench, alpha, &cands.points);
    let known_rho: Vec<f64> = cands.points.iter().map(|p| (bench.rho_sq)(p)).collect();

    let design = sobol_design(domain, cfg.n_init, Some(seed))?;
    let mut sampler = ObjectiveSampler::new(bench, seed);
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut means = Vec::new();
    let mut svars = Vec::new();
    let mut true_rho = Vec::new();
    for p in &design {
        let (m, v) = sample_stats(&sampler.sample(p, k)?)?;
        xs.push(domain.to_unit(p));
        means.push(m);
        svars.push(v);
        true_rho.push((bench.rho_sq)(p));
    }

    let prior_var_kernel = KernelSpec::isotropic(cfg.kernel_family, dim, FALLBACK_LENGTHSCALE)?;
    let var_prior = VarianceModelState::new(&prior_var_kernel, var_lo, var_hi, k, lambda)?;
    let eta = var_prior.eta_proxy;
    let fit_var_kernel = |xs: &[Vec<f64>], svars: &[f64]| {
        resolve_kernel(
            &cfg.kernel_var,
            cfg.kernel_family,
            dim,
            xs,
            svars,
            &vec![eta; xs.len()],
            lambda,
            cfg.hyper_budget,
            seed ^ SEED_SALT_HYPER_VAR,
        )
    };
    let mut kernel_var = fit_var_kernel(&xs, &svars)?;
    let mut var_model = var_prior.refit(&kernel_var, &xs, &svars)?;
    let mut beta_var = beta_theoretical(&var_model.gp, &cfg.beta_var);

    let noise_for = |var_model: &VarianceModelState, xs: &[Vec<f64>], true_rho: &[f64], beta_var: f64| {
        if selection == Selection::MvKnown {
            Ok(true_rho.iter().map(|r| r / kf).collect())
        } else {
            build_hat_sigma(var_model, xs, beta_var)
        }
    };
    let scaling = TargetScaling::from_targets(&means);
    let fit_f_kernel = |xs: &[Vec<f64>], means: &[f64], noise: &[f64]| {
        let ys: Vec<f64> = means.iter().map(|m| scaling.forward(*m)).collect();
        let ns: Vec<f64> = noise.iter().map(|n| scaling.forward_var(*n)).collect();
        resolve_kernel(
            &cfg.kernel_f,
            cfg.kernel_family,
            dim,
            xs,
            &ys,
            &ns,
            lambda,
            cfg.hyper_budget,
            seed ^ SEED_SALT_HYPER_F,
        )
    };
    let mut noise = noise_for(&var_model, &xs, &true_rho, beta_var)?;
    let mut kernel_f = fit_f_kernel(&xs, &means, &noise)?;
    let mut f_model = ScaledGp::fit(&kernel_f, &xs, &means, &noise, lambda, scaling)?;

    let info_noise_f = scaling.forward_var(var_hi / kf);
    let mut info_f = InfoTracker::new(kernel_f.clone(), lambda);
    let mut info_var = InfoTracker::new(kernel_var.clone(), lambda);
    let mut info_true = InfoTracker::new(kernel_f.clone(), lambda);

    let mut trace = Vec::with_capacity(cfg.rounds);
    let mut simple_regret = Vec::with_capacity(cfg.rounds);
    let mut acquired: Vec<Vec<f64>> = Vec::new();
    let mut acquired_dom: Vec<Vec<f64>> = Vec::new();
    let mut acq_means = Vec::new();
    let mut acq_vars = Vec::new();
    let mut acq_rho = Vec::new();
    let mut per_round_lcb = Vec::new();
    let mut candidate_indices = Vec::new();
    let mut r_cum = 0.0;

    for t in 1..=cfg.rounds {
        let beta = beta_theoretical(&f_model.gp, &cfg.beta);
        let (fm, fs) = mean_std_many(&f_model, &cands.unit)?;
        let ucb = upper(&fm, &fs, beta);
        let var_bounds = |model: &VarianceModelState| -> Result<(Vec<f64>, Vec<f64>)> {
            mean_std_many(&model.gp, &cands.unit)
        };
        let (scores, risk_at, lcb_risk): (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>) = match selection {
            Selection::Ucb => (ucb, None, None),
            Selection::MvUcb => {
                let (vm, vs) = var_bounds(&var_model)?;
                let lcb_var = lower(&vm, &vs, beta_var);
                let ucb_var = upper(&vm, &vs, beta_var);
                (penalize(&ucb, &lcb_var, alpha_alg), Some(ucb_var), None)
            }
            Selection::MvKnown => (penalize(&ucb, &known_rho, alpha_alg), None, Some(known_rho.clone())),
            Selection::UncertaintyThenMvMean => {
                let (vm, vs) = var_bounds(&var_model)?;
                let ucb_var = upper(&vm, &vs, beta_var);
                if t <= cfg.n_us {
                    (vs, Some(ucb_var), None)
                } else {
                    (penalize(&ucb, &vm, alpha_alg), Some(ucb_var), None)
                }
            }
        };
        let idx = argmax_index(&scores)?;
        let x_unit = cands.unit[idx].clone();
        let x_dom = cands.points[idx].clone();

        // lcb^MV_t(x_t) with the models that chose x_t.
        let lcb_f = fm[idx] - beta * fs[idx];
        let risk = match (&risk_at, &lcb_risk) {
            (_, Some(r)) => r[idx],
            (Some(u), None) => u[idx],
            (None, None) => {
                var_model.mean(&x_unit)? + beta_var * var_model.std(&x_unit)?
            }
        };
        per_round_lcb.push(lcb_f - alpha_alg * risk);

        let samples = sampler.sample(&x_dom, k)?;
        let (m, v) = sample_stats(&samples)?;
        let rho_true = (bench.rho_sq)(&x_dom);

        let gain_f = info_f.add(&x_unit, info_noise_f)?;
        let gain_var = info_var.add(&x_unit, eta)?;
        info_true.add(&x_unit, scaling.forward_var(rho_true / kf))?;

        xs.push(x_unit.clone());
        means.push(m);
        svars.push(v);
        true_rho.push(rho_true);
        acquired.push(x_unit);
        acquired_dom.push(x_dom.clone());
        acq_means.push(m);
        acq_vars.push(v);
        acq_rho.push(rho_true);
        candidate_indices.push(idx);

        let refit = cfg.refit_every > 0 && t % cfg.refit_every == 0;
        if refit {
            kernel_var = fit_var_kernel(&xs, &svars)?;
        }
        var_model = var_model.refit(&kernel_var, &xs, &svars)?;
        let beta_var_used = beta_var;
        beta_var = beta_theoretical(&var_model.gp, &cfg.beta_var);
        noise = noise_for(&var_model, &xs, &true_rho, beta_var)?;
        if refit {
            kernel_f = fit_f_kernel(&xs, &means, &noise)?;
        }
        f_model = ScaledGp::fit(&kernel_f, &xs, &means, &noise, lambda, scaling)?;

        let mv_true = bench.mv_unchecked(alpha, &x_dom);
        let r_inst = oracle.regret(bench, &x_dom)?;
        r_cum += r_inst;
        trace.push(RegretTrace {
            round: t,
            x: x_dom,
            sample_mean: m,
            sample_var: v,
            mv_true,
            r_inst,
            r_cum,
            r_cum_per_sample: kf * r_cum,
            info_gain_f: gain_f,
            info_gain_var: gain_var,
            beta_used: beta,
            beta_var_used,
        });

        let report_beta = beta_theoretical(&f_model.gp, &cfg.beta);
        let ctx = ReportContext {
            f_model: &f_model,
            var_model: &var_model,
            known_rho_sq: (selection == Selection::MvKnown).then_some(acq_rho.as_slice()),
            beta: report_beta,
            beta_var,
            alpha: alpha_alg,
            visited: &acquired,
            sample_means: &acq_means,
            sample_vars: &acq_vars,
            per_round_lcb: &per_round_lcb,
        };
        let mut row = [0.0; 4];
        for rule in ReportRule::ALL {
            let i = report_point(&ctx, rule)?;
            row[rule.index()] = oracle.regret(bench, &acquired_dom[i])?;
        }
        simple_regret.push(row);

        if t == cfg.rounds {
            let reports = ReportRule::ALL
                .iter()
                .map(|&rule| {
                    let i = report_point(&ctx, rule)?;
                    Ok(ReportedPoint {
                        rule,
                        x: acquired_dom[i].clone(),
                        round: i + 1,
                        simple_regret: row[rule.index()],
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let reported_point = reports[cfg.report_rule.index()].x.clone();
            return Ok(RunResult {
                algorithm: cfg.algorithm,
                seed,
                config_hash: cfg.config_hash()?,
                trace,
                reported_point,
                reported_rule: cfg.report_rule,
                reports,
                simple_regret,
                initial_design: design,
                candidate_indices,
                kernel_f,
                kernel_var,
                scaling,
                lambda,
                var_lo,
                var_hi,
                eta_proxy: eta,
                info_kernel_f: info_f.kernel.clone(),
                info_kernel_var: info_var.kernel.clone(),
                info_noise_f,
                info_gain_true_noise: info_true.total,
                mv_star: oracle.mv_star,
                sampler_calls: sampler.calls(),
            });
        }
    }
    unreachable!("rounds >= 1 is validated")
}

fn check_algorithm(config: &ExperimentConfig, expect: Algorithm) -> Result<()> {
    if config.algorithm != expect {
        return input(format!(
            "config selects {}, called as {expect}",
            config.algorithm
        ));
    }
    Ok(())
}

fn with_seed_context(seed: u64, r: Result<RunResult>) -> Result<RunResult> {
    r.map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("seed {seed}: {msg}")),
        other => other,
    })
}

/// Unknown-variance risk-averse loop: select by `ucb_f - alpha lcb_var`.
pub fn run_rahbo(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    check_algorithm(config, Algorithm::Rahbo)?;
    with_seed_context(seed, run_loop(config, bench, seed))
}

/// Risk-neutral baseline: select by `ucb_f`; the variance model still sets
/// the objective noise diagonal.
pub fn run_gp_ucb(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    check_algorithm(config, Algorithm::GpUcb)?;
    with_seed_context(seed, run_loop(config, bench, seed))
}

/// Select by `ucb_f - alpha rho^2` with the benchmark's true variance, which
/// also fills the objective noise diagonal.
pub fn run_rahbo_known(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    check_algorithm(config, Algorithm::RahboKnown)?;
    with_seed_context(seed, run_loop(config, bench, seed))
}

/// First `n_us` rounds maximize the variance model's posterior deviation;
/// the rest select by `ucb_f - alpha mu_var`.
pub fn run_rahbo_us(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    check_algorithm(config, Algorithm::RahboUs)?;
    with_seed_context(seed, run_loop(config, bench, seed))
}

/// Dispatches on `config.algorithm`.
pub fn run(config: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<RunResult> {
    match config.algorithm {
        Algorithm::Rahbo => run_rahbo(config, bench, seed),
        Algorithm::GpUcb => run_gp_ucb(config, bench, seed),
        Algorithm::RahboKnown => run_rahbo_known(config, bench, seed),
        Algorithm::RahboUs => run_rahbo_us(config, bench, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{branin_benchmark, sine_benchmark};
    use crate::gp::{fit, BetaSchedule};

    fn small(alg: Algorithm, rounds: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("sine", alg, rounds);
        c.n_init = 5;
        c.k = 4;
        c.hyper_budget = 16;
        c.candidate_grid = Some(128);
        c
    }

    #[test]
    fn sampler_is_keyed_by_seed_and_index() {
        let b = sine_benchmark();
        let mut s1 = ObjectiveSampler::new(&b, 3);
        let mut s2 = ObjectiveSampler::new(&b, 3);
        let a = s1.sample(&[0.5], 5).unwrap();
        assert_eq!(a, s2.sample(&[0.5], 5).unwrap());
        assert_ne!(a, s1.sample(&[0.5], 5).unwrap());
        assert_ne!(a, ObjectiveSampler::new(&b, 4).sample(&[0.5], 5).unwrap());
        assert_eq!(s1.calls(), 10);
    }

    #[test]
    fn first_round_maximizes_the_score_over_candidates() {
        // With fixed kernels the score can be rebuilt from the initial data.
        let mut c = small(Algorithm::GpUcb, 1);
        let spec = KernelSpec::isotropic(KernelFamily::Matern52, 1, 0.3).unwrap();
        c.kernel_f = KernelChoice::Spec(spec.clone());
        c.kernel_var = KernelChoice::Spec(spec.clone());
        c.beta = BetaSchedule::fixed(2.0);
        c.beta_var = BetaSchedule::fixed(2.0);
        let b = sine_benchmark();
        let r = run_gp_ucb(&c, &b, 11).unwrap();

        let cfg = c.normalized().unwrap();
        let cands = CandidateSet::sobol(&b.domain, 128, None).unwrap();
        let mut sampler = ObjectiveSampler::new(&b, 11);
        let mut xs = Vec::new();
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for p in &r.initial_design {
            let (m, v) = sample_stats(&sampler.sample(p, 4).unwrap()).unwrap();
            xs.push(b.domain.to_unit(p));
            means.push(m);
            vars.push(v);
        }
        let (lo, hi) = cfg.variance_bounds();
        let vm = VarianceModelState::new(&spec, lo, hi, 4, 1.0)
            .unwrap()
            .refit(&spec, &xs, &vars)
            .unwrap();
        let noise = build_hat_sigma(&vm, &xs, 2.0).unwrap();
        let f = ScaledGp::fit(&spec, &xs, &means, &noise, 1.0, TargetScaling::from_targets(&means)).unwrap();
        let (m, s) = mean_std_many(&f, &cands.unit).unwrap();
        let expect = argmax_index(&upper(&m, &s, 2.0)).unwrap();
        assert_eq!(r.candidate_indices, vec![expect]);
        assert_eq!(r.trace[0].x, cands.points[expect]);
        assert_eq!(r.trace[0].beta_used, 2.0);
    }

    #[test]
    fn gp_ucb_ignores_alpha_for_selection() {
        let b = sine_benchmark();
        let mut c = small(Algorithm::GpUcb, 6);
        let a = run_gp_ucb(&c, &b, 2).unwrap();
        c.alpha = 5.0;
        let z = run_gp_ucb(&c, &b, 2).unwrap();
        assert_eq!(a.candidate_indices, z.candidate_indices);
        assert_eq!(a.reports[0].x, z.reports[0].x);
    }

    #[test]
    fn zero_alpha_rahbo_matches_gp_ucb() {
        let b = branin_benchmark();
        let mut c = small(Algorithm::Rahbo, 8);
        c.benchmark = "branin".into();
        c.alpha = 0.0;
        let r = run_rahbo(&c, &b, 5).unwrap();
        c.algorithm = Algorithm::GpUcb;
        let g = run_gp_ucb(&c, &b, 5).unwrap();
        assert_eq!(r.candidate_indices, g.candidate_indices);
    }

    #[test]
    fn us_without_exploration_stage_is_mean_penalized() {
        // n_us = 0 and alpha = 0 make the second stage plain GP-UCB.
        let b = sine_benchmark();
        let mut c = small(Algorithm::RahboUs, 6);
        c.n_us = 0;
        c.alpha = 0.0;
        let u = run_rahbo_us(&c, &b, 9).unwrap();
        c.algorithm = Algorithm::GpUcb;
        let g = run_gp_ucb(&c, &b, 9).unwrap();
        assert_eq!(u.candidate_indices, g.candidate_indices);
    }

    #[test]
    fn us_stage_one_targets_variance_uncertainty() {
        let b = sine_benchmark();
        let mut c = small(Algorithm::RahboUs, 3);
        c.n_us = 3;
        let r = run_rahbo_us(&c, &b, 1).unwrap();
        // Uncertainty sampling never repeats a point while others are unexplored.
        let mut idx = r.candidate_indices.clone();
        idx.dedup();
        assert_eq!(idx.len(), 3);
    }

    #[test]
    fn runs_are_deterministic() {
        let b = sine_benchmark();
        for alg in [Algorithm::Rahbo, Algorithm::RahboKnown, Algorithm::RahboUs] {
            let mut c = small(alg, 4);
            c.n_us = 2;
            let a = run(&c, &b, 8).unwrap();
            let z = run(&c, &b, 8).unwrap();
            assert_eq!(a.trace, z.trace);
            assert_eq!(a.simple_regret, z.simple_regret);
        }
    }

    #[test]
    fn sample_accounting() {
        let b = sine_benchmark();
        let c = small(Algorithm::Rahbo, 7);
        let r = run_rahbo(&c, &b, 0).unwrap();
        assert_eq!(r.sampler_calls, ((5 + 7) * 4) as u64);
        assert_eq!(r.trace.len(), 7);
        let last = r.trace.last().unwrap();
        assert_eq!(last.r_cum_per_sample, 4.0 * last.r_cum);
    }

    #[test]
    fn regret_is_nonnegative_and_cumulative() {
        let b = sine_benchmark();
        let r = run_rahbo(&small(Algorithm::Rahbo, 8), &b, 3).unwrap();
        let mut prev = 0.0;
        for (t, row) in r.trace.iter().enumerate() {
            assert_eq!(row.round, t + 1);
            assert!(row.r_inst >= 0.0);
            assert!((row.r_cum - prev - row.r_inst).abs() < 1e-12);
            assert!(row.info_gain_f >= 0.0 && row.info_gain_var >= 0.0);
            prev = row.r_cum;
        }
        assert!(r.simple_regret.iter().flatten().all(|v| *v >= 0.0));
    }

    #[test]
    fn wrong_entry_point_is_an_input_error() {
        let b = sine_benchmark();
        let c = small(Algorithm::Rahbo, 1);
        assert!(matches!(run_gp_ucb(&c, &b, 0), Err(Error::Input(_))));
    }

    #[test]
    fn report_rules_and_ties() {
        let spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1, 0.2).unwrap();
        let visited = vec![vec![0.25], vec![0.5], vec![0.75]];
        let vm = VarianceModelState::new(&spec, 0.1, 1.0, 5, 1.0).unwrap();
        let f = fit(&spec, &visited, &[0.0, 0.0, 0.0], &[0.1; 3], 1.0).unwrap();
        let means = [1.0, 1.0, 0.5];
        let vars = [0.6, 0.2, 0.0];
        let per_round = [0.3, 0.3, 0.2];
        let ctx = ReportContext {
            f_model: &f,
            var_model: &vm,
            known_rho_sq: None,
            beta: 2.0,
            beta_var: 2.0,
            alpha: 1.0,
            visited: &visited,
            sample_means: &means,
            sample_vars: &vars,
            per_round_lcb: &per_round,
        };
        assert_eq!(report_point(&ctx, ReportRule::BestObserved).unwrap(), 0);
        assert_eq!(report_point(&ctx, ReportRule::MaxEmpiricalMv).unwrap(), 1);
        assert_eq!(report_point(&ctx, ReportRule::LcbMvPerRound).unwrap(), 0);
        // The middle point has the tightest objective bound.
        assert_eq!(report_point(&ctx, ReportRule::LcbMv).unwrap(), 1);
        let known = [0.1, 0.5, 0.3];
        let ctx = ReportContext {
            known_rho_sq: Some(&known),
            ..ctx
        };
        assert_eq!(report_point(&ctx, ReportRule::LcbMv).unwrap(), 0);
        let empty = ReportContext {
            visited: &[],
            ..ctx
        };
        assert!(report_point(&empty, ReportRule::BestObserved).is_err());
    }
}
