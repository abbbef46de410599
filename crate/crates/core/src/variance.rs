//! Repeated-experiment statistics and the GP model of the noise variance.
//!
//! Each query is evaluated `k` times; the unbiased sample variance is a noisy
//! observation of `rho^2(x)`. Those observations feed a homoscedastic GP
//! whose noise is the conservative proxy `2 var_hi^2 / (k - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::gp::{self, HeteroGPState};
use crate::kernel::KernelSpec;

/// Lowest admissible entry of the noise diagonal, before dividing by `k`.
pub const HAT_SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedObservation {
    pub x: Vec<f64>,
    pub samples: Vec<f64>,
    pub sample_mean: f64,
    pub sample_var: f64,
}

impl RepeatedObservation {
    pub fn new(x: Vec<f64>, samples: Vec<f64>) -> Result<Self> {
        let (sample_mean, sample_var) = sample_stats(&samples)?;
        Ok(RepeatedObservation {
            x,
            samples,
            sample_mean,
            sample_var,
        })
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }
}

/// Sample mean and unbiased sample variance.
pub fn sample_stats(samples: &[f64]) -> Result<(f64, f64)> {
    let k = samples.len();
    if k < 2 {
        return input(format!("sample statistics need k >= 2 samples, got {k}"));
    }
    let kf = k as f64;
    let mean = samples.iter().sum::<f64>() / kf;
    let ss: f64 = samples.iter().map(|y| (y - mean) * (y - mean)).sum();
    Ok((mean, ss / (kf - 1.0)))
}

/// `2 var_hi^2 / (k - 1)`: a variance-proxy for the sample-variance noise of
/// strictly sub-Gaussian observations with variance at most `var_hi`.
pub fn eta_variance_proxy(var_hi: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return input(format!("eta variance proxy needs k >= 2, got {k}"));
    }
    if !(var_hi.is_finite() && var_hi > 0.0) {
        return input(format!("var_hi must be positive, got {var_hi}"));
    }
    Ok(2.0 * var_hi * var_hi / (k as f64 - 1.0))
}

#[derive(Debug, Clone)]
pub struct VarianceModelState {
    pub gp: HeteroGPState,
    pub var_lo: f64,
    pub var_hi: f64,
    pub k: usize,
    pub eta_proxy: f64,
}

impl VarianceModelState {
    /// Prior-only model.
    pub fn new(kernel: &KernelSpec, var_lo: f64, var_hi: f64, k: usize, lambda: f64) -> Result<Self> {
        if !(var_lo >= 0.0 && var_lo < var_hi && var_hi.is_finite()) {
            return input(format!(
                "variance bounds must satisfy 0 <= var_lo < var_hi, got [{var_lo}, {var_hi}]"
            ));
        }
        let eta_proxy = eta_variance_proxy(var_hi, k)?;
        let gp = gp::fit(kernel, &[], &[], &[], lambda)?;
        Ok(VarianceModelState {
            gp,
            var_lo,
            var_hi,
            k,
            eta_proxy,
        })
    }

    /// Same bounds and proxy, fitted to `(x_i, s^2_i)` pairs from scratch.
    pub fn refit(&self, kernel: &KernelSpec, xs: &[Vec<f64>], sample_vars: &[f64]) -> Result<Self> {
        if let Some(v) = sample_vars.iter().find(|v| !(**v >= 0.0)) {
            return input(format!("sample variance must be >= 0, got {v}"));
        }
        let noise = vec![self.eta_proxy; xs.len()];
        let gp = gp::fit(kernel, xs, sample_vars, &noise, self.gp.lambda())?;
        Ok(VarianceModelState { gp, ..self.clone() })
    }

    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        gp::posterior_mean(&self.gp, x)
    }

    pub fn std(&self, x: &[f64]) -> Result<f64> {
        Ok(gp::posterior_var(&self.gp, x)?.sqrt())
    }
}

/// Conditions the variance GP on one more `(x, s^2)` pair.
pub fn update_variance_gp(
    state: &VarianceModelState,
    x: &[f64],
    sample_var: f64,
) -> Result<VarianceModelState> {
    if !(sample_var >= 0.0) {
        return input(format!("sample variance must be >= 0, got {sample_var}"));
    }
    let mut xs = state.gp.inputs().to_vec();
    xs.push(x.to_vec());
    let mut ys: Vec<f64> = state.gp.targets().iter().copied().collect();
    ys.push(sample_var);
    let kernel = state.gp.kernel().clone();
    state.refit(&kernel, &xs, &ys)
}

/// `(mu_var - beta_var sigma_var, mu_var + beta_var sigma_var)`
pub fn var_confidence_bounds(state: &VarianceModelState, x: &[f64], beta_var: f64) -> Result<(f64, f64)> {
    if !(beta_var >= 0.0) {
        return input(format!("beta_var must be >= 0, got {beta_var}"));
    }
    let mu = state.mean(x)?;
    let width = beta_var * state.std(x)?;
    Ok((mu - width, mu + width))
}

/// Noise diagonal for the objective model: `max(floor, min(ucb_var, var_hi)) / k`
/// with `floor = max(var_lo, 1e-6)`.
pub fn hat_sigma_entry(ucb_var: f64, var_lo: f64, var_hi: f64, k: usize) -> f64 {
    let floor = var_lo.max(HAT_SIGMA_FLOOR);
    ucb_var.min(var_hi).max(floor) / k as f64
}

pub fn build_hat_sigma(state: &VarianceModelState, visited: &[Vec<f64>], beta_var: f64) -> Result<Vec<f64>> {
    if visited.is_empty() {
        return Ok(Vec::new());
    }
    let (means, vars) = state.gp.predict_many(visited)?;
    Ok(means
        .iter()
        .zip(&vars)
        .map(|(m, v)| hat_sigma_entry(m + beta_var * v.sqrt(), state.var_lo, state.var_hi, state.k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::tests::dense_oracle;
    use crate::kernel::KernelFamily;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel() -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::Matern52, 1, 0.3).unwrap()
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        assert_eq!(sample_stats(&[2.5; 7]).unwrap(), (2.5, 0.0));
    }

    #[test]
    fn hand_computed_stats() {
        assert_eq!(sample_stats(&[1.0, 2.0, 3.0]).unwrap(), (2.0, 1.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(sample_stats(&[1.0]).is_err());
        assert!(RepeatedObservation::new(vec![0.0], vec![]).is_err());
        assert!(eta_variance_proxy(1.0, 1).is_err());
    }

    #[test]
    fn eta_proxy_values() {
        assert!((eta_variance_proxy(1.0, 10).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(eta_variance_proxy(1.0, 3).unwrap(), 1.0);
        let base = eta_variance_proxy(0.7, 5).unwrap();
        assert!((eta_variance_proxy(2.1, 5).unwrap() - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn prior_model() {
        let s = VarianceModelState::new(&kernel(), 0.0, 1.0, 10, 1.0).unwrap();
        assert_eq!(s.mean(&[0.4]).unwrap(), 0.0);
        assert_eq!(s.std(&[0.4]).unwrap(), 1.0);
        assert_eq!(var_confidence_bounds(&s, &[0.4], 2.0).unwrap(), (-2.0, 2.0));
        assert_eq!(var_confidence_bounds(&s, &[0.4], 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn single_update_closed_form() {
        // var_hi = 1, k = 3 gives eta = 1, the same single-point case as the objective GP.
        let s = VarianceModelState::new(&kernel(), 0.0, 1.0, 3, 1.0).unwrap();
        let s = update_variance_gp(&s, &[0.5], 2.0).unwrap();
        assert!((s.mean(&[0.5]).unwrap() - 1.0).abs() < 1e-14);
        assert!((s.std(&[0.5]).unwrap().powi(2) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn negative_sample_variance_rejected() {
        let s = VarianceModelState::new(&kernel(), 0.0, 1.0, 3, 1.0).unwrap();
        assert!(update_variance_gp(&s, &[0.5], -0.1).is_err());
    }

    #[test]
    fn streamed_updates_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = KernelSpec::new(KernelFamily::Matern52, vec![0.4, 0.8], 0.7).unwrap();
        let mut s = VarianceModelState::new(&k, 0.01, 1.5, 10, 1.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..15 {
            let x = vec![rng.random::<f64>(), rng.random::<f64>()];
            let v = rng.random_range(0.0..1.5);
            s = update_variance_gp(&s, &x, v).unwrap();
            xs.push(x);
            ys.push(v);
        }
        let noise = vec![s.eta_proxy; 15];
        for _ in 0..10 {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            let (m, v) = dense_oracle(&k, &xs, &ys, &noise, 1.0, &q);
            assert!((s.mean(&q).unwrap() - m).abs() < 1e-8);
            assert!((s.std(&q).unwrap().powi(2) - v).abs() < 1e-8);
        }
    }

    #[test]
    fn hat_sigma_truncation_and_floor() {
        assert!((hat_sigma_entry(5.0, 0.0, 2.0, 10) - 0.2).abs() < 1e-15);
        assert!((hat_sigma_entry(0.5, 0.0, 2.0, 10) - 0.05).abs() < 1e-15);
        assert!((hat_sigma_entry(-1.0, 0.0, 2.0, 10) - 1e-7).abs() < 1e-20);
        assert!((hat_sigma_entry(-1.0, 0.3, 2.0, 10) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn hat_sigma_empty_and_prior() {
        let s = VarianceModelState::new(&kernel(), 0.0, 2.0, 10, 1.0).unwrap();
        assert!(build_hat_sigma(&s, &[], 2.0).unwrap().is_empty());
        // Prior ucb = 2 hits the cap exactly.
        let d = build_hat_sigma(&s, &[vec![0.1], vec![0.7]], 2.0).unwrap();
        assert_eq!(d, vec![0.2, 0.2]);
    }

    #[test]
    fn unbiased_for_uniform_noise() {
        // Uniform on [-a, a] has variance a^2 / 3.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a: f64 = 1.5;
        let truth = a * a / 3.0;
        let reps = 100_000;
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                let s: Vec<f64> = (0..10).map(|_| rng.random_range(-a..a)).collect();
                sample_stats(&s).unwrap().1
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((mean - truth).abs() <= 3.0 * se, "bias {} vs se {se}", mean - truth);
    }

    proptest! {
        #[test]
        fn pairwise_difference_identity(samples in proptest::collection::vec(-10.0f64..10.0, 2..12)) {
            let k = samples.len() as f64;
            let (_, var) = sample_stats(&samples).unwrap();
            let pair: f64 = samples.iter()
                .flat_map(|a| samples.iter().map(move |b| (a - b) * (a - b)))
                .sum::<f64>() / (2.0 * k * (k - 1.0));
            prop_assert!((var - pair).abs() <= 1e-12 * (1.0 + var));
        }

        #[test]
        fn stats_recomputable(samples in proptest::collection::vec(-5.0f64..5.0, 2..20)) {
            let obs = RepeatedObservation::new(vec![0.0], samples.clone()).unwrap();
            let (m, v) = sample_stats(&obs.samples).unwrap();
            prop_assert!((obs.sample_mean - m).abs() < 1e-12);
            prop_assert!((obs.sample_var - v).abs() < 1e-12);
            prop_assert!(obs.sample_var >= 0.0);
        }

        #[test]
        fn bounds_bracket_mean(seed in 0u64..1000, q in 0.0f64..1.0, beta in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = VarianceModelState::new(&kernel(), 0.0, 1.0, 10, 1.0).unwrap();
            for _ in 0..4 {
                s = update_variance_gp(&s, &[rng.random::<f64>()], rng.random_range(0.0..1.0)).unwrap();
            }
            let (lo, hi) = var_confidence_bounds(&s, &[q], beta).unwrap();
            let mu = s.mean(&[q]).unwrap();
            prop_assert!(lo <= mu && mu <= hi);
            prop_assert!(((hi - lo) - 2.0 * beta * s.std(&[q]).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn hat_sigma_entries_in_range(ucb in -10.0f64..10.0, hi in 0.1f64..5.0, k in 2usize..20) {
            let e = hat_sigma_entry(ucb, 0.0, hi, k);
            prop_assert!(e >= HAT_SIGMA_FLOOR / k as f64 && e <= hi / k as f64);
        }
    }
}
