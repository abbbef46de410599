//! Heteroscedastic Gaussian-process regression.
//!
//! The model is `f ~ GP(0, k / lambda)` with independent observation noise
//! `N(0, rho^2(x_i))`. With `A = K + lambda * diag(rho^2)` the posterior is
//!
//! ```text
//! mu(x)      = k(x)^T A^{-1} y
//! sigma^2(x) = (k(x, x) - k(x)^T A^{-1} k(x)) / lambda
//! ```
//!
//! `A` is factorized once at fit time and every query goes through triangular
//! solves against the cached lower factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::kernel::{kernel_matrix, KernelFamily, KernelSpec};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
/// Candidate batches are solved in fixed-size chunks so results do not
/// depend on the thread count.
const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct HeteroGPState {
    kernel: KernelSpec,
    x: Vec<Vec<f64>>,
    y: DVector<f64>,
    noise_diag: Vec<f64>,
    lambda: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `A^{-1} y`
    weights: DVector<f64>,
    jitter: f64,
}

impl HeteroGPState {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn noise_diag(&self) -> &[f64] {
        &self.noise_diag
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Diagonal jitter that was needed to factorize, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor of `K + lambda * Sigma` (plus jitter), `None`
    /// for the prior-only state.
    pub fn factor(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.kernel.dim() {
            return input(format!(
                "query has dimension {}, model expects {}",
                x.len(),
                self.kernel.dim()
            ));
        }
        Ok(())
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|p| self.kernel.eval_unchecked(p, x)),
        )
    }

    /// Log-determinant of `K + lambda * Sigma` from the cached factor.
    pub fn logdet_gram(&self) -> f64 {
        match &self.chol {
            Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            None => 0.0,
        }
    }

    /// Log-determinant of `lambda * Sigma`.
    pub fn logdet_noise(&self) -> f64 {
        self.noise_diag
            .iter()
            .map(|r| (self.lambda * r).ln())
            .sum()
    }

    /// Posterior mean and variance for a batch of points.
    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        for p in points {
            self.check_dim(p)?;
        }
        let parts: Vec<(Vec<f64>, Vec<f64>)> = points
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| self.predict_chunk(chunk))
            .collect();
        let mut means = Vec::with_capacity(points.len());
        let mut vars = Vec::with_capacity(points.len());
        for (m, v) in parts {
            means.extend(m);
            vars.extend(v);
        }
        Ok((means, vars))
    }

    fn predict_chunk(&self, chunk: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let prior: Vec<f64> = chunk
            .iter()
            .map(|p| self.kernel.eval_unchecked(p, p))
            .collect();
        let Some(chol) = &self.chol else {
            return (
                vec![0.0; chunk.len()],
                prior.iter().map(|k| k / self.lambda).collect(),
            );
        };
        let n = self.x.len();
        let mut cross = DMatrix::zeros(n, chunk.len());
        for (j, p) in chunk.iter().enumerate() {
            for (i, xi) in self.x.iter().enumerate() {
                cross[(i, j)] = self.kernel.eval_unchecked(xi, p);
            }
        }
        let means = (cross.transpose() * &self.weights).iter().copied().collect();
        let l = chol.l_dirty();
        l.solve_lower_triangular_mut(&mut cross);
        let vars = cross
            .column_iter()
            .zip(&prior)
            .map(|(v, k)| ((k - v.norm_squared()) / self.lambda).max(0.0))
            .collect();
        (means, vars)
    }
}

/// Anything that yields a Gaussian posterior marginal at a point.
pub trait Posterior {
    fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)>;
    fn mean_var_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl Posterior for HeteroGPState {
    fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok((posterior_mean(self, x)?, posterior_var(self, x)?))
    }

    fn mean_var_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.predict_many(points)
    }
}

/// Affine map between raw targets and the standardized space a GP is fitted
/// in: `raw = offset + scale * standardized`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaling {
    pub const IDENTITY: TargetScaling = TargetScaling {
        offset: 0.0,
        scale: 1.0,
    };

    /// Sample mean and standard deviation; falls back to unit scale when
    /// there are fewer than two values or no spread.
    pub fn from_targets(y: &[f64]) -> Self {
        if y.is_empty() {
            return Self::IDENTITY;
        }
        let n = y.len() as f64;
        let offset = y.iter().sum::<f64>() / n;
        let scale = if y.len() < 2 {
            1.0
        } else {
            (y.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        TargetScaling {
            offset,
            scale: if scale > 1e-12 && scale.is_finite() { scale } else { 1.0 },
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    /// Noise variance in standardized units.
    pub fn forward_var(&self, v: f64) -> f64 {
        v / (self.scale * self.scale)
    }
}

/// A GP fitted on standardized targets, reporting in raw units.
#[derive(Debug, Clone)]
pub struct ScaledGp {
    pub gp: HeteroGPState,
    pub scaling: TargetScaling,
}

impl ScaledGp {
    /// Fits on `(y - offset) / scale` with noise `noise / scale^2`.
    pub fn fit(
        kernel: &KernelSpec,
        x: &[Vec<f64>],
        y: &[f64],
        noise_diag: &[f64],
        lambda: f64,
        scaling: TargetScaling,
    ) -> Result<Self> {
        let ys: Vec<f64> = y.iter().map(|v| scaling.forward(*v)).collect();
        let ns: Vec<f64> = noise_diag.iter().map(|v| scaling.forward_var(*v)).collect();
        Ok(ScaledGp {
            gp: fit(kernel, x, &ys, &ns, lambda)?,
            scaling,
        })
    }
}

impl Posterior for ScaledGp {
    fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.gp.mean_var(x)?;
        let s = self.scaling;
        Ok((s.offset + s.scale * m, s.scale * s.scale * v))
    }

    fn mean_var_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut m, mut v) = self.gp.predict_many(points)?;
        let s = self.scaling;
        m.iter_mut().for_each(|x| *x = s.offset + s.scale * *x);
        v.iter_mut().for_each(|x| *x *= s.scale * s.scale);
        Ok((m, v))
    }
}

/// Factorizes `K + lambda * diag(noise)` and caches `A^{-1} y`.
pub fn fit(
    kernel: &KernelSpec,
    x: &[Vec<f64>],
    y: &[f64],
    noise_diag: &[f64],
    lambda: f64,
) -> Result<HeteroGPState> {
    kernel.validate()?;
    if x.len() != y.len() || x.len() != noise_diag.len() {
        return input(format!(
            "length mismatch: {} inputs, {} targets, {} noise entries",
            x.len(),
            y.len(),
            noise_diag.len()
        ));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return input(format!("lambda must be positive, got {lambda}"));
    }
    if let Some(r) = noise_diag.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return input(format!("noise variances must be positive, got {r}"));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return input(format!("targets must be finite, got {v}"));
    }
    let y = DVector::from_column_slice(y);
    if x.is_empty() {
        return Ok(HeteroGPState {
            kernel: kernel.clone(),
            x: Vec::new(),
            y,
            noise_diag: Vec::new(),
            lambda,
            chol: None,
            weights: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let mut gram = kernel_matrix(kernel, x)?;
    for (i, r) in noise_diag.iter().enumerate() {
        gram[(i, i)] += lambda * r;
    }
    let (chol, jitter) = factorize(gram)?;
    let weights = chol.solve(&y);
    Ok(HeteroGPState {
        kernel: kernel.clone(),
        x: x.to_vec(),
        y,
        noise_diag: noise_diag.to_vec(),
        lambda,
        chol: Some(chol),
        weights,
        jitter,
    })
}

fn factorize(gram: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(gram.clone()) {
        return Ok((c, 0.0));
    }
    let n = gram.nrows();
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let attempt = &gram + DMatrix::identity(n, n) * jitter;
        if let Some(c) = Cholesky::new(attempt) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "Cholesky of {n}x{n} Gram matrix failed up to jitter {JITTER_MAX:e}"
    )))
}

pub fn posterior_mean(state: &HeteroGPState, x: &[f64]) -> Result<f64> {
    state.check_dim(x)?;
    if state.is_empty() {
        return Ok(0.0);
    }
    Ok(state.cross(x).dot(&state.weights))
}

/// Clamped at zero when round-off produces a tiny negative value.
pub fn posterior_var(state: &HeteroGPState, x: &[f64]) -> Result<f64> {
    state.check_dim(x)?;
    let prior = state.kernel.eval_unchecked(x, x);
    let Some(chol) = &state.chol else {
        return Ok(prior / state.lambda);
    };
    let mut v = state.cross(x);
    chol.l_dirty().solve_lower_triangular_mut(&mut v);
    Ok(((prior - v.norm_squared()) / state.lambda).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    Fixed,
    Theoretical,
}

/// Confidence-width multiplier schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSchedule {
    #[serde(default = "BetaSchedule::default_mode")]
    pub mode: BetaMode,
    #[serde(default = "BetaSchedule::default_fixed")]
    pub fixed_value: f64,
    #[serde(default = "BetaSchedule::default_delta")]
    pub delta: f64,
    #[serde(default = "BetaSchedule::default_bound")]
    pub rkhs_bound: f64,
    #[serde(default = "BetaSchedule::default_lambda")]
    pub lambda: f64,
}

impl BetaSchedule {
    fn default_mode() -> BetaMode {
        BetaMode::Fixed
    }
    fn default_fixed() -> f64 {
        2.0
    }
    fn default_delta() -> f64 {
        0.05
    }
    fn default_bound() -> f64 {
        1.0
    }
    fn default_lambda() -> f64 {
        1.0
    }

    pub fn fixed(value: f64) -> Self {
        BetaSchedule {
            fixed_value: value,
            ..Default::default()
        }
    }

    pub fn theoretical(delta: f64, rkhs_bound: f64, lambda: f64) -> Self {
        BetaSchedule {
            mode: BetaMode::Theoretical,
            delta,
            rkhs_bound,
            lambda,
            ..Default::default()
        }
    }

    /// Violations of the schedule invariants, prefixed with `field`.
    pub fn violations(&self, field: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.fixed_value.is_finite() && self.fixed_value > 0.0) {
            out.push(format!("{field}.fixed_value must be > 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            out.push(format!("{field}.delta must lie in (0, 1)"));
        }
        if !(self.rkhs_bound.is_finite() && self.rkhs_bound > 0.0) {
            out.push(format!("{field}.rkhs_bound must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            out.push(format!("{field}.lambda must be > 0"));
        }
        out
    }
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule {
            mode: Self::default_mode(),
            fixed_value: Self::default_fixed(),
            delta: Self::default_delta(),
            rkhs_bound: Self::default_bound(),
            lambda: Self::default_lambda(),
        }
    }
}

/// `sqrt(2 ln(1/delta) + ln det(K + lambda Sigma) - ln det(lambda Sigma)) + sqrt(lambda) B`
///
/// The schedule's own `lambda` is used for the RKHS term; the determinant
/// ratio comes from the fitted state.
pub fn beta_theoretical(state: &HeteroGPState, schedule: &BetaSchedule) -> f64 {
    match schedule.mode {
        BetaMode::Fixed => schedule.fixed_value,
        BetaMode::Theoretical => {
            let ratio = (state.logdet_gram() - state.logdet_noise()).max(0.0);
            (2.0 * (1.0 / schedule.delta).ln() + ratio).sqrt()
                + schedule.lambda.sqrt() * schedule.rkhs_bound
        }
    }
}

/// Gaussian log-evidence of the targets under `y ~ N(0, (K + lambda Sigma) / lambda)`,
/// i.e. `f ~ GP(0, k / lambda)` plus noise with covariance `Sigma`:
///
/// ```text
/// -lambda/2 y^T A^{-1} y - 1/2 (ln det A - n ln lambda) - n/2 ln(2 pi)
/// ```
pub fn log_marginal_likelihood(state: &HeteroGPState) -> Result<f64> {
    let n = state.len();
    if n == 0 {
        return input("log marginal likelihood needs at least one observation");
    }
    let nf = n as f64;
    let quad = state.y.dot(&state.weights);
    Ok(-0.5 * state.lambda * quad - 0.5 * (state.logdet_gram() - nf * state.lambda.ln())
        - 0.5 * nf * (2.0 * std::f64::consts::PI).ln())
}

pub const LENGTHSCALE_RANGE: (f64, f64) = (1e-2, 1e1);
pub const OUTPUT_SCALE_RANGE: (f64, f64) = (1e-1, 1e1);

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// The `i`-th candidate drawn by the hyperparameter search is the `i`-th
/// draw from this sampler.
pub fn sample_hyperparameters(family: KernelFamily, dim: usize, rng: &mut impl Rng) -> KernelSpec {
    let lengthscales = (0..dim).map(|_| log_uniform(rng, LENGTHSCALE_RANGE)).collect();
    let output_scale = log_uniform(rng, OUTPUT_SCALE_RANGE);
    KernelSpec {
        family,
        lengthscales,
        output_scale,
    }
}

/// Seeded random search over log-uniform lengthscales and output scale,
/// maximizing [`log_marginal_likelihood`]. The first candidate wins ties.
pub fn fit_hyperparameters(
    family: KernelFamily,
    x: &[Vec<f64>],
    y: &[f64],
    noise_diag: &[f64],
    lambda: f64,
    budget: usize,
    seed: u64,
) -> Result<KernelSpec> {
    if x.len() < 2 {
        return input(format!(
            "hyperparameter fitting needs at least 2 points, got {}",
            x.len()
        ));
    }
    if budget == 0 {
        return input("hyperparameter budget must be >= 1");
    }
    let dim = x[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, KernelSpec)> = None;
    let mut last_err = None;
    for _ in 0..budget {
        let spec = sample_hyperparameters(family, dim, &mut rng);
        let lml = match fit(&spec, x, y, noise_diag, lambda).and_then(|s| log_marginal_likelihood(&s)) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => continue,
            Err(e @ Error::Input(_)) => return Err(e),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if best.as_ref().is_none_or(|(b, _)| lml > *b) {
            best = Some((lml, spec));
        }
    }
    match best {
        Some((_, spec)) => Ok(spec),
        None => Err(last_err.unwrap_or_else(|| {
            Error::Numerical("no hyperparameter candidate produced a finite likelihood".into())
        })),
    }
}
