//! Synthetic objectives with known heteroscedastic noise.
//!
//! Variance-function constants (sigmoid centres, slopes, floor and ceiling)
//! are fixed choices of this crate:
//!
//! | benchmark | domain              | f                    | rho^2(x)                                   |
//! |-----------|---------------------|----------------------|--------------------------------------------|
//! | `sine`    | `[0, 2]`            | `sin(2 pi x)`        | `0.02 + 0.78 sigmoid(20 (x - 1))`          |
//! | `branin`  | `[-5, 10] x [0, 15]`| negated Branin       | `0.05 + 1.5 sigmoid(-1.5 (x_1 - 2.5))`     |

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{input, Result};
use crate::sobol::Sobol;

pub type PointFn = fn(&[f64]) -> f64;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Domain { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    /// Regular grid with `per_axis` points along every axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        let mut out = vec![Vec::new()];
        for (lo, hi) in &self.bounds {
            let step = (hi - lo) / (per_axis - 1) as f64;
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..per_axis).map(move |i| {
                        let mut q = p.clone();
                        q.push(lo + step * i as f64);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Grid with roughly `10^4 * d` points in total.
    pub fn dense_grid(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = 10_000.0 * d as f64;
        let per_axis = total.powf(1.0 / d as f64).ceil() as usize;
        self.grid(per_axis + usize::from(d == 1))
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub domain: Domain,
    pub f: PointFn,
    pub rho_sq: PointFn,
    pub analytic_optima: Vec<Vec<f64>>,
    /// Bounds on `rho_sq` over the domain.
    pub var_lo: f64,
    pub var_hi: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn sine_f(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).sin()
}

fn sine_rho_sq(x: &[f64]) -> f64 {
    0.02 + 0.78 * sigmoid(20.0 * (x[0] - 1.0))
}

fn branin_f(x: &[f64]) -> f64 {
    let a = 1.0;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * PI);
    let (x1, x2) = (x[0], x[1]);
    let q = x2 - b * x1 * x1 + c * x1 - r;
    -(a * q * q + s * (1.0 - t) * x1.cos() + s)
}

fn branin_rho_sq(x: &[f64]) -> f64 {
    0.05 + 1.5 * sigmoid(-1.5 * (x[0] - 2.5))
}

/// Two global maxima at 0.25 and 1.25; low noise on `[0, 1]`, high on `(1, 2]`.
pub fn sine_benchmark() -> Benchmark {
    Benchmark {
        name: "sine",
        domain: Domain::new(vec![(0.0, 2.0)]),
        f: sine_f,
        rho_sq: sine_rho_sq,
        analytic_optima: vec![vec![0.25], vec![1.25]],
        var_lo: 0.02,
        var_hi: 0.8,
    }
}

/// Negated Branin with optima A = (-pi, 12.275), B = (pi, 2.275),
/// C = (9.42478, 2.475); noise decreases from A to C.
pub fn branin_benchmark() -> Benchmark {
    Benchmark {
        name: "branin",
        domain: Domain::new(vec![(-5.0, 10.0), (0.0, 15.0)]),
        f: branin_f,
        rho_sq: branin_rho_sq,
        analytic_optima: vec![vec![-PI, 12.275], vec![PI, 2.275], vec![9.42478, 2.475]],
        var_lo: 0.05,
        var_hi: 1.55,
    }
}

pub const BENCHMARK_NAMES: [&str; 2] = ["sine", "branin"];

pub fn benchmark_by_name(name: &str) -> Result<Benchmark> {
    match name {
        "sine" => Ok(sine_benchmark()),
        "branin" => Ok(branin_benchmark()),
        other => input(format!(
            "unknown benchmark {other:?}; available: {}",
            BENCHMARK_NAMES.join(", ")
        )),
    }
}

impl Benchmark {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if !self.domain.contains(x) {
            return input(format!("point {x:?} outside the {} domain", self.name));
        }
        Ok(())
    }

    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok((self.f)(x))
    }

    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok((self.rho_sq)(x))
    }

    /// `f(x) - alpha rho^2(x)` without the domain check.
    pub(crate) fn mv_unchecked(&self, alpha: f64, x: &[f64]) -> f64 {
        (self.f)(x) - alpha * (self.rho_sq)(x)
    }

    /// Best mean-variance value over the dense grid and the analytic optima,
    /// together with the point that attains it.
    pub fn mv_argmax(&self, alpha: f64) -> (Vec<f64>, f64) {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for p in self.domain.dense_grid().into_iter().chain(self.analytic_optima.iter().cloned()) {
            let v = self.mv_unchecked(alpha, &p);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((p, v));
            }
        }
        best.expect("dense grid is never empty")
    }

    pub fn mv_optimum(&self, alpha: f64) -> f64 {
        self.mv_argmax(alpha).1
    }
}

/// `k` draws of `f(x) + eps_i`, `eps_i ~ N(0, rho^2(x))`.
pub fn sample_observation(bench: &Benchmark, x: &[f64], k: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mean = bench.mean(x)?;
    let var = bench.variance(x)?;
    if k == 0 {
        return input("need at least one sample");
    }
    if var <= 0.0 {
        return Ok(vec![mean; k]);
    }
    let normal = Normal::new(mean, var.sqrt()).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok((0..k).map(|_| normal.sample(rng)).collect())
}

/// First `n` Sobol points mapped into the domain; `seed = None` gives the
/// unscrambled sequence.
pub fn sobol_design(domain: &Domain, n: usize, seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return input("design size must be >= 1");
    }
    let mut seq = match seed {
        Some(s) => Sobol::scrambled(domain.dim(), s)?,
        None => Sobol::new(domain.dim())?,
    };
    Ok(seq
        .take_points(n)
        .iter()
        .map(|u| domain.from_unit(u))
        .collect())
}
