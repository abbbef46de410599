//! Confidence bounds, mean-variance acquisition scores and candidate-set
//! maximization.
//!
//! Every batch scorer evaluates the models once per candidate and combines
//! the resulting arrays; selection is a sequential lowest-index argmax, so
//! results do not depend on how the predictions were parallelized.

use crate::benchmarks::Domain;
use crate::error::{input, Result};
use crate::gp::Posterior;
use crate::sobol::Sobol;
use crate::variance::VarianceModelState;

/// Acquisition candidates: a Sobol grid over the unit cube and the same
/// points mapped into the domain.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub unit: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
}

impl CandidateSet {
    pub fn sobol(domain: &Domain, size: usize, seed: Option<u64>) -> Result<Self> {
        if size == 0 {
            return input("candidate set must be non-empty");
        }
        let mut seq = match seed {
            Some(s) => Sobol::scrambled(domain.dim(), s)?,
            None => Sobol::new(domain.dim())?,
        };
        let unit = seq.take_points(size);
        let points = unit.iter().map(|u| domain.from_unit(u)).collect();
        Ok(CandidateSet { unit, points })
    }

    pub fn size(&self) -> usize {
        self.unit.len()
    }
}

pub fn ucb_f(gp: &impl Posterior, beta: f64, x: &[f64]) -> Result<f64> {
    let (m, v) = gp.mean_var(x)?;
    Ok(m + beta * v.sqrt())
}

pub fn lcb_f(gp: &impl Posterior, beta: f64, x: &[f64]) -> Result<f64> {
    let (m, v) = gp.mean_var(x)?;
    Ok(m - beta * v.sqrt())
}

/// `ucb_f(x) - alpha rho^2(x)` with the true variance.
pub fn mv_ucb_known(
    gp: &impl Posterior,
    beta: f64,
    alpha: f64,
    rho_sq: impl Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<f64> {
    Ok(ucb_f(gp, beta, x)? - alpha * rho_sq(x))
}

/// Optimistic mean-variance bound `ucb_f(x) - alpha lcb_var(x)`.
pub fn mv_ucb(
    gp: &impl Posterior,
    var_model: &VarianceModelState,
    beta: f64,
    beta_var: f64,
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    let lcb_var = var_model.mean(x)? - beta_var * var_model.std(x)?;
    Ok(ucb_f(gp, beta, x)? - alpha * lcb_var)
}

/// Pessimistic mean-variance bound `lcb_f(x) - alpha ucb_var(x)`.
pub fn mv_lcb(
    gp: &impl Posterior,
    var_model: &VarianceModelState,
    beta: f64,
    beta_var: f64,
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    let ucb_var = var_model.mean(x)? + beta_var * var_model.std(x)?;
    Ok(lcb_f(gp, beta, x)? - alpha * ucb_var)
}

/// Posterior standard deviation of the variance model.
pub fn uncertainty_sampling_score(var_model: &VarianceModelState, x: &[f64]) -> Result<f64> {
    var_model.std(x)
}

/// First index attaining the maximum score. NaN scores never win.
pub fn argmax_index(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return input("cannot take argmax over an empty candidate set");
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    Ok(best)
}

/// Scores the unit-cube candidates and returns the domain point and index
/// of the best one.
pub fn argmax_candidates(
    score: impl Fn(&[f64]) -> Result<f64>,
    cands: &CandidateSet,
) -> Result<(Vec<f64>, usize)> {
    let scores = cands
        .unit
        .iter()
        .map(|u| score(u))
        .collect::<Result<Vec<_>>>()?;
    let i = argmax_index(&scores)?;
    Ok((cands.points[i].clone(), i))
}

/// Batch `(mean, std)` arrays of a posterior over many points.
pub fn mean_std_many(model: &impl Posterior, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (m, v) = model.mean_var_many(points)?;
    Ok((m, v.into_iter().map(f64::sqrt).collect()))
}

/// `mean + beta * std` elementwise.
pub fn upper(mean: &[f64], std: &[f64], beta: f64) -> Vec<f64> {
    mean.iter().zip(std).map(|(m, s)| m + beta * s).collect()
}

/// `mean - beta * std` elementwise.
pub fn lower(mean: &[f64], std: &[f64], beta: f64) -> Vec<f64> {
    mean.iter().zip(std).map(|(m, s)| m - beta * s).collect()
}

/// `a - alpha * b` elementwise.
pub fn penalize(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - alpha * y).collect()
}
