//! Stationary and linear covariance functions with ARD lengthscales.
//!
//! All kernels are evaluated on inputs already normalized to the unit cube.
//! With `output_scale = 1` the stationary kernels satisfy `k(x, x) = 1` and
//! `0 < k(x, x') <= 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    #[serde(default = "default_output_scale")]
    pub output_scale: f64,
}

fn default_output_scale() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, output_scale: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            lengthscales,
            output_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit output scale, the same lengthscale in every dimension.
    pub fn isotropic(family: KernelFamily, dim: usize, lengthscale: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return input("kernel needs at least one lengthscale");
        }
        if let Some(l) = self
            .lengthscales
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return input(format!("lengthscales must be positive and finite, got {l}"));
        }
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return input(format!(
                "output_scale must be positive and finite, got {}",
                self.output_scale
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return input(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(())
    }

    /// Evaluates without dimension checks; callers guarantee matching lengths.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let base = match self.family {
            KernelFamily::SquaredExponential => {
                let r2 = self.scaled_sq_dist(x, y);
                (-0.5 * r2).exp()
            }
            KernelFamily::Matern52 => {
                let r = self.scaled_sq_dist(x, y).sqrt();
                let s5r = 5f64.sqrt() * r;
                (1.0 + s5r + 5.0 * r * r / 3.0) * (-s5r).exp()
            }
            KernelFamily::Linear => {
                // Max squared norm over the unit cube is the dimension.
                let norm = (self.dim() as f64).max(1.0);
                x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / norm
            }
        };
        self.output_scale * base
    }

    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }
}

/// `k(x, x')`.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.check_dim(x)?;
    spec.check_dim(y)?;
    Ok(spec.eval_unchecked(x, y))
}

/// Gram matrix `K_ij = k(x_i, x_j)`.
pub fn kernel_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    for p in points {
        spec.check_dim(p)?;
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-covariance vector `[k(x_1, x), ..., k(x_n, x)]`.
pub fn kernel_vector(spec: &KernelSpec, points: &[Vec<f64>], x: &[f64]) -> Result<DVector<f64>> {
    spec.check_dim(x)?;
    for p in points {
        spec.check_dim(p)?;
    }
    Ok(DVector::from_iterator(
        points.len(),
        points.iter().map(|p| spec.eval_unchecked(p, x)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(dim: usize) -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::SquaredExponential, dim, 1.0).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    #[test]
    fn se_identity_is_one() {
        assert_eq!(eval_kernel(&se(2), &[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
    }

    #[test]
    fn se_unit_distance() {
        let v = eval_kernel(&se(1), &[0.0], &[1.0]).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn matern_zero_distance() {
        let k = KernelSpec::new(KernelFamily::Matern52, vec![0.07, 3.0], 1.0).unwrap();
        assert_eq!(eval_kernel(&k, &[0.2, 0.9], &[0.2, 0.9]).unwrap(), 1.0);
    }

    #[test]
    fn matern_closed_form() {
        let k = KernelSpec::new(KernelFamily::Matern52, vec![0.5], 1.0).unwrap();
        // r = 0.3 / 0.5
        let r: f64 = 0.6;
        let expect = (1.0 + 5f64.sqrt() * r + 5.0 * r * r / 3.0) * (-(5f64.sqrt()) * r).exp();
        let v = eval_kernel(&k, &[0.1], &[0.4]).unwrap();
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn linear_normalized_on_unit_cube() {
        let k = KernelSpec::new(KernelFamily::Linear, vec![1.0; 3], 1.0).unwrap();
        let one = [1.0, 1.0, 1.0];
        assert!((eval_kernel(&k, &one, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        assert!(eval_kernel(&se(2), &[0.0], &[0.0, 1.0]).is_err());
        assert!(kernel_matrix(&se(2), &[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(kernel_vector(&se(2), &[vec![0.0, 1.0]], &[1.0]).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![0.0], 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], -1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![], 1.0).is_err());
    }

    #[test]
    fn single_point_matrix() {
        let k = kernel_matrix(&se(1), &[vec![0.4]]).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn duplicated_point_matrix_is_all_ones() {
        let k = kernel_matrix(&se(2), &[vec![0.4, 0.1], vec![0.4, 0.1]]).unwrap();
        assert!(k.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn matrix_and_vector_match_pairwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = KernelSpec::new(KernelFamily::Matern52, vec![0.3, 0.7, 1.2], 1.7).unwrap();
        let pts = random_points(&mut rng, 5, 3);
        let k = kernel_matrix(&spec, &pts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let v = eval_kernel(&spec, &pts[i], &pts[j]).unwrap();
                assert!((k[(i, j)] - v).abs() < 1e-12);
            }
        }
        let four = &pts[..4];
        let x = &pts[4];
        let kv = kernel_vector(&spec, four, x).unwrap();
        for i in 0..4 {
            assert!((kv[i] - eval_kernel(&spec, &four[i], x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_edge_cases() {
        let spec = se(1);
        assert_eq!(kernel_vector(&spec, &[vec![0.2]], &[0.2]).unwrap()[0], 1.0);
        assert_eq!(kernel_vector(&spec, &[], &[0.2]).unwrap().len(), 0);
    }

    #[test]
    fn gram_is_psd_with_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            for n in [2, 10, 50] {
                let d = 1 + n % 3;
                let ls: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..2.0)).collect();
                let spec = KernelSpec::new(family, ls, 1.0).unwrap();
                let pts = random_points(&mut rng, n, d);
                let k = kernel_matrix(&spec, &pts).unwrap() + DMatrix::identity(n, n) * 1e-8;
                let min_eig = k.symmetric_eigenvalues().min();
                assert!(min_eig >= 0.0, "{family:?} n={n} min eig {min_eig}");
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in proptest::collection::vec(0.0f64..1.0, 3),
            b in proptest::collection::vec(0.0f64..1.0, 3),
            ls in proptest::collection::vec(0.01f64..10.0, 3),
            matern in any::<bool>(),
        ) {
            let family = if matern { KernelFamily::Matern52 } else { KernelFamily::SquaredExponential };
            let spec = KernelSpec::new(family, ls, 1.0).unwrap();
            let kab = eval_kernel(&spec, &a, &b).unwrap();
            let kba = eval_kernel(&spec, &b, &a).unwrap();
            prop_assert_eq!(kab, kba);
            prop_assert!(kab <= 1.0);
            prop_assert!(kab >= 0.0);
            prop_assert_eq!(eval_kernel(&spec, &a, &a).unwrap(), 1.0);
        }
    }
}
