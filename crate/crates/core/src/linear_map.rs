//! Linear maps `A: R^d -> R^m` and their spectral norm.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Seed of the power-iteration start vector.
const POWER_ITERATION_SEED: u64 = 0x5eed_0f_a11;

/// A linear operator together with its adjoint.
#[derive(Debug, Clone)]
pub enum LinearMap {
    /// The identity on `R^dim`; its norm is exactly one.
    Identity(usize),
    /// `x -> diag(d) x`.
    Diagonal(Vector),
    /// A dense `m x d` matrix.
    Dense(Matrix),
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap::Identity(dim)
    }

    pub fn dense(matrix: Matrix) -> Self {
        LinearMap::Dense(matrix)
    }

    pub fn input_dim(&self) -> usize {
        match self {
            LinearMap::Identity(d) => *d,
            LinearMap::Diagonal(v) => v.len(),
            LinearMap::Dense(m) => m.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            LinearMap::Identity(d) => *d,
            LinearMap::Diagonal(v) => v.len(),
            LinearMap::Dense(m) => m.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, LinearMap::Identity(_))
    }

    pub fn as_matrix(&self) -> Option<&Matrix> {
        match self {
            LinearMap::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// `A x`
    pub fn apply(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.input_dim());
        match self {
            LinearMap::Identity(_) => x.clone(),
            LinearMap::Diagonal(d) => d.component_mul(x),
            LinearMap::Dense(m) => m * x,
        }
    }

    /// `A* y`
    pub fn adjoint(&self, y: &Vector) -> Vector {
        debug_assert_eq!(y.len(), self.output_dim());
        match self {
            LinearMap::Identity(_) => y.clone(),
            LinearMap::Diagonal(d) => d.component_mul(y),
            LinearMap::Dense(m) => m.tr_mul(y),
        }
    }

    pub fn try_apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.apply(x))
    }

    pub fn try_adjoint(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.output_dim(), y.len())?;
        Ok(self.adjoint(y))
    }
}

/// Estimates `||A||` by power iteration on `A* A`, returning a value inflated by
/// `1 + tol` so that it can be used as an upper bound in step-size rules.
///
/// The iteration stops once the eigen-residual `||A*A v - rho v||` of the unit
/// iterate `v` drops below `tol * rho`, which places an eigenvalue of `A*A`
/// within relative distance `tol` of the Rayleigh quotient `rho`. The start
/// vector is drawn from a fixed-seed generator, so the result is deterministic.
///
/// The identity map short-circuits to exactly `1.0`.
pub fn spectral_norm(map: &LinearMap, tol: f64, max_iter: usize) -> Result<f64> {
    if map.input_dim() == 0 || map.output_dim() == 0 {
        return Err(Error::InvalidArgument("linear map has a zero dimension".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if map.is_identity() {
        return Ok(1.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = Vector::from_fn(map.input_dim(), |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();

    let mut rho = 0.0;
    for _ in 0..max_iter {
        let av = map.apply(&v);
        let w = map.adjoint(&av);
        rho = av.norm_squared();
        if rho == 0.0 {
            // A v = 0 for a generic v only when A = 0.
            return Ok(0.0);
        }
        let residual = (&w - &v * rho).norm();
        if residual <= tol * rho {
            return Ok(rho.sqrt() * (1.0 + tol));
        }
        let wn = w.norm();
        v = w / wn;
    }
    Err(Error::SpectralNormNotConverged {
        iterations: max_iter,
        last_estimate: rho.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norm_is_exact() {
        let map = LinearMap::identity(5);
        assert_eq!(spectral_norm(&map, 1e-8, 10).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_norm() {
        let map = LinearMap::Diagonal(Vector::from_vec(vec![3.0, 1.0, 0.5]));
        let tol = 1e-9;
        let s = spectral_norm(&map, tol, 10_000).unwrap();
        assert!((s - 3.0).abs() <= 3.0 * 2.0 * tol, "{s}");
        assert!(s >= 3.0);
    }

    #[test]
    fn zero_matrix_has_zero_norm() {
        let map = LinearMap::dense(Matrix::zeros(3, 4));
        assert_eq!(spectral_norm(&map, 1e-6, 10).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let map = LinearMap::identity(2);
        assert!(spectral_norm(&map, 0.0, 10).is_err());
    }

    #[test]
    fn reports_last_estimate_on_cap() {
        let map = LinearMap::Diagonal(Vector::from_vec(vec![1.0, 0.999_999, 0.5]));
        match spectral_norm(&map, 1e-14, 3) {
            Err(Error::SpectralNormNotConverged { last_estimate, .. }) => {
                assert!(last_estimate > 0.5 && last_estimate <= 1.0)
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
