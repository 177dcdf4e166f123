//! Closed-form oracles for the compressed-sensing problems.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linear_map::Vector;
use crate::problem::{ProxCache, ProxTerm, SmoothTerm, SubgradientTerm};

/// Soft shrinkage `sign(w_i) max(0, |w_i| - t)`, the prox of `t ||.||_1`.
pub fn soft_threshold(w: &Vector, t: f64) -> Result<Vector> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {t}")));
    }
    Ok(w.map(|wi| wi.signum() * (wi.abs() - t).max(0.0)))
}

/// `0` at the origin, `x / ||x||` elsewhere.
pub fn norm_subgradient(x: &Vector) -> Vector {
    let n = x.norm();
    if n == 0.0 {
        Vector::zeros(x.len())
    } else {
        x / n
    }
}

/// Gradient `z - b` of `||z - b||^2 / 2`.
pub fn least_squares_grad(z: &Vector, b: &Vector) -> Result<Vector> {
    check_dim(b.len(), z.len())?;
    Ok(z - b)
}

/// Value `sum log(1 + (z_i - b_i)^2)` and gradient `2 r_i / (1 + r_i^2)`.
pub fn lorentzian_value_grad(z: &Vector, b: &Vector) -> Result<(f64, Vector)> {
    check_dim(b.len(), z.len())?;
    let r = z - b;
    let value = r.iter().map(|ri| (ri * ri).ln_1p()).sum();
    let grad = r.map(|ri| 2.0 * ri / (1.0 + ri * ri));
    Ok((value, grad))
}

/// `gamma (||x||_1 - alpha ||x||)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1L2Regularizer {
    pub gamma: f64,
    pub alpha: f64,
}

impl L1L2Regularizer {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need gamma > 0 and alpha >= 0, got gamma = {gamma}, alpha = {alpha}"
            )));
        }
        Ok(Self { gamma, alpha })
    }

    pub fn l1_part(&self) -> WeightedL1 {
        WeightedL1 { weight: self.gamma }
    }

    pub fn norm_part(&self) -> WeightedNorm {
        WeightedNorm {
            weight: self.gamma * self.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    LeastSquares,
    Lorentzian,
}

impl LossKind {
    /// Lipschitz modulus of the loss gradient.
    pub fn lipschitz(self) -> f64 {
        match self {
            LossKind::LeastSquares => 1.0,
            LossKind::Lorentzian => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least-squares",
            LossKind::Lorentzian => "lorentzian",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "least-squares" | "ls" | "least_squares" => Ok(LossKind::LeastSquares),
            "lorentzian" => Ok(LossKind::Lorentzian),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// Data-fidelity term `phi(z)` with target `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub kind: LossKind,
    pub target: Vector,
}

impl Loss {
    pub fn new(kind: LossKind, target: Vector) -> Self {
        Self { kind, target }
    }

    pub fn lipschitz(&self) -> f64 {
        self.kind.lipschitz()
    }
}

impl SmoothTerm for Loss {
    fn value(&self, z: &Vector) -> f64 {
        match self.kind {
            LossKind::LeastSquares => 0.5 * (z - &self.target).norm_squared(),
            LossKind::Lorentzian => (z - &self.target).iter().map(|r| (r * r).ln_1p()).sum(),
        }
    }

    fn gradient(&self, z: &Vector) -> Vector {
        match self.kind {
            LossKind::LeastSquares => z - &self.target,
            LossKind::Lorentzian => (z - &self.target).map(|r| 2.0 * r / (1.0 + r * r)),
        }
    }
}

/// `weight ||x||_1`, with soft shrinkage as its prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedL1 {
    pub weight: f64,
}

impl ProxTerm for WeightedL1 {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.lp_norm(1)
    }

    fn prox(&self, w: &Vector, tau: f64, _cache: &mut ProxCache) -> Result<Vector> {
        soft_threshold(w, self.weight * tau)
    }
}

/// `weight ||x||`, convex, with the origin selection `0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub weight: f64,
}

impl SubgradientTerm for WeightedNorm {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm()
    }

    fn subgradient(&self, x: &Vector) -> Vector {
        norm_subgradient(x) * self.weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&v(&[2.0, -0.5, 0.1]), 1.0).unwrap(), v(&[1.0, 0.0, 0.0]));
        let w = v(&[2.0, -0.5, 0.1]);
        assert_eq!(soft_threshold(&w, 0.0).unwrap(), w);
        assert!(soft_threshold(&w, -1.0).is_err());
        assert_eq!(soft_threshold(&v(&[-3.0]), 1.0).unwrap(), v(&[-2.0]));
    }

    #[test]
    fn norm_subgradient_examples() {
        assert_eq!(norm_subgradient(&Vector::zeros(3)), Vector::zeros(3));
        let g = norm_subgradient(&v(&[3.0, 4.0]));
        assert!((g - v(&[0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn least_squares_examples() {
        let b = v(&[1.0, 2.0]);
        assert_eq!(least_squares_grad(&b, &b).unwrap(), Vector::zeros(2));
        assert_eq!(least_squares_grad(&v(&[2.0, 2.0]), &b).unwrap(), v(&[1.0, 0.0]));
        assert!(least_squares_grad(&v(&[1.0]), &b).is_err());
    }

    #[test]
    fn lorentzian_examples() {
        let b = v(&[0.5, -1.0]);
        let (val, g) = lorentzian_value_grad(&b, &b).unwrap();
        assert_eq!(val, 0.0);
        assert_eq!(g, Vector::zeros(2));
        let (val, g) = lorentzian_value_grad(&v(&[1.5, -1.0]), &b).unwrap();
        assert!((val - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        assert!(lorentzian_value_grad(&v(&[1.0]), &b).is_err());
    }

    #[test]
    fn loss_term_matches_free_functions() {
        let b = v(&[0.1, 0.2, -0.3]);
        let z = v(&[1.0, -2.0, 0.5]);
        let lor = Loss::new(LossKind::Lorentzian, b.clone());
        let (val, g) = lorentzian_value_grad(&z, &b).unwrap();
        assert_eq!(lor.value(&z), val);
        assert_eq!(lor.gradient(&z), g);
        let ls = Loss::new(LossKind::LeastSquares, b.clone());
        assert_eq!(ls.gradient(&z), least_squares_grad(&z, &b).unwrap());
    }

    #[test]
    fn regularizer_validation() {
        assert!(L1L2Regularizer::new(0.0, 1.0).is_err());
        assert!(L1L2Regularizer::new(0.1, -1.0).is_err());
        let r = L1L2Regularizer::new(0.1, 1.0).unwrap();
        assert_eq!(r.norm_part().weight, 0.1);
    }

    #[test]
    fn loss_kind_parses() {
        assert_eq!("least-squares".parse::<LossKind>().unwrap(), LossKind::LeastSquares);
        assert_eq!("Lorentzian".parse::<LossKind>().unwrap(), LossKind::Lorentzian);
        assert!("huber".parse::<LossKind>().is_err());
    }
}
