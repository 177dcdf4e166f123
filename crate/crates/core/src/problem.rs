//! Problem data model for `min_{x in C} f(x) + h(Ax) - g(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linear_map::{spectral_norm, LinearMap, Vector};

/// Tolerance used when certifying `||A||` at problem build.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Iteration cap for the power method at problem build.
pub const NORM_MAX_ITER: usize = 200_000;

/// Per-solve scratch storage handed to the prox oracle.
///
/// Oracles that solve their subproblem iteratively keep warm-start data here.
/// A fresh cache is created for every solve, so nothing leaks between runs.
#[derive(Debug, Clone, Default)]
pub struct ProxCache {
    pub primal: Option<Vector>,
    pub slack: Option<Vector>,
    pub dual: Option<Vector>,
}

/// The `f + iota_C` part: evaluated, and minimized through its prox.
pub trait ProxTerm: Send + Sync {
    /// `f(x)`; the indicator of `C` is not included.
    fn value(&self, x: &Vector) -> f64;

    /// One minimizer of `f(x) + iota_C(x) + ||x - w||^2 / (2 tau)`.
    fn prox(&self, w: &Vector, tau: f64, cache: &mut ProxCache) -> Result<Vector>;

    /// Membership test for `C`.
    fn contains(&self, _x: &Vector) -> bool {
        true
    }
}

/// The smooth `h`, composed with `A` by the solver.
pub trait SmoothTerm: Send + Sync {
    fn value(&self, z: &Vector) -> f64;
    fn gradient(&self, z: &Vector) -> Vector;
}

/// The subtracted term `g`, accessed through a limiting subgradient selection.
pub trait SubgradientTerm: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn subgradient(&self, x: &Vector) -> Vector;
}

/// `f = 0`, `h = 0` or `g = 0`, depending on the slot it fills.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxTerm for Zero {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, w: &Vector, _tau: f64, _cache: &mut ProxCache) -> Result<Vector> {
        Ok(w.clone())
    }
}

impl SmoothTerm for Zero {
    fn value(&self, _z: &Vector) -> f64 {
        0.0
    }
    fn gradient(&self, z: &Vector) -> Vector {
        Vector::zeros(z.len())
    }
}

impl SubgradientTerm for Zero {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn subgradient(&self, x: &Vector) -> Vector {
        Vector::zeros(x.len())
    }
}

/// `h(z) = ||z||^2 / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSquaredNorm;

impl SmoothTerm for HalfSquaredNorm {
    fn value(&self, z: &Vector) -> f64 {
        0.5 * z.norm_squared()
    }
    fn gradient(&self, z: &Vector) -> Vector {
        z.clone()
    }
}

/// Oracles and constants describing one instance of the problem.
///
/// Immutable once built; share it across concurrent solves via `Arc`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub f: Arc<dyn ProxTerm>,
    pub h: Arc<dyn SmoothTerm>,
    pub g: Arc<dyn SubgradientTerm>,
    pub map: LinearMap,
    /// Lipschitz modulus `ell` of the gradient of `h`.
    pub lipschitz: f64,
    /// Weak convexity modulus `beta` of `g`; zero when `g` is convex.
    pub weak_convexity: f64,
    /// Certified upper bound on `||A||`.
    pub norm_a: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dims", &(self.map.input_dim(), self.map.output_dim()))
            .field("lipschitz", &self.lipschitz)
            .field("weak_convexity", &self.weak_convexity)
            .field("norm_a", &self.norm_a)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Builds a spec with `beta = 0` and `||A||` computed by [`spectral_norm`].
    pub fn new(
        f: Arc<dyn ProxTerm>,
        h: Arc<dyn SmoothTerm>,
        g: Arc<dyn SubgradientTerm>,
        map: LinearMap,
        lipschitz: f64,
    ) -> Result<Self> {
        let norm_a = spectral_norm(&map, NORM_TOLERANCE, NORM_MAX_ITER)?;
        Self::with_norm(f, h, g, map, lipschitz, norm_a)
    }

    /// Builds a spec with a caller-supplied bound on `||A||`.
    pub fn with_norm(
        f: Arc<dyn ProxTerm>,
        h: Arc<dyn SmoothTerm>,
        g: Arc<dyn SubgradientTerm>,
        map: LinearMap,
        lipschitz: f64,
        norm_a: f64,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0) || !(norm_a >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "constants must be nonnegative (ell = {lipschitz}, |A| = {norm_a})"
            )));
        }
        Ok(Self {
            f,
            h,
            g,
            map,
            lipschitz,
            weak_convexity: 0.0,
            norm_a,
        })
    }

    pub fn weak_convexity(mut self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
        }
        self.weak_convexity = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    /// `F(x) = f(x) + h(Ax) - g(x)`.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.f.value(x) + self.h.value(&self.map.apply(x)) - self.g.value(x)
    }

    /// `A* grad h(A x)`.
    pub fn smooth_gradient(&self, x: &Vector) -> Vector {
        self.map.adjoint(&self.h.gradient(&self.map.apply(x)))
    }

    /// `lambda_max(A* A)` bound, i.e. `||A||^2`.
    pub fn gram_norm(&self) -> f64 {
        self.norm_a * self.norm_a
    }
}

/// How the step size `tau_n` is chosen.
#[derive(Clone, Default)]
pub enum TauRule {
    /// `tau_n` equal to [`tau_upper_bound`] at every iteration.
    #[default]
    UpperBound,
    /// User sequence `n -> tau_n`; every value must lie in `(0, bound]`.
    Sequence(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauRule::UpperBound => f.write_str("UpperBound"),
            TauRule::Sequence(_) => f.write_str("Sequence(..)"),
        }
    }
}

impl TauRule {
    pub fn constant(tau: f64) -> Self {
        TauRule::Sequence(Arc::new(move |_| tau))
    }
}

/// Schedule for the `v_n` extrapolation coefficient `mu_n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MuSchedule {
    /// `mu_n = mu_bar tau_n (kappa_{n-1} - 1) / kappa_n`.
    #[default]
    Kappa,
    /// `mu_n = mu_bar tau_n` at every iteration.
    Max,
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    pub lambda_bar: f64,
    pub mu_bar: f64,
    pub delta: f64,
    /// Reset `kappa_{n-1} = kappa_n = 1` every this many iterations.
    pub restart_period: Option<usize>,
    pub max_iter: usize,
    pub stop_rel_tol: f64,
    pub tau_rule: TauRule,
    pub mu_schedule: MuSchedule,
    /// Store every iterate in the trace. `None` stores them when `d <= 2048`.
    pub keep_iterates: Option<bool>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda_bar: 0.1,
            mu_bar: 0.01,
            delta: 5e-25,
            restart_period: Some(50),
            max_iter: 3000,
            stop_rel_tol: 1e-8,
            tau_rule: TauRule::UpperBound,
            mu_schedule: MuSchedule::Kappa,
            keep_iterates: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.lambda_bar >= 0.0) || !(self.mu_bar >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda_bar and mu_bar must be nonnegative, got {} and {}",
                self.lambda_bar, self.mu_bar
            )));
        }
        if !(self.stop_rel_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stop_rel_tol must be nonnegative, got {}",
                self.stop_rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.restart_period == Some(0) {
            return Err(Error::InvalidArgument("restart period must be positive".into()));
        }
        Ok(())
    }

    /// Lyapunov weight `c = (ell ||A||^2 lambda_bar + mu_bar) / 2`.
    pub fn lyapunov_weight(&self, spec: &ProblemSpec) -> f64 {
        0.5 * (spec.lipschitz * spec.gram_norm() * self.lambda_bar + self.mu_bar)
    }
}

/// Largest admissible step, `1 / (beta + 2 delta + ell ||A||^2 (2 lambda_bar + 1) + 2 mu_bar)`.
pub fn tau_upper_bound(spec: &ProblemSpec, params: &SolverParams) -> Result<f64> {
    tau_bound_from_constants(
        spec.weak_convexity,
        params.delta,
        spec.lipschitz,
        spec.norm_a,
        params.lambda_bar,
        params.mu_bar,
    )
}

/// [`tau_upper_bound`] on raw constants.
pub fn tau_bound_from_constants(
    beta: f64,
    delta: f64,
    lipschitz: f64,
    norm_a: f64,
    lambda_bar: f64,
    mu_bar: f64,
) -> Result<f64> {
    let denom = beta
        + 2.0 * delta
        + lipschitz * norm_a * norm_a * (2.0 * lambda_bar + 1.0)
        + 2.0 * mu_bar;
    if denom > 0.0 && denom.is_finite() {
        Ok(1.0 / denom)
    } else {
        Err(Error::DegenerateStep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_bound_least_squares_setting() {
        let tau = tau_bound_from_constants(0.0, 5e-25, 1.0, 1.0, 0.1, 0.01).unwrap();
        assert!((tau - 1.0 / 1.22).abs() < 1e-15);
        assert!((tau - 0.819_672_131_147_541).abs() < 1e-12);
    }

    #[test]
    fn tau_bound_only_delta() {
        assert_eq!(tau_bound_from_constants(0.0, 0.5, 0.0, 0.0, 0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn tau_bound_opf_setting() {
        let ell = 2.0 * 0.246;
        let tau = tau_bound_from_constants(0.0, 5e-25, ell, 1.0, 0.1, 0.01).unwrap();
        let expected = 1.0 / (0.492 * 1.2 + 0.02);
        assert!((tau - expected).abs() < 1e-14);
        assert!((tau - 1.638_27).abs() < 1e-5);
    }

    #[test]
    fn tau_bound_degenerate() {
        assert!(matches!(
            tau_bound_from_constants(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Err(Error::DegenerateStep)
        ));
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        let bad = SolverParams { delta: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverParams { lambda_bar: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverParams { restart_period: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_terms() {
        let x = Vector::from_vec(vec![1.0, -2.0]);
        let mut cache = ProxCache::default();
        assert_eq!(ProxTerm::prox(&Zero, &x, 0.3, &mut cache).unwrap(), x);
        assert_eq!(SmoothTerm::gradient(&Zero, &x), Vector::zeros(2));
        assert_eq!(SubgradientTerm::subgradient(&Zero, &x), Vector::zeros(2));
    }
}
