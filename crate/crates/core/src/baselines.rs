//! Comparison methods sharing the oracles of [`crate::solver`]: the generalized
//! proximal point algorithm (GPPA) and the proximal DC algorithm with
//! extrapolation (pDCAe).

use crate::error::{Error, Result};
use crate::linear_map::Vector;
use crate::problem::ProblemSpec;
use crate::solver::{drive, DriveSettings, ExtrapolationState, StepOutcome};
use crate::trace::{check_decrease, SolveReport};

#[derive(Debug, Clone)]
pub struct BaselineParams {
    pub step_tau: f64,
    pub max_iter: usize,
    pub stop_rel_tol: f64,
    /// pDCAe only: FISTA-type `theta_n`. Ignored by GPPA.
    pub extrapolation: bool,
    pub restart_period: Option<usize>,
    pub keep_iterates: Option<bool>,
}

impl BaselineParams {
    /// GPPA step `0.8 / (ell lambda_max(A*A))`.
    pub fn gppa(spec: &ProblemSpec) -> Self {
        Self::with_tau(0.8 / (spec.lipschitz * spec.gram_norm()))
    }

    /// pDCAe step `1 / (ell lambda_max(A*A))` with restart every 50 iterations.
    pub fn pdcae(spec: &ProblemSpec) -> Self {
        Self::with_tau(1.0 / (spec.lipschitz * spec.gram_norm()))
    }

    pub fn with_tau(step_tau: f64) -> Self {
        Self {
            step_tau,
            max_iter: 3000,
            stop_rel_tol: 1e-8,
            extrapolation: true,
            restart_period: Some(50),
            keep_iterates: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_tau > 0.0) || !self.step_tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive and finite, got {}",
                self.step_tau
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
}

/// `x_{n+1} = prox_{tau (f + iota_C)}(x_n - tau grad(h o A)(x_n) + tau g_n)`.
///
/// The trace's descent check is plain monotonicity of `F`.
pub fn gppa_solve(spec: &ProblemSpec, x0: &Vector, params: &BaselineParams) -> Result<SolveReport> {
    params.validate()?;
    let tau = params.step_tau;
    let driven = drive(spec, x0, settings(params, 0.0), |_, x, _, cache| {
        let mut w = x - spec.smooth_gradient(x) * tau;
        w.axpy(tau, &spec.g.subgradient(x), 1.0);
        Ok(StepOutcome {
            x: spec.f.prox(&w, tau, cache)?,
            lambda: 0.0,
            mu: 0.0,
            tau,
        })
    })?;
    let check = check_decrease(&driven.trace, 0.0, 0.0);
    Ok(finish(driven, Some(check.max_violation)))
}

/// `y_n = x_n + theta_n (x_n - x_{n-1})`,
/// `x_{n+1} = prox_{tau f}(y_n - tau (grad(h o A)(y_n) - g_n))` with `g_n` taken at `x_n`.
///
/// `theta_n = (kappa_{n-1} - 1) / kappa_n` with the same restarted recursion as
/// the extrapolated solver; zero when extrapolation is off. Convexity of `f`,
/// `g` and `h o A` is the caller's responsibility.
pub fn pdcae_solve(spec: &ProblemSpec, x0: &Vector, params: &BaselineParams) -> Result<SolveReport> {
    params.validate()?;
    let tau = params.step_tau;
    let mut state = ExtrapolationState::default();
    let driven = drive(spec, x0, settings(params, 0.0), |_, x, x_prev, cache| {
        let theta = if params.extrapolation {
            let t = state.ratio();
            state = state.advance(params.restart_period);
            t
        } else {
            0.0
        };
        let y = x + (x - x_prev) * theta;
        let mut w = &y - spec.smooth_gradient(&y) * tau;
        w.axpy(tau, &spec.g.subgradient(x), 1.0);
        Ok(StepOutcome {
            x: spec.f.prox(&w, tau, cache)?,
            lambda: theta,
            mu: 0.0,
            tau,
        })
    })?;
    let violation = if params.extrapolation {
        None
    } else {
        Some(check_decrease(&driven.trace, 0.0, 0.0).max_violation)
    };
    Ok(finish(driven, violation))
}

fn settings(params: &BaselineParams, lyapunov_weight: f64) -> DriveSettings {
    DriveSettings {
        max_iter: params.max_iter,
        stop_rel_tol: params.stop_rel_tol,
        keep_iterates: params.keep_iterates,
        lyapunov_weight,
    }
}

fn finish(driven: crate::solver::Driven, violation: Option<f64>) -> SolveReport {
    SolveReport {
        objective: driven.trace.records.last().map(|r| r.objective).unwrap_or(f64::NAN),
        x: driven.x,
        iterations: driven.iterations,
        status: driven.status,
        trace: driven.trace,
        max_lyapunov_violation: violation,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linear_map::LinearMap;
    use crate::problem::{HalfSquaredNorm, Zero};

    #[test]
    fn gppa_on_quadratic_is_scaling() {
        let spec = ProblemSpec::new(
            Arc::new(Zero),
            Arc::new(HalfSquaredNorm),
            Arc::new(Zero),
            LinearMap::identity(3),
            1.0,
        )
        .unwrap();
        let params = BaselineParams {
            max_iter: 4,
            stop_rel_tol: 0.0,
            keep_iterates: Some(true),
            ..BaselineParams::with_tau(0.25)
        };
        let x0 = Vector::from_vec(vec![1.0, 2.0, -1.0]);
        let report = gppa_solve(&spec, &x0, &params).unwrap();
        let iterates = report.trace.iterates.unwrap();
        for (k, x) in iterates.iter().enumerate() {
            assert!((x - &x0 * 0.75f64.powi(k as i32)).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(BaselineParams::with_tau(0.0).validate().is_err());
        assert!(BaselineParams::with_tau(f64::INFINITY).validate().is_err());
    }
}
