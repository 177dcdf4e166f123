//! Proximal subgradient iteration with extrapolation.
//!
//! Each iteration forms two extrapolated points from the last two iterates,
//! `u_n = x_n + lambda_n (x_n - x_{n-1})` for the gradient of the smooth part
//! and `v_n = x_n + mu_n (x_n - x_{n-1})` as the prox anchor, then sets
//!
//! ```text
//! x_{n+1} = prox_{tau_n (f + iota_C)}(v_n - tau_n A* grad h(A u_n) + tau_n g_n)
//! ```
//!
//! with `g_n` a subgradient of `g` at `x_n`. The coefficients follow a
//! FISTA-style `kappa` recursion with periodic restart.

use std::time::Instant;

use crate::error::{check_dim, Error, Result};
use crate::linear_map::Vector;
use crate::problem::{tau_upper_bound, MuSchedule, ProblemSpec, ProxCache, SolverParams, TauRule};
use crate::trace::{check_decrease, IterRecord, IterateTrace, SolveReport, Status};

/// Iterates are kept in the trace by default up to this dimension.
pub const KEEP_ITERATES_MAX_DIM: usize = 2048;

/// `(kappa_{n-1}, kappa_n)` plus the restart counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationState {
    pub kappa_prev: f64,
    pub kappa_curr: f64,
    pub iter_since_restart: usize,
}

impl Default for ExtrapolationState {
    fn default() -> Self {
        Self {
            kappa_prev: 1.0,
            kappa_curr: 1.0,
            iter_since_restart: 0,
        }
    }
}

impl ExtrapolationState {
    /// `(kappa_{n-1} - 1) / kappa_n`, always in `[0, 1)`.
    pub fn ratio(&self) -> f64 {
        (self.kappa_prev - 1.0) / self.kappa_curr
    }

    /// Shifts to `(kappa_n, kappa_{n+1})`, resetting both to one once
    /// `restart_period` advances have happened since the last reset.
    pub fn advance(self, restart_period: Option<usize>) -> Self {
        let next = 0.5 * (1.0 + (1.0 + 4.0 * self.kappa_curr * self.kappa_curr).sqrt());
        let count = self.iter_since_restart + 1;
        match restart_period {
            Some(p) if count >= p => Self::default(),
            _ => Self {
                kappa_prev: self.kappa_curr,
                kappa_curr: next,
                iter_since_restart: count,
            },
        }
    }
}

/// `lambda_n = lambda_bar r`, `mu_n = mu_bar tau_n r` with `r = (kappa_{n-1} - 1) / kappa_n`.
///
/// Returns the coefficients for the current state and the state for the next
/// iteration.
pub fn extrapolation_coeffs(
    state: ExtrapolationState,
    lambda_bar: f64,
    mu_bar: f64,
    tau: f64,
    restart_period: Option<usize>,
) -> (f64, f64, ExtrapolationState) {
    let r = state.ratio();
    (lambda_bar * r, mu_bar * tau * r, state.advance(restart_period))
}

/// One update `x_n -> x_{n+1}` for given coefficients and subgradient `g_n`.
#[allow(clippy::too_many_arguments)]
pub fn psg_step(
    spec: &ProblemSpec,
    x: &Vector,
    x_prev: &Vector,
    g: &Vector,
    lambda: f64,
    mu: f64,
    tau: f64,
    cache: &mut ProxCache,
) -> Result<Vector> {
    check_dim(spec.dim(), x.len())?;
    check_dim(spec.dim(), x_prev.len())?;
    check_dim(spec.dim(), g.len())?;
    let diff = x - x_prev;
    let u = x + &diff * lambda;
    let v = x + &diff * mu;
    let mut w = v;
    w.axpy(-tau, &spec.smooth_gradient(&u), 1.0);
    w.axpy(tau, g, 1.0);
    spec.f.prox(&w, tau, cache)
}

/// What a solver's update produced at one iteration.
pub(crate) struct StepOutcome {
    pub x: Vector,
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
}

pub(crate) struct DriveSettings {
    pub max_iter: usize,
    pub stop_rel_tol: f64,
    pub keep_iterates: Option<bool>,
    pub lyapunov_weight: f64,
}

pub(crate) struct Driven {
    pub x: Vector,
    pub iterations: usize,
    pub status: Status,
    pub trace: IterateTrace,
}

/// Shared outer loop: feasibility of `x_0`, tracing, finiteness and the
/// relative-step stopping rule.
///
/// The stop test `||x_{n+1} - x_n|| < tol ||x_n||` falls back to the absolute
/// step when `x_n = 0`.
pub(crate) fn drive<S>(spec: &ProblemSpec, x0: &Vector, settings: DriveSettings, mut step: S) -> Result<Driven>
where
    S: FnMut(usize, &Vector, &Vector, &mut ProxCache) -> Result<StepOutcome>,
{
    check_dim(spec.dim(), x0.len())?;
    if !spec.f.contains(x0) {
        return Err(Error::InfeasibleStart);
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let started = Instant::now();
    let keep = settings
        .keep_iterates
        .unwrap_or(spec.dim() <= KEEP_ITERATES_MAX_DIM);
    let c = settings.lyapunov_weight;

    let f0 = spec.objective(x0);
    let mut trace = IterateTrace {
        records: Vec::with_capacity(settings.max_iter.min(4096) + 1),
        iterates: keep.then(|| vec![x0.clone()]),
        lyapunov_weight: c,
        elapsed: Default::default(),
    };
    trace.records.push(IterRecord {
        objective: f0,
        lyapunov: f0,
        step_norm: 0.0,
        lambda: 0.0,
        mu: 0.0,
        tau: 0.0,
    });

    let mut cache = ProxCache::default();
    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut status = Status::MaxIter;
    let mut iterations = 0;

    for n in 0..settings.max_iter {
        let out = step(n, &x, &x_prev, &mut cache).map_err(|e| match e {
            Error::Prox { .. } => e,
            other => Error::Prox {
                iteration: n,
                source: Box::new(other),
            },
        })?;
        if out.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: n + 1 });
        }
        let step_norm = (&out.x - &x).norm();
        let objective = spec.objective(&out.x);
        if !objective.is_finite() {
            return Err(Error::NonFinite { iteration: n + 1 });
        }
        trace.records.push(IterRecord {
            objective,
            lyapunov: objective + c * step_norm * step_norm,
            step_norm,
            lambda: out.lambda,
            mu: out.mu,
            tau: out.tau,
        });
        if let Some(iterates) = trace.iterates.as_mut() {
            iterates.push(out.x.clone());
        }
        iterations = n + 1;

        let scale = x.norm();
        let stop = if scale > 0.0 {
            step_norm < settings.stop_rel_tol * scale
        } else {
            step_norm < settings.stop_rel_tol
        };
        x_prev = std::mem::replace(&mut x, out.x);
        if stop {
            status = Status::Converged;
            break;
        }
    }
    trace.elapsed = started.elapsed();
    Ok(Driven {
        x,
        iterations,
        status,
        trace,
    })
}

/// Runs the extrapolated proximal subgradient method from `x_{-1} = x_0 = x0`.
pub fn solve(spec: &ProblemSpec, x0: &Vector, params: &SolverParams) -> Result<SolveReport> {
    params.validate()?;
    let bound = tau_upper_bound(spec, params)?;
    let c = params.lyapunov_weight(spec);
    let mut state = ExtrapolationState::default();

    let driven = drive(
        spec,
        x0,
        DriveSettings {
            max_iter: params.max_iter,
            stop_rel_tol: params.stop_rel_tol,
            keep_iterates: params.keep_iterates,
            lyapunov_weight: c,
        },
        |n, x, x_prev, cache| {
            let tau = match &params.tau_rule {
                TauRule::UpperBound => bound,
                TauRule::Sequence(seq) => {
                    let t = seq(n);
                    if !(t > 0.0 && t <= bound) {
                        return Err(Error::InvalidArgument(format!(
                            "tau_{n} = {t} outside (0, {bound}]"
                        )));
                    }
                    t
                }
            };
            let (lambda, mu_kappa, next) =
                extrapolation_coeffs(state, params.lambda_bar, params.mu_bar, tau, params.restart_period);
            state = next;
            let mu = match params.mu_schedule {
                MuSchedule::Kappa => mu_kappa,
                MuSchedule::Max => params.mu_bar * tau,
            };
            assert!((0.0..=params.lambda_bar).contains(&lambda), "lambda_n out of range");
            assert!(mu >= 0.0 && mu <= params.mu_bar * tau * (1.0 + 1e-15), "mu_n out of range");
            let g = spec.g.subgradient(x);
            let x_next = psg_step(spec, x, x_prev, &g, lambda, mu, tau, cache)?;
            Ok(StepOutcome {
                x: x_next,
                lambda,
                mu,
                tau,
            })
        },
    )?;

    let check = check_decrease(&driven.trace, c, params.delta);
    Ok(SolveReport {
        objective: driven.trace.records.last().map(|r| r.objective).unwrap_or(f64::NAN),
        x: driven.x,
        iterations: driven.iterations,
        status: driven.status,
        trace: driven.trace,
        max_lyapunov_violation: Some(check.max_violation),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linear_map::LinearMap;
    use crate::problem::{HalfSquaredNorm, Zero};

    fn quadratic_spec(d: usize) -> ProblemSpec {
        ProblemSpec::new(
            Arc::new(Zero),
            Arc::new(HalfSquaredNorm),
            Arc::new(Zero),
            LinearMap::identity(d),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn first_coefficients_vanish() {
        let s = ExtrapolationState::default();
        let (l, m, s1) = extrapolation_coeffs(s, 0.1, 0.01, 0.5, Some(50));
        assert_eq!((l, m), (0.0, 0.0));
        assert!((s1.kappa_curr - 1.618_033_988_749_895).abs() < 1e-15);
        let (l1, m1, _) = extrapolation_coeffs(s1, 0.1, 0.01, 0.5, Some(50));
        assert_eq!((l1, m1), (0.0, 0.0));
    }

    #[test]
    fn restart_resets_kappa() {
        let mut s = ExtrapolationState::default();
        for _ in 0..3 {
            s = s.advance(Some(3));
        }
        assert_eq!(s, ExtrapolationState::default());
        let mut s = ExtrapolationState::default();
        for _ in 0..3 {
            s = s.advance(None);
        }
        assert!(s.kappa_curr > 2.0);
    }

    #[test]
    fn gradient_step_on_quadratic() {
        let spec = quadratic_spec(3);
        let x = Vector::from_vec(vec![1.0, -2.0, 4.0]);
        let g = Vector::zeros(3);
        let mut cache = ProxCache::default();
        let next = psg_step(&spec, &x, &x, &g, 0.0, 0.0, 0.25, &mut cache).unwrap();
        assert!((next - &x * 0.75).norm() < 1e-15);
    }

    #[test]
    fn equal_iterates_kill_momentum() {
        let spec = quadratic_spec(2);
        let x = Vector::from_vec(vec![0.3, 0.7]);
        let g = Vector::zeros(2);
        let mut cache = ProxCache::default();
        let a = psg_step(&spec, &x, &x, &g, 0.1, 0.005, 0.5, &mut cache).unwrap();
        let b = psg_step(&spec, &x, &x, &g, 0.0, 0.0, 0.5, &mut cache).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let spec = quadratic_spec(4);
        let x0 = Vector::zeros(4);
        let report = solve(&spec, &x0, &SolverParams::default()).unwrap();
        assert_eq!(report.status, Status::Converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.x, x0);
    }

    #[test]
    fn rejects_bad_tau_sequence() {
        let spec = quadratic_spec(2);
        let params = SolverParams {
            tau_rule: TauRule::constant(10.0),
            ..Default::default()
        };
        let err = solve(&spec, &Vector::from_vec(vec![1.0, 1.0]), &params).unwrap_err();
        assert!(matches!(err, Error::Prox { iteration: 0, .. }), "{err}");
    }

    #[test]
    fn trace_length_bounded() {
        let spec = quadratic_spec(2);
        let params = SolverParams {
            max_iter: 5,
            stop_rel_tol: 0.0,
            ..Default::default()
        };
        let report = solve(&spec, &Vector::from_vec(vec![1.0, 1.0]), &params).unwrap();
        assert_eq!(report.status, Status::MaxIter);
        assert_eq!(report.trace.len(), 6);
        assert_eq!(report.trace.iterates.as_ref().unwrap().len(), 6);
    }
}
