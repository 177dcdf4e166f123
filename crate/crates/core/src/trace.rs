//! Iterate traces, solve reports and the Lyapunov decrease check.

use std::time::Duration;

use serde::Serialize;

use crate::linear_map::Vector;

/// One row of an [`IterateTrace`].
///
/// Record `n` describes `x_n`; the coefficients are the ones used to produce
/// it (all zero for `n = 0`).
#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub objective: f64,
    /// `F(x_n) + c ||x_n - x_{n-1}||^2`.
    pub lyapunov: f64,
    /// `||x_n - x_{n-1}||`.
    pub step_norm: f64,
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    /// `x_0, x_1, ...` when iterate storage is enabled.
    #[serde(skip)]
    pub iterates: Option<Vec<Vector>>,
    /// Lyapunov weight used to fill [`IterRecord::lyapunov`].
    pub lyapunov_weight: f64,
    pub elapsed: Duration,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub status: Status,
    pub trace: IterateTrace,
    /// Largest violation of the solver's descent inequality, if it has one.
    pub max_lyapunov_violation: Option<f64>,
}

/// Result of [`check_decrease`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreaseCheck {
    pub max_violation: f64,
    /// Index `n + 1` of the worst offending iterate.
    pub worst_iteration: Option<usize>,
}

impl DecreaseCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Largest positive part of
/// `F_{n+1} + delta ||x_{n+1} - x_n||^2 - F_n` with `F_n = F(x_n) + c ||x_n - x_{n-1}||^2`.
pub fn check_decrease(trace: &IterateTrace, c: f64, delta: f64) -> DecreaseCheck {
    let lyap = |r: &IterRecord| r.objective + c * r.step_norm * r.step_norm;
    let mut out = DecreaseCheck {
        max_violation: 0.0,
        worst_iteration: None,
    };
    for (n, pair) in trace.records.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        let excess = lyap(next) + delta * next.step_norm * next.step_norm - lyap(prev);
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess > out.max_violation {
            out.max_violation = excess;
            out.worst_iteration = Some(n + 1);
        }
    }
    out
}

/// Least-squares line through the tail of `log ||x_n - x_final||`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits the rate diagnostic on the last half of the stored iterates.
///
/// Returns `None` without stored iterates or with fewer than three usable
/// points (iterates already equal to the final one are skipped).
pub fn linear_rate_fit(trace: &IterateTrace) -> Option<RateFit> {
    let iterates = trace.iterates.as_ref()?;
    let last = iterates.last()?;
    let start = iterates.len() / 2;
    let pts: Vec<(f64, f64)> = iterates[..iterates.len() - 1]
        .iter()
        .enumerate()
        .skip(start.min(iterates.len().saturating_sub(4)))
        .filter_map(|(n, x)| {
            let d = (x - last).norm();
            (d > 0.0).then(|| (n as f64, d.ln()))
        })
        .collect();
    fit_line(&pts)
}

/// Least-squares line through the tail of `log ||x_n - x_{n-1}||`.
///
/// Uses the recorded step norms (no stored iterates needed) from the second
/// half of the run; zero steps are skipped.
pub fn step_norm_rate_fit(trace: &IterateTrace) -> Option<RateFit> {
    let steps = &trace.records;
    let start = (steps.len() / 2).min(steps.len().saturating_sub(3)).max(1);
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, r)| r.step_norm > 0.0)
        .map(|(n, r)| (n as f64, r.step_norm.ln()))
        .collect();
    fit_line(&pts)
}

pub(crate) fn fit_line(pts: &[(f64, f64)]) -> Option<RateFit> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
    })
}
