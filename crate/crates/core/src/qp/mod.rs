//! Euclidean projection onto a polyhedron,
//! `argmin_{x in S} ||x - w||^2` with
//! `S = { x : E x = e, G x <= g, lo <= x <= hi }`.
//!
//! Two solvers work on the row-normalized constraint system `l <= K x <= u`:
//! an exact dual active-set method (the default), and an operator-splitting
//! (ADMM) iteration with an active-set polish step that can reuse the previous
//! solution as a warm start. A result is only returned once its KKT residuals
//! are below the requested tolerance.

use nalgebra::Cholesky;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linear_map::{Matrix, Vector};
use crate::problem::{ProxCache, ProxTerm};

mod dual_active;

#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    pub dim: usize,
    pub eq_mat: Matrix,
    pub eq_rhs: Vector,
    pub ineq_mat: Matrix,
    pub ineq_rhs: Vector,
    pub lower: Vector,
    pub upper: Vector,
}

impl PolyhedralSet {
    /// The whole space `R^dim`.
    pub fn free(dim: usize) -> Self {
        Self {
            dim,
            eq_mat: Matrix::zeros(0, dim),
            eq_rhs: Vector::zeros(0),
            ineq_mat: Matrix::zeros(0, dim),
            ineq_rhs: Vector::zeros(0),
            lower: Vector::from_element(dim, f64::NEG_INFINITY),
            upper: Vector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, mat: Matrix, rhs: Vector) -> Result<Self> {
        check_dim(self.dim, mat.ncols())?;
        check_dim(mat.nrows(), rhs.len())?;
        self.eq_mat = mat;
        self.eq_rhs = rhs;
        Ok(self)
    }

    pub fn with_inequalities(mut self, mat: Matrix, rhs: Vector) -> Result<Self> {
        check_dim(self.dim, mat.ncols())?;
        check_dim(mat.nrows(), rhs.len())?;
        self.ineq_mat = mat;
        self.ineq_rhs = rhs;
        Ok(self)
    }

    pub fn with_bounds(mut self, lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(self.dim, lower.len())?;
        check_dim(self.dim, upper.len())?;
        if let Some(j) = (0..self.dim).find(|&j| lower[j] > upper[j] || lower[j].is_nan() || upper[j].is_nan()) {
            return Err(Error::InvalidArgument(format!(
                "bound {j}: lower {} exceeds upper {}",
                lower[j], upper[j]
            )));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    /// Largest violation over all constraints, in the units of each row.
    pub fn violation(&self, x: &Vector) -> f64 {
        let mut worst: f64 = 0.0;
        if self.eq_mat.nrows() > 0 {
            worst = worst.max((&self.eq_mat * x - &self.eq_rhs).amax());
        }
        if self.ineq_mat.nrows() > 0 {
            let r = &self.ineq_mat * x - &self.ineq_rhs;
            worst = worst.max(r.max().max(0.0));
        }
        for j in 0..self.dim {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// A point inside the box: midpoint, finite bound, or zero per coordinate.
    fn box_anchor(&self) -> Vector {
        Vector::from_fn(self.dim, |j, _| {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo.max(0.0),
                (false, true) => hi.min(0.0),
                (false, false) => 0.0,
            }
        })
    }
}

/// Residuals of the projection KKT system, each in max-norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KktResiduals {
    /// Constraint violation of `x` (row-normalized units).
    pub primal: f64,
    /// `||x - w + K^T y||`.
    pub stationarity: f64,
    /// `max_i min(|y_i|, slack_i)`.
    pub complementarity: f64,
    /// Dual multipliers with the wrong sign.
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.stationarity)
            .max(self.complementarity)
            .max(self.dual_sign)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMethod {
    /// Goldfarb-Idnani dual active set; exact up to rounding, no warm start.
    #[default]
    ActiveSet,
    /// ADMM with active-set polish; warm-startable.
    Admm,
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    pub method: ProjectionMethod,
    pub tol: f64,
    /// Iteration cap (ADMM iterations or active-set steps).
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in `(0, 2)`.
    pub alpha: f64,
    pub polish_every: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            method: ProjectionMethod::ActiveSet,
            tol: 1e-8,
            max_iter: 200_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            polish_every: 25,
        }
    }
}

impl ProjectionOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Default::default() }
    }

    pub fn admm(tol: f64) -> Self {
        Self {
            method: ProjectionMethod::Admm,
            ..Self::with_tol(tol)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub x: Vector,
    /// Multipliers of the normalized rows.
    pub dual: Vector,
    pub slack: Vector,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub polished: bool,
}

/// Row-normalized constraints `lo <= K x <= hi` with a cached factorization.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    rows: Matrix,
    lo: Vector,
    hi: Vector,
    opts: ProjectionOptions,
    rho: Vector,
    factor: Option<Cholesky<f64, nalgebra::Dyn>>,
    /// `n^T x >= b` / `n^T x = b` form for the active-set method.
    constraints: Vec<dual_active::Constraint>,
}

impl Projector {
    pub fn new(set: &PolyhedralSet, opts: ProjectionOptions) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let d = set.dim;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        // Scale-invariant zero-row test.
        let zero_row = |norm: f64| norm <= 1e-300;

        for i in 0..set.eq_mat.nrows() {
            let row = set.eq_mat.row(i);
            let n = row.norm();
            if zero_row(n) {
                if set.eq_rhs[i].abs() > opts.tol {
                    return Err(Error::EmptyPolyhedron);
                }
                continue;
            }
            rows.push(row.iter().map(|v| v / n).collect());
            lo.push(set.eq_rhs[i] / n);
            hi.push(set.eq_rhs[i] / n);
        }
        for i in 0..set.ineq_mat.nrows() {
            let row = set.ineq_mat.row(i);
            let n = row.norm();
            if zero_row(n) {
                if set.ineq_rhs[i] < -opts.tol {
                    return Err(Error::EmptyPolyhedron);
                }
                continue;
            }
            rows.push(row.iter().map(|v| v / n).collect());
            lo.push(f64::NEG_INFINITY);
            hi.push(set.ineq_rhs[i] / n);
        }
        for j in 0..d {
            if set.lower[j] > set.upper[j] {
                return Err(Error::EmptyPolyhedron);
            }
            if set.lower[j].is_finite() || set.upper[j].is_finite() {
                let mut row = vec![0.0; d];
                row[j] = 1.0;
                rows.push(row);
                lo.push(set.lower[j]);
                hi.push(set.upper[j]);
            }
        }

        let r = rows.len();
        let k = Matrix::from_fn(r, d, |i, j| rows[i][j]);
        let lo = Vector::from_vec(lo);
        let hi = Vector::from_vec(hi);
        let rho = Vector::from_fn(r, |i, _| if lo[i] == hi[i] { 1e3 * opts.rho } else { opts.rho });
        let (factor, constraints) = match opts.method {
            ProjectionMethod::Admm if r > 0 => (Some(factorize(&k, &rho, opts.sigma)?), Vec::new()),
            ProjectionMethod::Admm => (None, Vec::new()),
            ProjectionMethod::ActiveSet => (None, ge_constraints(&rows, &lo, &hi)),
        };
        Ok(Self {
            dim: d,
            rows: k,
            lo,
            hi,
            opts,
            rho,
            factor,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn options(&self) -> &ProjectionOptions {
        &self.opts
    }

    /// Violation of `lo <= K x <= hi` in normalized units.
    pub fn violation(&self, x: &Vector) -> f64 {
        if self.rows.nrows() == 0 {
            return 0.0;
        }
        let kx = &self.rows * x;
        (0..kx.len())
            .map(|i| (self.lo[i] - kx[i]).max(kx[i] - self.hi[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim && self.violation(x) <= tol
    }

    /// Projects `w`, optionally warm-started from a previous result's
    /// `(x, slack, dual)`.
    pub fn project(&self, w: &Vector, warm: Option<(&Vector, &Vector, &Vector)>) -> Result<Projection> {
        check_dim(self.dim, w.len())?;
        match self.opts.method {
            ProjectionMethod::ActiveSet => self.project_active_set(w),
            ProjectionMethod::Admm => self.project_admm(w, warm),
        }
    }

    fn project_active_set(&self, w: &Vector) -> Result<Projection> {
        let eps = 1e-3 * self.opts.tol;
        let (x, active) = match dual_active::solve(w, &self.constraints, eps, self.opts.max_iter) {
            dual_active::Outcome::Solved { x, active } => (x, active),
            dual_active::Outcome::Infeasible => return Err(Error::EmptyPolyhedron),
            dual_active::Outcome::StepLimit { x } => {
                return Err(Error::ProjectionNotConverged {
                    iterations: self.opts.max_iter,
                    residuals: self.residuals(w, &x, &Vector::zeros(self.rows.nrows())),
                })
            }
        };
        let mut y = Vector::zeros(self.rows.nrows());
        let steps = active.len();
        for (c, u) in active {
            let con = &self.constraints[c];
            y[con.row] += if con.negated { u } else { -u };
        }
        let residuals = self.residuals(w, &x, &y);
        if residuals.max() > self.opts.tol {
            return Err(Error::ProjectionNotConverged {
                iterations: steps,
                residuals,
            });
        }
        Ok(Projection {
            slack: self.clamp(&(&self.rows * &x)),
            x,
            dual: y,
            residuals,
            iterations: steps,
            polished: false,
        })
    }

    fn project_admm(&self, w: &Vector, warm: Option<(&Vector, &Vector, &Vector)>) -> Result<Projection> {
        let Some(base_factor) = self.factor.as_ref() else {
            return Ok(Projection {
                x: w.clone(),
                dual: Vector::zeros(0),
                slack: Vector::zeros(0),
                residuals: KktResiduals::default(),
                iterations: 0,
                polished: false,
            });
        };
        let tol = self.opts.tol;
        let (sigma, alpha) = (self.opts.sigma, self.opts.alpha);
        let k = &self.rows;

        let (mut x, mut z, mut y) = match warm {
            Some((x, z, y)) if x.len() == self.dim && z.len() == k.nrows() && y.len() == k.nrows() => {
                (x.clone(), z.clone(), y.clone())
            }
            _ => {
                let z = self.clamp(&(k * w));
                (w.clone(), z, Vector::zeros(k.nrows()))
            }
        };

        // Warm starts frequently land on the right active set straight away.
        if warm.is_some() {
            if let Some(p) = self.polish(w, &y, &z, 0) {
                return Ok(p);
            }
        }

        let mut rho = self.rho.clone();
        let mut local_factor: Option<Cholesky<f64, nalgebra::Dyn>> = None;
        let mut best = KktResiduals {
            primal: f64::INFINITY,
            ..Default::default()
        };

        for it in 1..=self.opts.max_iter {
            let y_prev = y.clone();
            let factor = local_factor.as_ref().unwrap_or(base_factor);
            let mut rhs = &x * sigma + w;
            rhs += k.tr_mul(&(rho.component_mul(&z) - &y));
            let x_tilde = factor.solve(&rhs);
            let z_tilde = k * &x_tilde;
            x = &x_tilde * alpha + &x * (1.0 - alpha);
            let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
            let z_next = self.clamp(&(&z_relaxed + y.component_div(&rho)));
            y += rho.component_mul(&(&z_relaxed - &z_next));
            z = z_next;

            if it % 5 != 0 {
                continue;
            }
            let kx = k * &x;
            let kty = k.tr_mul(&y);
            let prim = (&kx - &z).amax();
            let dual = (&x - w + &kty).amax();

            if self.certifies_infeasible(&(&y - &y_prev)) {
                return Err(Error::EmptyPolyhedron);
            }

            if prim <= tol && dual <= tol {
                let res = self.residuals(w, &x, &y);
                if res.max() <= tol {
                    return Ok(Projection {
                        x,
                        dual: y,
                        slack: z,
                        residuals: res,
                        iterations: it,
                        polished: false,
                    });
                }
            }
            if it % self.opts.polish_every == 0 || (prim <= 10.0 * tol && dual <= 10.0 * tol) {
                if let Some(p) = self.polish(w, &y, &z, it) {
                    return Ok(p);
                }
            }
            if it % 100 == 0 {
                let res = self.residuals(w, &x, &y);
                if res.max() < best.max() {
                    best = res;
                }
                // Rebalance primal and dual progress.
                let prim_rel = prim / kx.amax().max(z.amax()).max(1e-12);
                let dual_rel = dual / x.amax().max(kty.amax()).max(w.amax()).max(1e-12);
                let ratio = (prim_rel / dual_rel.max(1e-300)).sqrt();
                if ratio.is_finite() && !(0.2..=5.0).contains(&ratio) {
                    let scale = ratio.clamp(1e-3, 1e3);
                    rho *= scale;
                    local_factor = Some(factorize(k, &rho, sigma)?);
                }
            }
        }
        Err(Error::ProjectionNotConverged {
            iterations: self.opts.max_iter,
            residuals: best,
        })
    }

    fn clamp(&self, v: &Vector) -> Vector {
        Vector::from_fn(v.len(), |i, _| v[i].max(self.lo[i]).min(self.hi[i]))
    }

    /// Primal infeasibility certificate on the dual increment.
    fn certifies_infeasible(&self, dy: &Vector) -> bool {
        let scale = dy.amax();
        if scale <= 1e-12 {
            return false;
        }
        let eps = 1e-6 * scale;
        if self.rows.tr_mul(dy).amax() > eps {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            if dy[i] > eps * 1e-3 {
                if !self.hi[i].is_finite() {
                    return false;
                }
                support += self.hi[i] * dy[i];
            } else if dy[i] < -eps * 1e-3 {
                if !self.lo[i].is_finite() {
                    return false;
                }
                support += self.lo[i] * dy[i];
            }
        }
        support < -eps
    }

    /// KKT residuals of `(x, y)` for the projection of `w`.
    pub fn residuals(&self, w: &Vector, x: &Vector, y: &Vector) -> KktResiduals {
        let kx = &self.rows * x;
        let mut res = KktResiduals {
            primal: 0.0,
            stationarity: (x - w + self.rows.tr_mul(y)).amax(),
            complementarity: 0.0,
            dual_sign: 0.0,
        };
        for i in 0..kx.len() {
            let (lo, hi) = (self.lo[i], self.hi[i]);
            res.primal = res.primal.max(lo - kx[i]).max(kx[i] - hi);
            if lo == hi {
                continue;
            }
            if y[i] > 0.0 {
                if hi.is_finite() {
                    res.complementarity = res.complementarity.max(y[i].min((hi - kx[i]).abs()));
                } else {
                    res.dual_sign = res.dual_sign.max(y[i]);
                }
            } else if y[i] < 0.0 {
                if lo.is_finite() {
                    res.complementarity = res.complementarity.max((-y[i]).min((kx[i] - lo).abs()));
                } else {
                    res.dual_sign = res.dual_sign.max(-y[i]);
                }
            }
        }
        res
    }

    /// Solves the projection restricted to a guessed active set.
    fn polish(&self, w: &Vector, y: &Vector, z: &Vector, it: usize) -> Option<Projection> {
        let scale = 1.0 + y.amax();
        let dual_guess: Vec<(usize, f64)> = (0..y.len())
            .filter_map(|i| {
                if self.lo[i] == self.hi[i] {
                    Some((i, self.lo[i]))
                } else if y[i] > 1e-9 * scale && self.hi[i].is_finite() {
                    Some((i, self.hi[i]))
                } else if y[i] < -1e-9 * scale && self.lo[i].is_finite() {
                    Some((i, self.lo[i]))
                } else {
                    None
                }
            })
            .collect();
        let slack_guess: Vec<(usize, f64)> = (0..z.len())
            .filter_map(|i| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                if lo == hi {
                    Some((i, lo))
                } else if hi.is_finite() && z[i] >= hi - 1e-7 {
                    Some((i, hi))
                } else if lo.is_finite() && z[i] <= lo + 1e-7 {
                    Some((i, lo))
                } else {
                    None
                }
            })
            .collect();
        for active in [dual_guess, slack_guess] {
            if let Some(p) = self.solve_active(w, &active, it) {
                return Some(p);
            }
        }
        None
    }

    /// Equality-constrained projection onto the rows in `active`, followed by
    /// active-set corrections: wrong-signed multipliers leave the set,
    /// violated rows join it.
    fn solve_active(&self, w: &Vector, active: &[(usize, f64)], it: usize) -> Option<Projection> {
        let tol = self.opts.tol;
        let mut active = active.to_vec();
        let max_rounds = 25;
        for _ in 0..max_rounds {
            let (x, y) = self.solve_equality(w, &active)?;
            // Most wrong-signed multiplier among active inequality rows.
            let wrong = active
                .iter()
                .enumerate()
                .filter(|(_, (i, _))| self.lo[*i] != self.hi[*i])
                .map(|(a, &(i, bound))| {
                    let bad = if bound == self.hi[i] { -y[i] } else { y[i] };
                    (a, bad)
                })
                .filter(|&(_, bad)| bad > tol)
                .max_by(|p, q| p.1.total_cmp(&q.1));
            if let Some((a, _)) = wrong {
                active.swap_remove(a);
                continue;
            }
            let kx = &self.rows * &x;
            let violated = (0..kx.len())
                .filter(|i| !active.iter().any(|(j, _)| j == i))
                .filter_map(|i| {
                    if kx[i] - self.hi[i] > tol {
                        Some((kx[i] - self.hi[i], (i, self.hi[i])))
                    } else if self.lo[i] - kx[i] > tol {
                        Some((self.lo[i] - kx[i], (i, self.lo[i])))
                    } else {
                        None
                    }
                })
                .max_by(|p, q| p.0.total_cmp(&q.0));
            if let Some((_, row)) = violated {
                active.push(row);
                continue;
            }
            let residuals = self.residuals(w, &x, &y);
            if residuals.max() > tol {
                return None;
            }
            return Some(Projection {
                slack: self.clamp(&kx),
                x,
                dual: y,
                residuals,
                iterations: it,
                polished: true,
            });
        }
        None
    }

    /// `argmin ||x - w||` subject to `K_a x = b_a`; returns `x` and the
    /// multipliers scattered to full length.
    fn solve_equality(&self, w: &Vector, active: &[(usize, f64)]) -> Option<(Vector, Vector)> {
        let n = active.len();
        let mut y = Vector::zeros(self.rows.nrows());
        if n == 0 {
            return Some((w.clone(), y));
        }
        let ka = Matrix::from_fn(n, self.dim, |a, j| self.rows[(active[a].0, j)]);
        let target = Vector::from_fn(n, |a, _| active[a].1);
        let rhs = &ka * w - &target;
        let gram = &ka * ka.transpose();
        let mut reg = gram.clone();
        for a in 0..n {
            reg[(a, a)] += 1e-11;
        }
        let chol = Cholesky::new(reg)?;
        let mut nu = chol.solve(&rhs);
        // Refinement against the unregularized system.
        for _ in 0..4 {
            let r = &rhs - &gram * &nu;
            nu += chol.solve(&r);
        }
        for (a, (i, _)) in active.iter().enumerate() {
            y[*i] = nu[a];
        }
        Some((w - ka.tr_mul(&nu), y))
    }
}

/// Splits `lo <= k x <= hi` into `n^T x >= b` rows, equalities first.
fn ge_constraints(rows: &[Vec<f64>], lo: &Vector, hi: &Vector) -> Vec<dual_active::Constraint> {
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if lo[i] == hi[i] {
            eq.push(dual_active::Constraint {
                normal: row.clone(),
                rhs: lo[i],
                equality: true,
                row: i,
                negated: false,
            });
            continue;
        }
        if lo[i].is_finite() {
            ineq.push(dual_active::Constraint {
                normal: row.clone(),
                rhs: lo[i],
                equality: false,
                row: i,
                negated: false,
            });
        }
        if hi[i].is_finite() {
            ineq.push(dual_active::Constraint {
                normal: row.iter().map(|v| -v).collect(),
                rhs: -hi[i],
                equality: false,
                row: i,
                negated: true,
            });
        }
    }
    eq.extend(ineq);
    eq
}

fn factorize(k: &Matrix, rho: &Vector, sigma: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let d = k.ncols();
    let mut m = Matrix::identity(d, d) * (1.0 + sigma);
    let scaled = Matrix::from_fn(k.nrows(), d, |i, j| k[(i, j)] * rho[i]);
    m += k.tr_mul(&scaled);
    Cholesky::new(m).ok_or_else(|| Error::InvalidArgument("projection system is not positive definite".into()))
}

/// Projects `w` onto `set` to KKT tolerance `tol`.
pub fn project(set: &PolyhedralSet, w: &Vector, tol: f64) -> Result<Vector> {
    let projector = Projector::new(set, ProjectionOptions::with_tol(tol))?;
    Ok(projector.project(w, None)?.x)
}

/// Any point of `set` with all residuals below `tol`.
pub fn feasible_point(set: &PolyhedralSet, tol: f64) -> Result<Vector> {
    let anchor = set.box_anchor();
    let projector = Projector::new(set, ProjectionOptions::with_tol(tol))?;
    match projector.project(&anchor, None) {
        Ok(p) => Ok(p.x),
        Err(Error::ProjectionNotConverged { residuals, .. }) => Err(Error::PossiblyInfeasible { residuals }),
        Err(e) => Err(e),
    }
}

/// `f = iota_S` for a polyhedron `S`; the prox is the projection, warm-started
/// from the previous call within the same solve.
#[derive(Debug, Clone)]
pub struct PolyhedralIndicator {
    projector: Projector,
    /// Membership tolerance used by [`ProxTerm::contains`].
    pub contain_tol: f64,
}

impl PolyhedralIndicator {
    pub fn new(set: &PolyhedralSet, opts: ProjectionOptions) -> Result<Self> {
        Ok(Self {
            contain_tol: 10.0 * opts.tol,
            projector: Projector::new(set, opts)?,
        })
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }
}

impl ProxTerm for PolyhedralIndicator {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox(&self, w: &Vector, _tau: f64, cache: &mut ProxCache) -> Result<Vector> {
        let warm = match (&cache.primal, &cache.slack, &cache.dual) {
            (Some(x), Some(z), Some(y)) => Some((x, z, y)),
            _ => None,
        };
        let p = self.projector.project(w, warm)?;
        cache.primal = Some(p.x.clone());
        cache.slack = Some(p.slack);
        cache.dual = Some(p.dual);
        Ok(p.x)
    }

    fn contains(&self, x: &Vector) -> bool {
        self.projector.contains(x, self.contain_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn box_projection_is_clamp() {
        let set = PolyhedralSet::free(4)
            .with_bounds(Vector::zeros(4), Vector::from_element(4, 1.0))
            .unwrap();
        let x = project(&set, &v(&[2.0, -1.0, 0.5, 0.25]), 1e-10).unwrap();
        assert!((x - v(&[1.0, 0.0, 0.5, 0.25])).amax() < 1e-10);
    }

    #[test]
    fn halfspace_projection() {
        let set = PolyhedralSet::free(2)
            .with_inequalities(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[0.0]))
            .unwrap();
        let x = project(&set, &v(&[1.0, 1.0]), 1e-10).unwrap();
        assert!(x.amax() < 1e-9, "{x}");
        // Points already inside stay put.
        let x = project(&set, &v(&[-1.0, 0.5]), 1e-10).unwrap();
        assert!((x - v(&[-1.0, 0.5])).amax() < 1e-9);
    }

    #[test]
    fn equality_projection() {
        let set = PolyhedralSet::free(3)
            .with_equalities(Matrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), v(&[3.0]))
            .unwrap();
        let x = project(&set, &Vector::zeros(3), 1e-10).unwrap();
        assert!((x - v(&[1.0, 1.0, 1.0])).amax() < 1e-9);
    }

    #[test]
    fn contradictory_constraints_are_empty() {
        let set = PolyhedralSet::free(1)
            .with_equalities(Matrix::from_row_slice(1, 1, &[1.0]), v(&[1.0]))
            .unwrap()
            .with_inequalities(Matrix::from_row_slice(1, 1, &[1.0]), v(&[0.0]))
            .unwrap();
        let err = feasible_point(&set, 1e-8).unwrap_err();
        assert!(matches!(err, Error::EmptyPolyhedron | Error::PossiblyInfeasible { .. }), "{err}");
    }

    #[test]
    fn zero_row_contradiction_is_empty() {
        let set = PolyhedralSet::free(2)
            .with_inequalities(Matrix::zeros(1, 2), v(&[-1.0]))
            .unwrap();
        assert!(matches!(Projector::new(&set, Default::default()), Err(Error::EmptyPolyhedron)));
    }

    #[test]
    fn box_only_feasible_point_is_interior() {
        let set = PolyhedralSet::free(3)
            .with_bounds(Vector::zeros(3), Vector::from_element(3, 1.0))
            .unwrap();
        let x = feasible_point(&set, 1e-8).unwrap();
        assert!((x - Vector::from_element(3, 0.5)).amax() < 1e-12);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(PolyhedralSet::free(1).with_bounds(v(&[1.0]), v(&[0.0])).is_err());
    }

    #[test]
    fn indicator_warm_start_reuses_cache() {
        let set = PolyhedralSet::free(2)
            .with_inequalities(Matrix::from_row_slice(1, 2, &[1.0, 2.0]), v(&[1.0]))
            .unwrap()
            .with_bounds(Vector::zeros(2), Vector::from_element(2, 10.0))
            .unwrap();
        let ind = PolyhedralIndicator::new(&set, ProjectionOptions::with_tol(1e-10)).unwrap();
        let mut cache = ProxCache::default();
        let a = ind.prox(&v(&[3.0, 3.0]), 1.0, &mut cache).unwrap();
        assert!(cache.dual.is_some());
        let b = ind.prox(&v(&[3.0, 3.0]), 1.0, &mut cache).unwrap();
        assert!((a - b).amax() < 1e-9);
        assert!(ind.contains(&v(&[0.5, 0.2])));
        assert!(!ind.contains(&v(&[2.0, 2.0])));
    }
}
