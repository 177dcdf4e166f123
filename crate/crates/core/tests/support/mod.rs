//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls the library's own oracles: each helper recomputes its
//! quantity from first principles (grids, finite differences, enumeration,
//! eigendecomposition).

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proxsub::qp::PolyhedralSet;

/// `argmin_y t |y| + (y - w)^2 / 2` by a coarse scan refined twice.
pub fn grid_prox_abs(w: f64, t: f64) -> f64 {
    let obj = |y: f64| t * y.abs() + 0.5 * (y - w) * (y - w);
    let mut lo = -(w.abs() + 1.0);
    let mut hi = w.abs() + 1.0;
    let mut best = 0.0;
    for _ in 0..3 {
        let steps = 4000;
        let h = (hi - lo) / steps as f64;
        let mut bf = f64::INFINITY;
        for k in 0..=steps {
            let y = lo + h * k as f64;
            if obj(y) < bf {
                bf = obj(y);
                best = y;
            }
        }
        lo = best - h;
        hi = best + h;
    }
    best
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

/// `sqrt(lambda_max(A^T A))` from a symmetric eigendecomposition.
pub fn eig_spectral_norm(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.transpose() * a).eigenvalues.max().max(0.0).sqrt()
}

/// Projection onto `set` by enumerating active sets.
///
/// Every coordinate with finite bounds is either at its lower bound, at its
/// upper bound, or free; every inequality row is either active or not. Each
/// choice gives an affine subspace whose nearest point is computed with a
/// pseudo-inverse; the closest feasible candidate is the projection, since
/// the true projection is the nearest point of its own active face.
pub fn brute_force_projection(set: &PolyhedralSet, w: &DVector<f64>, feas_tol: f64) -> Option<DVector<f64>> {
    let d = set.dim;
    let k = set.ineq_mat.nrows();
    let bounded: Vec<usize> = (0..d)
        .filter(|&j| set.lower[j].is_finite() || set.upper[j].is_finite())
        .collect();
    let n_bound_states = 3usize.pow(bounded.len() as u32);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for bmask in 0..n_bound_states {
        let mut fixed = vec![None; d];
        let mut code = bmask;
        let mut skip = false;
        for &j in &bounded {
            let state = code % 3;
            code /= 3;
            let v = match state {
                0 => None,
                1 => Some(set.lower[j]),
                _ => Some(set.upper[j]),
            };
            if let Some(v) = v {
                if !v.is_finite() {
                    skip = true;
                }
            }
            fixed[j] = v;
        }
        if skip {
            continue;
        }
        let free: Vec<usize> = (0..d).filter(|&j| fixed[j].is_none()).collect();
        for imask in 0..(1usize << k) {
            let rows: Vec<usize> = (0..k).filter(|r| imask >> r & 1 == 1).collect();
            let n_act = rows.len() + set.eq_mat.nrows();
            let mut m = DMatrix::zeros(n_act, free.len());
            let mut r = DVector::zeros(n_act);
            for (a, (row, rhs)) in rows
                .iter()
                .map(|&i| (set.ineq_mat.row(i), set.ineq_rhs[i]))
                .chain((0..set.eq_mat.nrows()).map(|i| (set.eq_mat.row(i), set.eq_rhs[i])))
                .enumerate()
            {
                let mut rhs = rhs;
                for j in 0..d {
                    if let Some(v) = fixed[j] {
                        rhs -= row[j] * v;
                    }
                }
                for (c, &j) in free.iter().enumerate() {
                    m[(a, c)] = row[j];
                }
                r[a] = rhs;
            }
            let wf = DVector::from_fn(free.len(), |c, _| w[free[c]]);
            let xf = if n_act == 0 || free.is_empty() {
                wf.clone()
            } else {
                let gram = &m * m.transpose();
                let pinv = gram.pseudo_inverse(1e-12).ok()?;
                &wf - m.transpose() * (pinv * (&m * &wf - &r))
            };
            let mut x = DVector::zeros(d);
            for j in 0..d {
                x[j] = fixed[j].unwrap_or(0.0);
            }
            for (c, &j) in free.iter().enumerate() {
                x[j] = xf[c];
            }
            if set.violation(&x) <= feas_tol {
                let dist = (&x - w).norm();
                if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                    best = Some((dist, x));
                }
            }
        }
    }
    best.map(|b| b.1)
}
