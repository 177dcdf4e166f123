//! Dual active-set method (Goldfarb-Idnani) for `min ||x - w||^2 / 2`
//! subject to `n_i^T x >= b_i` (inequalities) and `n_i^T x = b_i` (equalities).
//!
//! With an identity Hessian the method keeps an orthogonal `J` and an upper
//! triangular `R` with `J[:, ..q] R = N_active`, updated by Givens rotations.
//! Starting from the unconstrained minimizer `x = w`, violated constraints
//! are added one at a time; constraints whose multiplier would turn negative
//! are dropped. Terminates in finitely many steps (barring cycling, capped
//! by `max_steps`).

use crate::linear_map::{Matrix, Vector};

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub normal: Vec<f64>,
    pub rhs: f64,
    pub equality: bool,
    /// Row of the normalized system and whether `normal` is its negation.
    pub row: usize,
    pub negated: bool,
}

pub(crate) enum Outcome {
    Solved { x: Vector, active: Vec<(usize, f64)> },
    Infeasible,
    StepLimit { x: Vector },
}

struct Factor {
    j: Matrix,
    r: Matrix,
    q: usize,
}

impl Factor {
    fn new(d: usize) -> Self {
        Self {
            j: Matrix::identity(d, d),
            r: Matrix::zeros(d, d),
            q: 0,
        }
    }

    fn rotate_j(&mut self, a: usize, b: usize, c: f64, s: f64) {
        for i in 0..self.j.nrows() {
            let (ja, jb) = (self.j[(i, a)], self.j[(i, b)]);
            self.j[(i, a)] = c * ja + s * jb;
            self.j[(i, b)] = -s * ja + c * jb;
        }
    }

    /// Appends a constraint with `d = J^T n`.
    fn add(&mut self, mut d: Vector) {
        let q = self.q;
        for k in (q + 1..d.len()).rev() {
            let (a, b) = (d[k - 1], d[k]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            d[k - 1] = h;
            d[k] = 0.0;
            self.rotate_j(k - 1, k, c, s);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
    }

    /// Removes the `k`-th active constraint.
    fn drop(&mut self, k: usize) {
        let q = self.q;
        for col in k..q - 1 {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for jj in k..q - 1 {
            let (a, b) = (self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for col in jj..q - 1 {
                let (ra, rb) = (self.r[(jj, col)], self.r[(jj + 1, col)]);
                self.r[(jj, col)] = c * ra + s * rb;
                self.r[(jj + 1, col)] = -s * ra + c * rb;
            }
            self.rotate_j(jj, jj + 1, c, s);
        }
        self.q -= 1;
    }

    /// `R^{-1} d[..q]` by back substitution.
    fn solve_r(&self, d: &Vector) -> Vec<f64> {
        let q = self.q;
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        r
    }
}

fn dot(a: &[f64], x: &Vector) -> f64 {
    a.iter().zip(x.iter()).map(|(u, v)| u * v).sum()
}

/// `eps`: violation threshold and degeneracy tolerance on unit-norm rows.
pub(crate) fn solve(w: &Vector, cons: &[Constraint], eps: f64, max_steps: usize) -> Outcome {
    let d = w.len();
    let mut x = w.clone();
    let mut fac = Factor::new(d);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; cons.len()];
    let mut skipped = vec![false; cons.len()];
    let mut steps = 0;

    loop {
        // Equalities first, in order; then the most violated inequality.
        let mut pick: Option<(usize, f64)> = None;
        for (i, c) in cons.iter().enumerate() {
            if c.equality && !is_active[i] && !skipped[i] {
                pick = Some((i, if dot(&c.normal, &x) - c.rhs > 0.0 { -1.0 } else { 1.0 }));
                break;
            }
        }
        if pick.is_none() {
            let mut worst = -eps;
            for (i, c) in cons.iter().enumerate() {
                if c.equality || is_active[i] {
                    continue;
                }
                let s = dot(&c.normal, &x) - c.rhs;
                if s < worst {
                    worst = s;
                    pick = Some((i, 1.0));
                }
            }
        }
        let Some((p, sign)) = pick else {
            let act = active
                .iter()
                .zip(&u)
                .map(|(&i, &ui)| (i, ui))
                .collect();
            return Outcome::Solved { x, active: act };
        };
        let np: Vec<f64> = cons[p].normal.iter().map(|v| sign * v).collect();
        let bp = sign * cons[p].rhs;
        let np_vec = Vector::from_column_slice(&np);
        let mut u_plus = 0.0;

        loop {
            steps += 1;
            if steps > max_steps {
                return Outcome::StepLimit { x };
            }
            let dvec = fac.j.tr_mul(&np_vec);
            let q = fac.q;
            let mut z = Vector::zeros(d);
            for k in q..d {
                if dvec[k] != 0.0 {
                    z.axpy(dvec[k], &fac.j.column(k), 1.0);
                }
            }
            let r = fac.solve_r(&dvec);
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for k in 0..q {
                if !cons[active[k]].equality && r[k] > 0.0 {
                    let t = u[k] / r[k];
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(k);
                    }
                }
            }
            let s_p = dot(&np, &x) - bp;
            let zn = z.dot(&np_vec);
            let t2 = if z.norm() > eps && zn > 0.0 { -s_p / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if t == f64::INFINITY {
                // Dependent on the active set and not reachable by dropping.
                if s_p.abs() <= eps {
                    skipped[p] = true;
                    break;
                }
                return Outcome::Infeasible;
            }
            if t2 == f64::INFINITY {
                for k in 0..q {
                    u[k] -= t * r[k];
                }
                u_plus += t;
                let k = drop_at.expect("finite partial step has a drop index");
                is_active[active[k]] = false;
                active.remove(k);
                u.remove(k);
                fac.drop(k);
                continue;
            }
            x.axpy(t, &z, 1.0);
            for k in 0..q {
                u[k] -= t * r[k];
            }
            u_plus += t;
            if t == t2 {
                fac.add(dvec);
                active.push(p);
                u.push(u_plus);
                is_active[p] = true;
                // Multiplier sign relative to the stored (unflipped) normal.
                if sign < 0.0 {
                    let last = u.len() - 1;
                    u[last] = -u[last];
                    // Keep the factor consistent with the stored normal.
                    for i in 0..fac.q {
                        fac.r[(i, fac.q - 1)] = -fac.r[(i, fac.q - 1)];
                    }
                }
                break;
            }
            let k = drop_at.expect("partial step has a drop index");
            is_active[active[k]] = false;
            active.remove(k);
            u.remove(k);
            fac.drop(k);
        }
    }
}
