//! Python bindings: compressed-sensing instances and solvers, soft shrinkage,
//! polyhedral projection, the DC OPF multi-start run and the check suite.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use proxsub::bench::{self, CheckOptions, OpfConfig, SolverKind, SolverSettings};
use proxsub::cs::{build_cs_problem, CaseSpec};
use proxsub::prox::{L1L2Regularizer, LossKind};
use proxsub::qp::{PolyhedralSet, ProjectionOptions, Projector};
use proxsub::{Matrix, ProblemSpec, Vector};

fn py_err(e: proxsub::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], ncols: usize) -> PyResult<Matrix> {
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("row {r} has {} entries, expected {ncols}", rows[r].len())));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Result of one solver run.
#[pyclass(get_all, frozen)]
struct SolveResult {
    x: Vec<f64>,
    iterations: usize,
    objective: f64,
    status: String,
    /// Relative error to the ground truth, for compressed-sensing runs.
    error: Option<f64>,
    lyapunov_max_violation: Option<f64>,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(iterations={}, objective={:.6e}, status='{}')",
            self.iterations, self.objective, self.status
        )
    }
}

/// A compressed-sensing instance `min h(Ax - b) + gamma (||x||_1 - alpha ||x||)`.
#[pyclass(frozen)]
struct CsInstance {
    inner: proxsub::cs::CsInstance,
    spec: ProblemSpec,
}

#[pymethods]
impl CsInstance {
    /// Standard case `1..=8`, or a custom shape when `shape = (m, d, s)` is given
    /// together with `kind` (`"gaussian"` or `"dct"`).
    #[staticmethod]
    #[pyo3(signature = (case=1, seed=0, loss="least-squares", gamma=0.1, alpha=1.0, shape=None, kind="gaussian"))]
    fn generate(
        case: u8,
        seed: u64,
        loss: &str,
        gamma: f64,
        alpha: f64,
        shape: Option<(usize, usize, usize)>,
        kind: &str,
    ) -> PyResult<Self> {
        let loss: LossKind = loss.parse().map_err(py_err)?;
        let case = match shape {
            None => CaseSpec::standard(case).map_err(py_err)?,
            Some((m, d, s)) => CaseSpec {
                id: None,
                kind: kind.parse().map_err(py_err)?,
                m,
                d,
                s,
            },
        };
        let reg = L1L2Regularizer::new(gamma, alpha).map_err(py_err)?;
        let inner = proxsub::cs::CsInstance::generate(case, loss, reg, seed, None).map_err(py_err)?;
        let spec = build_cs_problem(&inner).map_err(py_err)?;
        Ok(Self { inner, spec })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn truth(&self) -> Vec<f64> {
        self.inner.truth.as_slice().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b.as_slice().to_vec()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.d() {
            return Err(PyValueError::new_err(format!("expected {} entries", self.inner.d())));
        }
        Ok(self.spec.objective(&Vector::from_vec(x)))
    }

    /// Runs `solver` (`"psg"`, `"gppa"` or `"pdcae"`) from the origin.
    #[pyo3(signature = (solver="psg", max_iter=None))]
    fn solve(&self, py: Python<'_>, solver: &str, max_iter: Option<usize>) -> PyResult<SolveResult> {
        let kind: SolverKind = solver.parse().map_err(py_err)?;
        let default_cap = if self.inner.loss == LossKind::Lorentzian { 4000 } else { 3000 };
        let mut cfg = bench::ExperimentConfig::desk();
        cfg.settings.psg.max_iter = max_iter.unwrap_or(default_cap);
        let settings: SolverSettings = cfg.settings;
        let x0 = Vector::zeros(self.inner.d());
        let rep = py
            .detach(|| bench::run_solver(kind, &self.spec, &x0, &settings, false))
            .map_err(py_err)?;
        Ok(SolveResult {
            error: self.inner.error(&rep.x).ok(),
            x: rep.x.as_slice().to_vec(),
            iterations: rep.iterations,
            objective: rep.objective,
            status: format!("{:?}", rep.status).to_ascii_lowercase(),
            lyapunov_max_violation: rep.max_lyapunov_violation,
        })
    }
}

/// Componentwise `sign(w) max(|w| - t, 0)`.
#[pyfunction]
fn soft_threshold(w: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    let out = proxsub::prox::soft_threshold(&Vector::from_vec(w), t).map_err(py_err)?;
    Ok(out.as_slice().to_vec())
}

/// Euclidean projection of `w` onto
/// `{x : a_eq x = b_eq, a_ineq x <= b_ineq, lower <= x <= upper}`.
#[pyfunction]
#[pyo3(signature = (w, lower=None, upper=None, a_ineq=None, b_ineq=None, a_eq=None, b_eq=None, tol=1e-9))]
#[allow(clippy::too_many_arguments)]
fn project(
    w: Vec<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    a_ineq: Option<Vec<Vec<f64>>>,
    b_ineq: Option<Vec<f64>>,
    a_eq: Option<Vec<Vec<f64>>>,
    b_eq: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Vec<f64>> {
    let d = w.len();
    let mut set = PolyhedralSet::free(d);
    if let (Some(a), Some(b)) = (a_ineq, b_ineq) {
        set = set.with_inequalities(matrix(&a, d)?, Vector::from_vec(b)).map_err(py_err)?;
    }
    if let (Some(a), Some(b)) = (a_eq, b_eq) {
        set = set.with_equalities(matrix(&a, d)?, Vector::from_vec(b)).map_err(py_err)?;
    }
    let lo = lower.map_or_else(|| Vector::from_element(d, f64::NEG_INFINITY), Vector::from_vec);
    let hi = upper.map_or_else(|| Vector::from_element(d, f64::INFINITY), Vector::from_vec);
    set = set.with_bounds(lo, hi).map_err(py_err)?;
    let proj = Projector::new(&set, ProjectionOptions::with_tol(tol)).map_err(py_err)?;
    let x = proj.project(&Vector::from_vec(w), None).map_err(py_err)?.x;
    Ok(x.as_slice().to_vec())
}

/// Multi-start DC OPF on the bundled network; returns summary statistics and
/// the best plan.
#[pyfunction]
#[pyo3(signature = (starts=30, seed=0, baseline_cost_usd=None))]
fn opf_run<'py>(
    py: Python<'py>,
    starts: usize,
    seed: u64,
    baseline_cost_usd: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = OpfConfig {
        starts,
        seed,
        baseline_cost_usd,
        ..OpfConfig::default()
    };
    let res = py.detach(|| bench::run_opf(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    if let Some(st) = res.stats_for(res.best_solver) {
        out.set_item("best_objective", st.best_objective)?;
        out.set_item("mean_objective", st.mean_objective)?;
        out.set_item("mean_iterations", st.mean_iterations)?;
    }
    if let Some(plan) = &res.best_plan {
        out.set_item("placement", plan.placement.clone())?;
        out.set_item("binary", plan.is_binary())?;
        out.set_item("penetration", plan.penetration)?;
        out.set_item("total_cost_usd", plan.total_cost_usd)?;
        out.set_item("plan", plan.table())?;
    }
    out.set_item("rate_r_squared", res.rate_fit.map(|f| f.r_squared))?;
    out.set_item("step_rate_r_squared", res.step_rate_fit.map(|f| f.r_squared))?;
    out.set_item("failures", res.failures())?;
    out.set_item("table", res.table())?;
    Ok(out)
}

/// Runs the invariant suite; returns `(all_passed, report)`.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn run_checks(py: Python<'_>, seed: u64) -> (bool, String) {
    let rep = py.detach(|| {
        bench::run_checks(&CheckOptions {
            seed,
            ..CheckOptions::default()
        })
    });
    (rep.all_passed(), rep.to_string())
}

#[pymodule]
#[pyo3(name = "proxsub")]
fn proxsub_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CsInstance>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(opf_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
