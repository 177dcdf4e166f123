//! Self-contained invariant suite: every module's properties checked on
//! small random instances, reported as a pass/fail matrix.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, SolverKind};
use super::sweep::run_cs_sweep;
use crate::baselines::{gppa_solve, BaselineParams};
use crate::cs::{build_cs_problem, dct_matrix, has_full_row_rank, CaseSpec, CsInstance, MatrixKind};
use crate::error::{Error, Result};
use crate::linear_map::{spectral_norm, LinearMap, Matrix, Vector};
use crate::opf::dc::{generator_only_point, penetration, random_box_point};
use crate::opf::{build_dcopf, load_ac_model, load_network, NetworkData};
use crate::problem::{ProblemSpec, SolverParams, TauRule};
use crate::prox::{soft_threshold, L1L2Regularizer, Loss, LossKind, WeightedL1, WeightedNorm};
use crate::qp::{PolyhedralSet, ProjectionOptions, Projector};
use crate::solver::solve;
use crate::trace::check_decrease;

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Network directory to load; bundled data when `None`.
    pub network_dir: Option<PathBuf>,
    /// Test hook: perturbs one recorded objective before the descent check.
    pub inject_monotonicity_breaker: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    fn push(&mut self, module: &'static str, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
        self.rows.push(CheckRow {
            module,
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(
                f,
                "{} {:<14} {:<30} {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.module,
                r.name,
                r.detail
            )?;
        }
        let bad = self.failed().count();
        write!(f, "{} checks, {} failed", self.rows.len(), bad)
    }
}

fn verdict(ok: bool, detail: String) -> Result<(bool, String)> {
    Ok((ok, detail))
}

/// Runs the whole suite. Failures are part of the report, never an `Err`.
pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let mut rep = CheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    rep.push("core-model", "spectral-norm", check_spectral_norm(&mut rng));
    rep.push("prox-oracles", "soft-threshold-grid", check_soft_threshold(&mut rng));
    rep.push("prox-oracles", "gradient-finite-diff", check_gradients(&mut rng));
    rep.push("prox-oracles", "lorentzian-secant", check_secant(&mut rng));
    rep.push("qp-projection", "projection-properties", check_projection(&mut rng));
    rep.push("problems-cs", "instance-structure", check_instances(opts.seed));
    for loss in [LossKind::LeastSquares, LossKind::Lorentzian] {
        let name = match loss {
            LossKind::LeastSquares => "lyapunov-decrease-ls",
            LossKind::Lorentzian => "lyapunov-decrease-lorentzian",
        };
        rep.push("psg-solver", name, check_lyapunov(loss, opts));
    }
    rep.push("psg-solver", "reduces-to-gppa", check_special_case(&mut rng));
    rep.push("baselines", "gppa-monotone", check_gppa_monotone(opts.seed));

    let net = match &opts.network_dir {
        Some(dir) => load_network(dir),
        None => Ok(NetworkData::bundled()),
    };
    match net {
        Ok(net) => {
            rep.push("problems-opf", "load-network", verdict(true, format!("{} buses", net.n_buses())));
            rep.push("problems-opf", "feasible-start-invariants", check_opf_start(&net, &mut rng));
            rep.push("problems-opf", "witness-flow-equations", check_witness(&net));
            rep.push(
                "problems-opf",
                "ac-link-set",
                load_ac_model(&net).map(|m| (m.links.len() == net.n_buses(), format!("{} links", m.links.len()))),
            );
        }
        Err(e) => rep.push("problems-opf", "load-network", Err(e)),
    }
    rep.push("bench-cli", "csv-byte-stable", check_csv_stable(opts.seed));
    rep
}

fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize) -> Matrix {
    Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

fn check_spectral_norm(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (m, n) = (rng.random_range(1..12), rng.random_range(1..12));
        let a = random_matrix(rng, m, n);
        let exact = SymmetricEigen::new(a.transpose() * &a).eigenvalues.max().max(0.0).sqrt();
        let est = spectral_norm(&LinearMap::dense(a), 1e-12, 100_000)?;
        worst = worst.max((est - exact).abs() / exact.max(1e-300));
    }
    verdict(worst <= 1e-6, format!("max rel err {worst:.2e}"))
}

/// Minimizes `t |y| + (y - w)^2 / 2` on a coarse then a fine grid.
fn grid_prox_1d(w: f64, t: f64) -> f64 {
    let obj = |y: f64| t * y.abs() + 0.5 * (y - w) * (y - w);
    let scan = |lo: f64, hi: f64, steps: usize| {
        (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .fold((f64::INFINITY, 0.0), |(bf, by), y| if obj(y) < bf { (obj(y), y) } else { (bf, by) })
            .1
    };
    let r = w.abs() + 1.0;
    let y = scan(-r, r, 20_000);
    let h = 2.0 * r / 20_000.0;
    scan(y - h, y + h, 2_000)
}

fn check_soft_threshold(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (w, t) = (rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0));
        let got = soft_threshold(&Vector::from_element(1, w), t)?[0];
        worst = worst.max((got - grid_prox_1d(w, t)).abs());
    }
    verdict(worst <= 1e-4, format!("max |diff| {worst:.2e}"))
}

fn check_gradients(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    use crate::problem::SmoothTerm;
    let mut worst: f64 = 0.0;
    for kind in [LossKind::LeastSquares, LossKind::Lorentzian] {
        for _ in 0..5 {
            let n = 6;
            let b = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let z = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let loss = Loss::new(kind, b);
            let g = loss.gradient(&z);
            let h = 1e-5;
            let fd = Vector::from_fn(n, |i, _| {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                (loss.value(&zp) - loss.value(&zm)) / (2.0 * h)
            });
            worst = worst.max((g - &fd).norm() / fd.norm().max(1.0));
        }
    }
    verdict(worst <= 1e-6, format!("max rel err {worst:.2e}"))
}

fn check_secant(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = |r: f64| 2.0 * r / (1.0 + r * r);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        if a != b {
            worst = worst.max((d(a) - d(b)).abs() / (a - b).abs());
        }
    }
    verdict(worst <= 2.0 + 1e-9, format!("max secant slope {worst:.6}"))
}

fn random_polytope(rng: &mut ChaCha8Rng) -> Result<PolyhedralSet> {
    let d = rng.random_range(1..=8);
    let k = rng.random_range(0..=d + 2);
    let ineq = random_matrix(rng, k, d);
    let rhs = Vector::from_fn(k, |_, _| rng.random_range(0.05..1.0));
    let mut set = PolyhedralSet::free(d)
        .with_inequalities(ineq, rhs)?
        .with_bounds(Vector::from_element(d, -1.0), Vector::from_element(d, 1.0))?;
    if d > 1 && rng.random_bool(0.5) {
        set = set.with_equalities(random_matrix(rng, 1, d), Vector::zeros(1))?;
    }
    Ok(set)
}

fn check_projection(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let tol = 1e-9;
    let (mut infeas, mut idem, mut expand): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let set = random_polytope(rng)?;
        let proj = Projector::new(&set, ProjectionOptions::with_tol(tol))?;
        let w1 = Vector::from_fn(set.dim, |_, _| rng.random_range(-3.0..3.0));
        let w2 = Vector::from_fn(set.dim, |_, _| rng.random_range(-3.0..3.0));
        let p1 = proj.project(&w1, None)?.x;
        let p2 = proj.project(&w2, None)?.x;
        infeas = infeas.max(set.violation(&p1));
        idem = idem.max((proj.project(&p1, None)?.x - &p1).amax());
        expand = expand.max((&p1 - &p2).norm() - (&w1 - &w2).norm());
    }
    let bound = 10.0 * tol;
    verdict(
        infeas <= 1e-6 && idem <= bound && expand <= bound,
        format!("violation {infeas:.1e}, idempotency {idem:.1e}, expansion {expand:.1e}"),
    )
}

fn check_instances(seed: u64) -> Result<(bool, String)> {
    let reg = L1L2Regularizer::new(0.1, 1.0)?;
    let mut ok = true;
    for kind in [MatrixKind::Gaussian, MatrixKind::Dct] {
        let case = CaseSpec {
            id: None,
            kind,
            m: 16,
            d: 48,
            s: 4,
        };
        let inst = CsInstance::generate(case, LossKind::LeastSquares, reg, seed, None)?;
        ok &= has_full_row_rank(&inst.matrix);
        ok &= inst.truth.iter().filter(|v| **v != 0.0).count() == 4;
        ok &= (&inst.matrix * &inst.truth - &inst.b).amax() <= 1e-12;
    }
    let c = dct_matrix(32);
    let orth = (&c * c.transpose() - Matrix::identity(32, 32)).amax();
    ok &= orth <= 1e-12;
    verdict(ok, format!("dct orthogonality {orth:.1e}"))
}

fn small_cs(loss: LossKind, seed: u64) -> Result<(CsInstance, ProblemSpec)> {
    let gamma = if loss == LossKind::Lorentzian { 0.001 } else { 0.1 };
    let case = CaseSpec {
        id: None,
        kind: MatrixKind::Gaussian,
        m: 30,
        d: 90,
        s: 4,
    };
    let inst = CsInstance::generate(case, loss, L1L2Regularizer::new(gamma, 1.0)?, seed, None)?;
    let spec = build_cs_problem(&inst)?;
    Ok((inst, spec))
}

fn check_lyapunov(loss: LossKind, opts: &CheckOptions) -> Result<(bool, String)> {
    let (inst, spec) = small_cs(loss, opts.seed)?;
    let params = SolverParams {
        max_iter: 500,
        ..SolverParams::default()
    };
    let x0 = Vector::zeros(inst.d());
    let mut rep = solve(&spec, &x0, &params)?;
    if opts.inject_monotonicity_breaker && rep.trace.records.len() > 2 {
        let mid = rep.trace.records.len() / 2;
        rep.trace.records[mid].objective += 1.0;
    }
    let c = params.lyapunov_weight(&spec);
    let check = check_decrease(&rep.trace, c, params.delta);
    let bound = 1e-10 * (1.0 + spec.objective(&x0).abs());
    verdict(
        check.passed(bound),
        format!(
            "max violation {:.2e} (bound {bound:.1e}) over {} iterations",
            check.max_violation, rep.iterations
        ),
    )
}

fn check_special_case(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = 20;
    let b = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let reg = L1L2Regularizer::new(0.3, 1.0)?;
    let spec = ProblemSpec::new(
        Arc::new(WeightedL1 { weight: reg.gamma }),
        Arc::new(Loss::new(LossKind::LeastSquares, b)),
        Arc::new(WeightedNorm { weight: reg.gamma * reg.alpha }),
        LinearMap::identity(d),
        1.0,
    )?;
    let params = SolverParams {
        lambda_bar: 0.0,
        mu_bar: 0.0,
        max_iter: 100,
        stop_rel_tol: 0.0,
        keep_iterates: Some(true),
        ..SolverParams::default()
    };
    let tau = crate::problem::tau_upper_bound(&spec, &params)?;
    let params = SolverParams {
        tau_rule: TauRule::constant(tau),
        ..params
    };
    let x0 = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let a = solve(&spec, &x0, &params)?;
    let g = gppa_solve(
        &spec,
        &x0,
        &BaselineParams {
            max_iter: 100,
            stop_rel_tol: 0.0,
            keep_iterates: Some(true),
            ..BaselineParams::with_tau(tau)
        },
    )?;
    let (xa, xg) = (a.trace.iterates.unwrap_or_default(), g.trace.iterates.unwrap_or_default());
    let worst = xa.iter().zip(&xg).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
    verdict(
        xa.len() == xg.len() && worst <= 1e-12,
        format!("{} iterates, max diff {worst:.1e}", xa.len()),
    )
}

fn check_gppa_monotone(seed: u64) -> Result<(bool, String)> {
    let (inst, spec) = small_cs(LossKind::LeastSquares, seed)?;
    let rep = gppa_solve(
        &spec,
        &Vector::zeros(inst.d()),
        &BaselineParams {
            max_iter: 500,
            ..BaselineParams::gppa(&spec)
        },
    )?;
    let v = rep.max_lyapunov_violation.unwrap_or(f64::INFINITY);
    verdict(v <= 1e-10 * (1.0 + rep.trace.records[0].objective.abs()), format!("max increase {v:.2e}"))
}

fn check_opf_start(net: &NetworkData, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (_, set, layout) = build_dcopf(net, net.gamma)?;
    let proj = Projector::new(&set, ProjectionOptions::default())?;
    let tol = 1e-6;
    let (mut viol, mut pen_gap, mut anti): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..3 {
        let x = proj.project(&random_box_point(&set, rng), None)?.x;
        viol = viol.max(set.violation(&x));
        let pv: f64 = (0..layout.n_buses).map(|i| x[layout.pv(i)]).sum();
        pen_gap = pen_gap.max(0.5 * net.total_demand() - pv);
        for i in 0..layout.n_buses {
            for j in 0..layout.n_buses {
                anti = anti.max((x[layout.flow(i, j)] + x[layout.flow(j, i)]).abs());
            }
        }
        if (penetration(&x, net, &layout) - pv / net.total_demand()).abs() > 1e-12 {
            return Err(Error::InvalidArgument("penetration accessor disagrees".into()));
        }
    }
    verdict(
        viol <= tol && pen_gap <= tol && anti <= tol,
        format!("violation {viol:.1e}, penetration shortfall {pen_gap:.1e}, antisymmetry {anti:.1e}"),
    )
}

fn check_witness(net: &NetworkData) -> Result<(bool, String)> {
    let (_, set, layout) = build_dcopf(net, net.gamma)?;
    let x = generator_only_point(net, &layout)?;
    let eq = (&set.eq_mat * &x - &set.eq_rhs).amax();
    verdict(eq <= 1e-9, format!("equality residual {eq:.1e}"))
}

fn check_csv_stable(seed: u64) -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::desk();
    cfg.cases = vec![CaseSpec {
        id: None,
        kind: MatrixKind::Dct,
        m: 12,
        d: 40,
        s: 3,
    }];
    cfg.seeds = 2;
    cfg.seed_base = seed;
    cfg.settings.psg.max_iter = 200;
    cfg.solvers = vec![SolverKind::Psg, SolverKind::Gppa];
    let render = |threads: usize| -> Result<String> {
        let mut cfg = cfg.clone();
        cfg.threads = Some(threads);
        let res = run_cs_sweep(&cfg)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &res.runs {
            w.serialize(super::RunRecord {
                cpu_seconds_nondeterministic: None,
                ..r.clone()
            })?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    };
    let (a, b) = (render(1)?, render(2)?);
    verdict(a == b, format!("{} bytes", a.len()))
}
