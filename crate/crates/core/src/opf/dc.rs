//! DC optimal power flow with relaxed binary PV placement:
//!
//! `min  C sum X + sum_G (a P_G^2 + b P_G + c) - sum P_PV / sum D - gamma sum (X^2 - X)`
//!
//! over the polyhedron `S` of DC flow, nodal balance, penetration, line and
//! capacity constraints. In the solver's form: `f = iota_S`, `A = I`, `h` the
//! first three terms (`ell = 2a`), `g = gamma sum (X^2 - X)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::network::NetworkData;
use crate::error::{check_dim, Error, Result};
use crate::linear_map::{LinearMap, Matrix, Vector};
use crate::problem::{ProblemSpec, SmoothTerm, SubgradientTerm};
use crate::qp::{PolyhedralIndicator, PolyhedralSet, ProjectionOptions};

/// Minimum share of demand served by PV.
pub const PENETRATION_MIN: f64 = 0.5;

/// Index map of `x = [P_PV(n), P_G(|M|), X(n), theta(n), P(n x n, row-major)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DcOpfLayout {
    pub n_buses: usize,
    /// 0-based generator buses, in the order of the `P_G` block.
    pub generators: Vec<usize>,
}

/// Unpacked decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DcOpfPoint {
    pub pv: Vector,
    pub gen: Vector,
    pub placement: Vector,
    pub theta: Vector,
    pub flow: Matrix,
}

impl DcOpfLayout {
    pub fn new(n_buses: usize, generators: Vec<usize>) -> Self {
        Self { n_buses, generators }
    }

    pub fn dim(&self) -> usize {
        let n = self.n_buses;
        3 * n + self.generators.len() + n * n
    }

    pub fn pv(&self, i: usize) -> usize {
        i
    }

    /// Position of the `k`-th generator in `x`.
    pub fn gen(&self, k: usize) -> usize {
        self.n_buses + k
    }

    pub fn placement(&self, i: usize) -> usize {
        self.n_buses + self.generators.len() + i
    }

    pub fn theta(&self, i: usize) -> usize {
        2 * self.n_buses + self.generators.len() + i
    }

    pub fn flow(&self, i: usize, j: usize) -> usize {
        3 * self.n_buses + self.generators.len() + i * self.n_buses + j
    }

    pub fn placement_block<'a>(&self, x: &'a Vector) -> nalgebra::DVectorView<'a, f64> {
        x.rows(self.placement(0), self.n_buses)
    }

    pub fn pack(&self, p: &DcOpfPoint) -> Result<Vector> {
        let n = self.n_buses;
        for len in [p.pv.len(), p.placement.len(), p.theta.len()] {
            check_dim(n, len)?;
        }
        check_dim(self.generators.len(), p.gen.len())?;
        check_dim(n * n, p.flow.len())?;
        let mut x = Vector::zeros(self.dim());
        for i in 0..n {
            x[self.pv(i)] = p.pv[i];
            x[self.placement(i)] = p.placement[i];
            x[self.theta(i)] = p.theta[i];
            for j in 0..n {
                x[self.flow(i, j)] = p.flow[(i, j)];
            }
        }
        for k in 0..self.generators.len() {
            x[self.gen(k)] = p.gen[k];
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &Vector) -> Result<DcOpfPoint> {
        check_dim(self.dim(), x.len())?;
        let n = self.n_buses;
        Ok(DcOpfPoint {
            pv: Vector::from_fn(n, |i, _| x[self.pv(i)]),
            gen: Vector::from_fn(self.generators.len(), |k, _| x[self.gen(k)]),
            placement: Vector::from_fn(n, |i, _| x[self.placement(i)]),
            theta: Vector::from_fn(n, |i, _| x[self.theta(i)]),
            flow: Matrix::from_fn(n, n, |i, j| x[self.flow(i, j)]),
        })
    }
}

/// `C sum X + sum_G cost(P_G) - sum P_PV / sum D`.
#[derive(Debug, Clone)]
pub struct DcOpfCost {
    layout: DcOpfLayout,
    unit_cost: f64,
    cost: super::network::GeneratorCost,
    total_demand: f64,
}

impl DcOpfCost {
    pub fn new(net: &NetworkData, layout: DcOpfLayout) -> Self {
        Self {
            layout,
            unit_cost: net.pv_unit_cost,
            cost: net.cost,
            total_demand: net.total_demand(),
        }
    }
}

impl SmoothTerm for DcOpfCost {
    fn value(&self, x: &Vector) -> f64 {
        let l = &self.layout;
        let install: f64 = self.unit_cost * l.placement_block(x).sum();
        let gen: f64 = (0..l.generators.len()).map(|k| self.cost.value(x[l.gen(k)])).sum();
        let pv: f64 = x.rows(l.pv(0), l.n_buses).sum();
        install + gen - pv / self.total_demand
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let l = &self.layout;
        let mut g = Vector::zeros(x.len());
        for i in 0..l.n_buses {
            g[l.placement(i)] = self.unit_cost;
            g[l.pv(i)] = -1.0 / self.total_demand;
        }
        for k in 0..l.generators.len() {
            g[l.gen(k)] = self.cost.derivative(x[l.gen(k)]);
        }
        g
    }
}

/// `gamma sum (X_i^2 - X_i)`, smooth and convex; its gradient is the selection.
#[derive(Debug, Clone)]
pub struct BinaryPenalty {
    layout: DcOpfLayout,
    gamma: f64,
}

impl BinaryPenalty {
    pub fn new(layout: DcOpfLayout, gamma: f64) -> Self {
        Self { layout, gamma }
    }
}

impl SubgradientTerm for BinaryPenalty {
    fn value(&self, x: &Vector) -> f64 {
        self.gamma * self.layout.placement_block(x).iter().map(|xi| xi * xi - xi).sum::<f64>()
    }

    fn subgradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(x.len());
        for i in 0..self.layout.n_buses {
            let j = self.layout.placement(i);
            g[j] = self.gamma * (2.0 * x[j] - 1.0);
        }
        g
    }
}

/// Index of the slack bus: the first generator.
fn slack_bus(net: &NetworkData) -> usize {
    net.generator_buses[0]
}

/// The feasible polyhedron `S`.
///
/// The angle box `[0, 2 pi]` applies to generator buses only; the other
/// angles are free (their sign follows the flow direction).
pub fn dcopf_feasible_set(net: &NetworkData, layout: &DcOpfLayout) -> Result<PolyhedralSet> {
    let n = net.n_buses();
    let dim = layout.dim();
    let b = &net.susceptance;

    // Flow definitions (n^2), slack angle (1), nodal balance (n).
    let n_eq = n * n + 1 + n;
    let mut eq = Matrix::zeros(n_eq, dim);
    let mut eq_rhs = Vector::zeros(n_eq);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            eq[(r, layout.flow(i, j))] = 1.0;
            if i != j && b[(i, j)] != 0.0 {
                eq[(r, layout.theta(i))] -= b[(i, j)];
                eq[(r, layout.theta(j))] += b[(i, j)];
            }
        }
    }
    eq[(n * n, layout.theta(slack_bus(net)))] = 1.0;
    for i in 0..n {
        let r = n * n + 1 + i;
        for j in 0..n {
            if j != i {
                eq[(r, layout.flow(i, j))] = 1.0;
            }
        }
        eq[(r, layout.pv(i))] = -1.0;
        if let Some(k) = layout.generators.iter().position(|&g| g == i) {
            eq[(r, layout.gen(k))] = -1.0;
        }
        eq_rhs[r] = -net.demand[i];
    }

    // Penetration (1), PV only where installed (n).
    let mut ineq = Matrix::zeros(1 + n, dim);
    let mut ineq_rhs = Vector::zeros(1 + n);
    for i in 0..n {
        ineq[(0, layout.pv(i))] = -1.0;
        ineq[(1 + i, layout.pv(i))] = 1.0;
        ineq[(1 + i, layout.placement(i))] = -net.pv_active_max;
    }
    ineq_rhs[0] = -PENETRATION_MIN * net.total_demand();

    let mut lo = Vector::from_element(dim, f64::NEG_INFINITY);
    let mut hi = Vector::from_element(dim, f64::INFINITY);
    for i in 0..n {
        lo[layout.pv(i)] = 0.0;
        lo[layout.placement(i)] = 0.0;
        hi[layout.placement(i)] = 1.0;
        for j in 0..n {
            lo[layout.flow(i, j)] = -net.line_active_max;
            hi[layout.flow(i, j)] = net.line_active_max;
        }
    }
    for (k, &bus) in layout.generators.iter().enumerate() {
        lo[layout.gen(k)] = 0.0;
        hi[layout.gen(k)] = net.gen_active_max;
        lo[layout.theta(bus)] = 0.0;
        hi[layout.theta(bus)] = 2.0 * PI;
    }

    PolyhedralSet::free(dim)
        .with_equalities(eq, eq_rhs)?
        .with_inequalities(ineq, ineq_rhs)?
        .with_bounds(lo, hi)
}

/// Assembles `(spec, S, layout)` with `f = iota_S` projected to `proj` options.
pub fn build_dcopf_with(
    net: &NetworkData,
    gamma: f64,
    proj: ProjectionOptions,
) -> Result<(ProblemSpec, PolyhedralSet, DcOpfLayout)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let layout = DcOpfLayout::new(net.n_buses(), net.generator_buses.clone());
    let set = dcopf_feasible_set(net, &layout)?;
    let indicator = PolyhedralIndicator::new(&set, proj)?;
    let spec = ProblemSpec::with_norm(
        Arc::new(indicator),
        Arc::new(DcOpfCost::new(net, layout.clone())),
        Arc::new(BinaryPenalty::new(layout.clone(), gamma)),
        LinearMap::identity(layout.dim()),
        2.0 * net.cost.a,
        1.0,
    )?;
    Ok((spec, set, layout))
}

pub fn build_dcopf(net: &NetworkData, gamma: f64) -> Result<(ProblemSpec, PolyhedralSet, DcOpfLayout)> {
    build_dcopf_with(net, gamma, ProjectionOptions::default())
}

/// Pre-optimization operating point: no PV, the generators cover all demand
/// and the DC flow equations are solved for the angles.
///
/// Violates the penetration constraint by construction; useful as a check of
/// the flow rows alone.
pub fn generator_only_point(net: &NetworkData, layout: &DcOpfLayout) -> Result<Vector> {
    let n = net.n_buses();
    let slack = slack_bus(net);
    // Reduced Laplacian L theta = injections, with theta_slack = 0.
    let lap = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            net.susceptance.row(i).sum()
        } else {
            -net.susceptance[(i, j)]
        }
    });
    let mut inj = -net.demand.clone();
    inj[slack] += net.total_demand();
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let red = Matrix::from_fn(keep.len(), keep.len(), |r, c| lap[(keep[r], keep[c])]);
    let rhs = Vector::from_fn(keep.len(), |r, _| inj[keep[r]]);
    let sol = red
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("network is not connected".into()))?;
    let mut theta = Vector::zeros(n);
    for (r, &i) in keep.iter().enumerate() {
        theta[i] = sol[r];
    }
    let flow = Matrix::from_fn(n, n, |i, j| net.susceptance[(i, j)] * (theta[i] - theta[j]));
    let gen = Vector::from_fn(layout.generators.len(), |k, _| if k == 0 { net.total_demand() } else { 0.0 });
    layout.pack(&DcOpfPoint {
        pv: Vector::zeros(n),
        gen,
        placement: Vector::zeros(n),
        theta,
        flow,
    })
}

/// Uniform sample from the variable box; free angles are drawn from `[0, 2 pi]`.
pub fn random_box_point<R: Rng + ?Sized>(set: &PolyhedralSet, rng: &mut R) -> Vector {
    Vector::from_fn(set.dim, |j, _| {
        let (lo, hi) = (set.lower[j], set.upper[j]);
        let (lo, hi) = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            _ => (0.0, 2.0 * PI),
        };
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    })
}

/// `sum max(0, X_i (1 - X_i))`.
pub fn binary_relaxation_gap(x: &Vector, layout: &DcOpfLayout) -> Result<f64> {
    check_dim(layout.dim(), x.len())?;
    Ok(layout
        .placement_block(x)
        .iter()
        .map(|xi| (xi * (1.0 - xi)).max(0.0))
        .sum())
}

/// PV share of demand, `sum P_PV / sum D`.
pub fn penetration(x: &Vector, net: &NetworkData, layout: &DcOpfLayout) -> f64 {
    x.rows(layout.pv(0), layout.n_buses).sum() / net.total_demand()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dispatch {
    /// 1-based bus label.
    pub bus: usize,
    pub active_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    /// 1-based labels of buses with a PV system after rounding.
    pub placement: Vec<usize>,
    /// `(bus, X_i)` pairs further than `round_tol` from both 0 and 1.
    pub fractional: Vec<(usize, f64)>,
    /// `"binary"` or `"unrounded relaxation"`.
    pub status: String,
    pub generators: Vec<Dispatch>,
    pub pv: Vec<Dispatch>,
    pub penetration: f64,
    /// Relaxed objective `h - g` at the solution.
    pub objective: f64,
    pub relaxation_gap: f64,
    pub installation_cost_usd: f64,
    pub generation_cost_usd: f64,
    pub total_cost_usd: f64,
    pub baseline_cost_usd: Option<f64>,
    /// `1 - total / baseline`, when a baseline is known.
    pub cost_reduction: Option<f64>,
}

impl PlanReport {
    pub fn is_binary(&self) -> bool {
        self.fractional.is_empty()
    }

    /// Human-readable summary.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let buses: Vec<String> = self.placement.iter().map(|b| b.to_string()).collect();
        s += &format!("status               {}\n", self.status);
        s += &format!("PV placement (buses)  {{{}}}\n", buses.join(", "));
        for (bus, xi) in &self.fractional {
            s += &format!("  fractional X_{bus}      {xi:.6}\n");
        }
        for d in &self.generators {
            s += &format!("generator bus {:<7}{:.6} pu\n", d.bus, d.active_pu);
        }
        for d in self.pv.iter().filter(|d| d.active_pu > 0.0) {
            s += &format!("PV bus {:<14}{:.6} pu\n", d.bus, d.active_pu);
        }
        s += &format!("penetration          {:.4}\n", self.penetration);
        s += &format!("objective            {:.6}\n", self.objective);
        s += &format!("installation cost    ${:.0}\n", self.installation_cost_usd);
        s += &format!("generation cost      ${:.0}\n", self.generation_cost_usd);
        s += &format!("total cost           ${:.0}\n", self.total_cost_usd);
        if let (Some(base), Some(red)) = (self.baseline_cost_usd, self.cost_reduction) {
            s += &format!("baseline cost        ${base:.0}\n");
            s += &format!("cost reduction       {:.1}%\n", 100.0 * red);
        }
        s
    }
}

/// Rounds the placement and prices the plan.
///
/// `baseline_cost_usd` is the cost of the pre-optimization operating point,
/// which comes from outside this model.
pub fn postprocess_solution(
    x: &Vector,
    net: &NetworkData,
    layout: &DcOpfLayout,
    round_tol: f64,
    baseline_cost_usd: Option<f64>,
) -> Result<PlanReport> {
    check_dim(layout.dim(), x.len())?;
    let gamma_free = DcOpfCost::new(net, layout.clone());
    let objective = gamma_free.value(x) - BinaryPenalty::new(layout.clone(), net.gamma).value(x);

    let mut placement = Vec::new();
    let mut fractional = Vec::new();
    let mut installed = 0.0;
    for i in 0..layout.n_buses {
        let xi = x[layout.placement(i)];
        if (xi - 1.0).abs() <= round_tol {
            placement.push(i + 1);
            installed += 1.0;
        } else if xi.abs() > round_tol {
            fractional.push((i + 1, xi));
            installed += xi;
        }
    }
    let generators: Vec<Dispatch> = layout
        .generators
        .iter()
        .enumerate()
        .map(|(k, &bus)| Dispatch {
            bus: bus + 1,
            active_pu: x[layout.gen(k)],
        })
        .collect();
    let pv = (0..layout.n_buses)
        .map(|i| Dispatch {
            bus: i + 1,
            active_pu: x[layout.pv(i)],
        })
        .collect();
    let usd = net.dollars_per_unit;
    let installation_cost_usd = net.pv_unit_cost * installed * usd;
    let generation_cost_usd: f64 = generators.iter().map(|d| net.cost.value(d.active_pu)).sum::<f64>() * usd;
    let total_cost_usd = installation_cost_usd + generation_cost_usd;
    let cost_reduction = baseline_cost_usd.map(|b| 1.0 - total_cost_usd / b);
    Ok(PlanReport {
        status: if fractional.is_empty() { "binary" } else { "unrounded relaxation" }.to_string(),
        placement,
        fractional,
        generators,
        pv,
        penetration: penetration(x, net, layout),
        objective,
        relaxation_gap: binary_relaxation_gap(x, layout)?,
        installation_cost_usd,
        generation_cost_usd,
        total_cost_usd,
        baseline_cost_usd,
        cost_reduction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (NetworkData, DcOpfLayout) {
        let net = NetworkData::bundled();
        let layout = DcOpfLayout::new(14, vec![10]);
        (net, layout)
    }

    #[test]
    fn layout_is_bijective() {
        let (_, l) = setup();
        assert_eq!(l.dim(), 239);
        let mut seen = vec![false; l.dim()];
        let mut mark = |k: usize| {
            assert!(!seen[k]);
            seen[k] = true;
        };
        for i in 0..14 {
            mark(l.pv(i));
            mark(l.placement(i));
            mark(l.theta(i));
            for j in 0..14 {
                mark(l.flow(i, j));
            }
        }
        mark(l.gen(0));
        assert!(seen.iter().all(|&s| s));
        assert_eq!((l.gen(0), l.placement(0), l.theta(0), l.flow(0, 0)), (14, 15, 29, 43));
    }

    #[test]
    fn pack_unpack_round_trip() {
        let (_, l) = setup();
        let x = Vector::from_fn(l.dim(), |i, _| i as f64 * 0.5 - 3.0);
        assert_eq!(l.pack(&l.unpack(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn objective_pieces() {
        let (net, l) = setup();
        let (spec, _, _) = build_dcopf(&net, 1.0).unwrap();
        let zero = Vector::zeros(l.dim());
        assert!((spec.h.value(&zero) - 0.433).abs() < 1e-15);
        assert_eq!(spec.g.value(&zero), 0.0);
        let mut x = zero.clone();
        for i in 0..14 {
            x[l.placement(i)] = 1.0;
        }
        assert_eq!(spec.g.value(&x), 0.0);
        for i in 0..14 {
            x[l.placement(i)] = 0.5;
        }
        assert!((spec.g.value(&x) + 3.5).abs() < 1e-15);
        assert!((spec.lipschitz - 0.492).abs() < 1e-15);
    }

    #[test]
    fn relaxation_gap_examples() {
        let (_, l) = setup();
        let mut x = Vector::zeros(l.dim());
        assert_eq!(binary_relaxation_gap(&x, &l).unwrap(), 0.0);
        x[l.placement(3)] = 0.5;
        assert_eq!(binary_relaxation_gap(&x, &l).unwrap(), 0.25);
        x[l.placement(3)] = 0.0;
        x[l.placement(0)] = 0.9;
        x[l.placement(1)] = 0.1;
        assert!((binary_relaxation_gap(&x, &l).unwrap() - 0.18).abs() < 1e-15);
    }

    #[test]
    fn generator_only_point_satisfies_flow_rows() {
        let (net, l) = setup();
        let set = dcopf_feasible_set(&net, &l).unwrap();
        let x = generator_only_point(&net, &l).unwrap();
        let eq_res = (&set.eq_mat * &x - &set.eq_rhs).amax();
        assert!(eq_res < 1e-12, "{eq_res}");
        let p = l.unpack(&x).unwrap();
        assert!((p.flow.clone() + p.flow.transpose()).amax() < 1e-15);
        // Only the penetration row is violated.
        let ineq = &set.ineq_mat * &x - &set.ineq_rhs;
        assert!(ineq[0] > 0.0);
        assert!(ineq.rows(1, 14).max() <= 0.0);
    }

    #[test]
    fn postprocess_zero_placement() {
        let (net, l) = setup();
        let x = generator_only_point(&net, &l).unwrap();
        let r = postprocess_solution(&x, &net, &l, 1e-6, None).unwrap();
        assert!(r.placement.is_empty());
        assert!(r.is_binary());
        assert_eq!(r.status, "binary");
        assert_eq!(r.installation_cost_usd, 0.0);
    }

    #[test]
    fn postprocess_flags_fractional() {
        let (net, l) = setup();
        let mut x = generator_only_point(&net, &l).unwrap();
        x[l.placement(6)] = 1.0;
        x[l.placement(8)] = 0.4;
        let r = postprocess_solution(&x, &net, &l, 1e-6, Some(1e7)).unwrap();
        assert_eq!(r.placement, vec![7]);
        assert_eq!(r.fractional, vec![(9, 0.4)]);
        assert_eq!(r.status, "unrounded relaxation");
        assert!(r.cost_reduction.is_some());
    }
}
