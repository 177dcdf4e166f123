mod support;

use std::sync::Arc;

use proptest::prelude::*;
use proxsub::baselines::{gppa_solve, pdcae_solve, BaselineParams};
use proxsub::cs::{build_cs_problem, CaseSpec, CsInstance, MatrixKind};
use proxsub::prox::{L1L2Regularizer, Loss, LossKind, WeightedL1, WeightedNorm};
use proxsub::{
    check_decrease, solve, tau_upper_bound, LinearMap, MuSchedule, ProblemSpec, SolverParams, Status, TauRule, Vector,
};

fn instance(seed: u64, kind: MatrixKind, loss: LossKind) -> CsInstance {
    let gamma = if loss == LossKind::Lorentzian { 0.001 } else { 0.1 };
    let case = CaseSpec {
        id: None,
        kind,
        m: 24,
        d: 72,
        s: 3,
    };
    CsInstance::generate(case, loss, L1L2Regularizer::new(gamma, 1.0).unwrap(), seed, None).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = MatrixKind> {
    prop_oneof![Just(MatrixKind::Gaussian), Just(MatrixKind::Dct)]
}

fn loss_strategy() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::LeastSquares), Just(LossKind::Lorentzian)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lyapunov_sequence_decreases(
        seed in 0u64..10_000,
        kind in kind_strategy(),
        loss in loss_strategy(),
        restart in prop_oneof![Just(None), Just(Some(50usize)), Just(Some(7usize))],
        max_schedule in any::<bool>(),
    ) {
        let inst = instance(seed, kind, loss);
        let spec = build_cs_problem(&inst).unwrap();
        let params = SolverParams {
            max_iter: 400,
            restart_period: restart,
            mu_schedule: if max_schedule { MuSchedule::Max } else { MuSchedule::Kappa },
            ..SolverParams::default()
        };
        let x0 = Vector::zeros(inst.d());
        let rep = solve(&spec, &x0, &params).unwrap();
        let bound = 1e-10 * (1.0 + spec.objective(&x0).abs());
        let check = check_decrease(&rep.trace, params.lyapunov_weight(&spec), params.delta);
        prop_assert!(check.passed(bound), "violation {} at {:?}", check.max_violation, check.worst_iteration);
        prop_assert_eq!(rep.max_lyapunov_violation, Some(check.max_violation));
        for r in &rep.trace.records {
            prop_assert!((0.0..=params.lambda_bar).contains(&r.lambda));
            prop_assert!(r.mu >= 0.0 && r.mu <= params.mu_bar * r.tau * (1.0 + 1e-15));
        }
    }

    #[test]
    fn objective_never_exceeds_start(seed in 0u64..10_000, kind in kind_strategy()) {
        let inst = instance(seed, kind, LossKind::LeastSquares);
        let spec = build_cs_problem(&inst).unwrap();
        let x0 = Vector::zeros(inst.d());
        let f0 = spec.objective(&x0);
        let rep = solve(&spec, &x0, &SolverParams { max_iter: 200, ..SolverParams::default() }).unwrap();
        prop_assert!(rep.trace.objectives().all(|f| f <= f0 + 1e-10 * (1.0 + f0.abs())));
    }
}

#[test]
fn step_bound_matches_closed_form() {
    for seed in 0..5 {
        let inst = instance(seed, MatrixKind::Gaussian, LossKind::Lorentzian);
        let spec = build_cs_problem(&inst).unwrap();
        let p = SolverParams::default();
        let norm = support::eig_spectral_norm(&inst.matrix);
        let ell = 2.0;
        let want = 1.0 / (0.0 + 2.0 * p.delta + ell * norm * norm * (2.0 * p.lambda_bar + 1.0) + 2.0 * p.mu_bar);
        let got = tau_upper_bound(&spec, &p).unwrap();
        // ||A|| is inflated by (1 + 1e-6) so it bounds the true norm.
        assert!((got - want).abs() <= 5e-6 * want, "{got} vs {want}");
        assert!(got <= want * (1.0 + 1e-12));
    }
}

#[test]
fn reduces_to_gppa_without_extrapolation() {
    let d = 30;
    let b = Vector::from_fn(d, |i, _| ((i * 7 % 11) as f64 - 5.0) / 2.0);
    let spec = ProblemSpec::new(
        Arc::new(WeightedL1 { weight: 0.4 }),
        Arc::new(Loss::new(LossKind::LeastSquares, b)),
        Arc::new(WeightedNorm { weight: 0.4 }),
        LinearMap::identity(d),
        1.0,
    )
    .unwrap();
    let base = SolverParams {
        lambda_bar: 0.0,
        mu_bar: 0.0,
        max_iter: 100,
        stop_rel_tol: 0.0,
        keep_iterates: Some(true),
        ..SolverParams::default()
    };
    let tau = tau_upper_bound(&spec, &base).unwrap();
    let params = SolverParams {
        tau_rule: TauRule::constant(tau),
        ..base
    };
    let x0 = Vector::from_fn(d, |i, _| (i as f64).sin());
    let a = solve(&spec, &x0, &params).unwrap();
    let g = gppa_solve(
        &spec,
        &x0,
        &BaselineParams {
            max_iter: 100,
            stop_rel_tol: 0.0,
            keep_iterates: Some(true),
            ..BaselineParams::with_tau(tau)
        },
    )
    .unwrap();
    let (xa, xg) = (a.trace.iterates.unwrap(), g.trace.iterates.unwrap());
    assert_eq!(xa.len(), xg.len());
    for (n, (p, q)) in xa.iter().zip(&xg).enumerate() {
        assert!((p - q).amax() <= 1e-12, "iterate {n}");
    }
}

#[test]
fn out_of_range_tau_sequence_is_rejected() {
    let inst = instance(1, MatrixKind::Dct, LossKind::LeastSquares);
    let spec = build_cs_problem(&inst).unwrap();
    let bound = tau_upper_bound(&spec, &SolverParams::default()).unwrap();
    let params = SolverParams {
        tau_rule: TauRule::constant(2.0 * bound),
        ..SolverParams::default()
    };
    assert!(solve(&spec, &Vector::zeros(inst.d()), &params).is_err());
    let bad = SolverParams {
        delta: 0.0,
        ..SolverParams::default()
    };
    assert!(solve(&spec, &Vector::zeros(inst.d()), &bad).is_err());
}

#[test]
fn iteration_cap_is_reported() {
    let inst = instance(2, MatrixKind::Gaussian, LossKind::LeastSquares);
    let spec = build_cs_problem(&inst).unwrap();
    let rep = solve(&spec, &Vector::zeros(inst.d()), &SolverParams { max_iter: 5, ..SolverParams::default() }).unwrap();
    assert_eq!(rep.status, Status::MaxIter);
    assert_eq!(rep.iterations, 5);
}

#[test]
fn baselines_decrease_the_objective() {
    for seed in 0..3 {
        let inst = instance(seed, MatrixKind::Gaussian, LossKind::LeastSquares);
        let spec = build_cs_problem(&inst).unwrap();
        let x0 = Vector::zeros(inst.d());
        let f0 = spec.objective(&x0);
        let g = gppa_solve(&spec, &x0, &BaselineParams::gppa(&spec)).unwrap();
        assert!(g.max_lyapunov_violation.unwrap() <= 1e-10 * (1.0 + f0));
        let p = pdcae_solve(&spec, &x0, &BaselineParams::pdcae(&spec)).unwrap();
        assert!(p.objective < f0 && g.objective < f0);
    }
}
