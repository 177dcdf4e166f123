mod support;

use proptest::prelude::*;
use proxsub::qp::{feasible_point, PolyhedralSet, ProjectionOptions, Projector};
use proxsub::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Box `[-1, 1]^d` cut by a few half-spaces containing the origin and, half
/// of the time, one hyperplane through it.
fn polytope(seed: u64) -> PolyhedralSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8);
    let k = rng.random_range(0..=3);
    let a = Matrix::from_fn(k, d, |_, _| rng.random_range(-1.0..1.0));
    let b = Vector::from_fn(k, |_, _| rng.random_range(0.05..1.0));
    let mut set = PolyhedralSet::free(d)
        .with_inequalities(a, b)
        .unwrap()
        .with_bounds(Vector::from_element(d, -1.0), Vector::from_element(d, 1.0))
        .unwrap();
    if d > 1 && rng.random_bool(0.5) {
        let e = Matrix::from_fn(1, d, |_, _| rng.random_range(-1.0..1.0));
        set = set.with_equalities(e, Vector::zeros(1)).unwrap();
    }
    set
}

fn point(d: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Vector::from_fn(d, |_, _| rng.random_range(-3.0..3.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_active_set_enumeration(seed in any::<u64>()) {
        let set = polytope(seed);
        let w = point(set.dim, seed ^ 1);
        let proj = Projector::new(&set, ProjectionOptions::with_tol(TOL)).unwrap();
        let got = proj.project(&w, None).unwrap().x;
        let want = support::brute_force_projection(&set, &w, 1e-9).unwrap();
        prop_assert!((&got - &want).amax() <= 1e-6, "{got} vs {want}");
    }

    #[test]
    fn idempotent_and_nonexpansive(seed in any::<u64>()) {
        let set = polytope(seed);
        let proj = Projector::new(&set, ProjectionOptions::with_tol(TOL)).unwrap();
        let (w1, w2) = (point(set.dim, seed ^ 2), point(set.dim, seed ^ 3));
        let p1 = proj.project(&w1, None).unwrap().x;
        let p2 = proj.project(&w2, None).unwrap().x;
        prop_assert!(set.violation(&p1) <= 1e-8);
        prop_assert!((proj.project(&p1, None).unwrap().x - &p1).amax() <= 10.0 * TOL);
        prop_assert!((&p1 - &p2).norm() <= (&w1 - &w2).norm() + 10.0 * TOL);
    }

    #[test]
    fn admm_agrees_with_active_set(seed in any::<u64>()) {
        let set = polytope(seed);
        let w = point(set.dim, seed ^ 4);
        let exact = Projector::new(&set, ProjectionOptions::with_tol(TOL)).unwrap().project(&w, None).unwrap().x;
        let admm = Projector::new(&set, ProjectionOptions::admm(1e-8)).unwrap().project(&w, None).unwrap().x;
        prop_assert!((&exact - &admm).amax() <= 1e-5, "{exact} vs {admm}");
    }
}

#[test]
fn feasible_point_lies_in_set() {
    for seed in 0..20 {
        let set = polytope(seed);
        let x = feasible_point(&set, TOL).unwrap();
        assert!(set.violation(&x) <= 1e-8);
    }
}

#[test]
fn empty_polyhedron_is_reported() {
    let set = PolyhedralSet::free(2)
        .with_equalities(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]), Vector::from_vec(vec![0.0, 1.0]))
        .unwrap();
    let proj = Projector::new(&set, ProjectionOptions::with_tol(TOL));
    let res = proj.and_then(|p| p.project(&Vector::zeros(2), None));
    assert!(res.is_err());
}
