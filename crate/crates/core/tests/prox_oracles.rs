mod support;

use proptest::prelude::*;
use proxsub::problem::{ProxCache, ProxTerm, SmoothTerm};
use proxsub::prox::{lorentzian_value_grad, soft_threshold, Loss, LossKind, WeightedL1};
use proxsub::Vector;

proptest! {
    #[test]
    fn soft_threshold_matches_grid_oracle(w in -5.0f64..5.0, t in 0.0f64..3.0) {
        let got = soft_threshold(&Vector::from_element(1, w), t).unwrap()[0];
        prop_assert!((got - support::grid_prox_abs(w, t)).abs() <= 1e-4);
    }

    #[test]
    fn soft_threshold_is_nonexpansive(a in prop::collection::vec(-4.0f64..4.0, 6), b in prop::collection::vec(-4.0f64..4.0, 6), t in 0.0f64..2.0) {
        let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
        let (pa, pb) = (soft_threshold(&a, t).unwrap(), soft_threshold(&b, t).unwrap());
        prop_assert!((pa - pb).norm() <= (a - b).norm() + 1e-12);
    }

    #[test]
    fn weighted_l1_prox_scales_threshold(w in prop::collection::vec(-4.0f64..4.0, 5), weight in 0.0f64..2.0, tau in 0.01f64..2.0) {
        let w = Vector::from_vec(w);
        let got = WeightedL1 { weight }.prox(&w, tau, &mut ProxCache::default()).unwrap();
        for i in 0..w.len() {
            prop_assert!((got[i] - support::grid_prox_abs(w[i], weight * tau)).abs() <= 1e-4);
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences(z in prop::collection::vec(-3.0f64..3.0, 5), b in prop::collection::vec(-3.0f64..3.0, 5)) {
        let z = Vector::from_vec(z);
        for kind in [LossKind::LeastSquares, LossKind::Lorentzian] {
            let loss = Loss::new(kind, Vector::from_vec(b.clone()));
            let fd = support::fd_gradient(|x| loss.value(x), &z, 1e-5);
            let g = loss.gradient(&z);
            prop_assert!((&g - &fd).norm() <= 1e-6 * fd.norm().max(1.0), "{kind:?}: {g} vs {fd}");
        }
    }

    #[test]
    fn lorentzian_secant_slope_at_most_two(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        prop_assume!(a != b);
        let target = Vector::zeros(1);
        let (_, ga) = lorentzian_value_grad(&Vector::from_element(1, a), &target).unwrap();
        let (_, gb) = lorentzian_value_grad(&Vector::from_element(1, b), &target).unwrap();
        prop_assert!((ga[0] - gb[0]).abs() / (a - b).abs() <= 2.0 + 1e-9);
    }
}

#[test]
fn lorentzian_slope_bound_is_attained_at_origin() {
    // d/dr 2r/(1+r^2) = 2(1-r^2)/(1+r^2)^2 equals 2 at r = 0.
    let target = Vector::zeros(1);
    let h = 1e-7;
    let (_, g1) = lorentzian_value_grad(&Vector::from_element(1, h), &target).unwrap();
    let (_, g0) = lorentzian_value_grad(&Vector::from_element(1, -h), &target).unwrap();
    let slope = (g1[0] - g0[0]) / (2.0 * h);
    assert!((slope - 2.0).abs() < 1e-6);
}
