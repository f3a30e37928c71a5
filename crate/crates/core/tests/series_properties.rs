//! Grid properties of the direct series estimator.

use eta_riccati::series::{eta_deriv_direct, eta_direct, logistic, EtaPoint, SeriesAccuracy};

const A_GRID: [f64; 5] = [0.5, 1.0, 2.0, 10.0, 11.0];
const T_GRID: [f64; 7] = [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 30.0];

fn acc(max_terms: usize) -> SeriesAccuracy {
    SeriesAccuracy::new(max_terms, 1e-15).unwrap()
}

#[test]
fn bounds_on_grid() {
    let default = SeriesAccuracy::default();
    for &a in &A_GRID {
        for &t in &T_GRID {
            let r = eta_direct(&EtaPoint::new(a, t).unwrap(), &default);
            // the limit lies in (1/2, 1); the estimate must stay consistent
            // with that within its certified remainder
            assert!(
                r.value - r.error_estimate < 1.0 && r.value + r.error_estimate > 0.5,
                "enclosure failed at a={a}, t={t}: value={}, err={}",
                r.value,
                r.error_estimate
            );
            // strictly inside wherever the estimator itself resolves the bound
            let strict_zone = (0.5..=8.0).contains(&t) || (t == 30.0 && a <= 2.0);
            if strict_zone {
                assert!(r.value > 0.5 && r.value < 1.0, "strict bound failed at a={a}, t={t}: {}", r.value);
            }
        }
    }
}

#[test]
fn monotone_increasing_in_t() {
    let default = SeriesAccuracy::default();
    for &a in &A_GRID {
        let values: Vec<f64> =
            T_GRID.iter().map(|&t| eta_direct(&EtaPoint::new(a, t).unwrap(), &default).value).collect();
        for w in values.windows(2) {
            assert!(w[0] < w[1], "monotonicity failed for a={a}: {values:?}");
        }
    }
}

#[test]
fn first_derivative_positive_and_second_negative() {
    let default = SeriesAccuracy::default();
    for &a in &A_GRID {
        for &t in &T_GRID {
            let p = EtaPoint::new(a, t).unwrap();
            let d1 = eta_deriv_direct(&p, 1, &default).value;
            let d2 = eta_deriv_direct(&p, 2, &default).value;
            assert!(d1 > 0.0, "eta' <= 0 at a={a}, t={t}: {d1}");
            assert!(d2 < 0.0, "eta'' >= 0 at a={a}, t={t}: {d2}");
        }
    }
}

#[test]
fn remainder_soundness_between_budgets() {
    for &a in &A_GRID {
        for &t in &T_GRID {
            let p = EtaPoint::new(a, t).unwrap();
            let r5 = eta_direct(&p, &acc(100_000));
            let r6 = eta_direct(&p, &acc(1_000_000));
            assert!(
                (r5.value - r6.value).abs() <= r5.error_estimate,
                "remainder unsound at a={a}, t={t}: |{} - {}| > {}",
                r5.value,
                r6.value,
                r5.error_estimate
            );
        }
    }
}

#[test]
fn deriv_remainder_soundness_k1_k2() {
    for &a in &[1.0, 2.0] {
        for &t in &[0.5, 1.0, 2.0] {
            for k in 1..=2 {
                let p = EtaPoint::new(a, t).unwrap();
                let r5 = eta_deriv_direct(&p, k, &acc(100_000));
                let r6 = eta_deriv_direct(&p, k, &acc(1_000_000));
                assert!(
                    (r5.value - r6.value).abs() <= r5.error_estimate,
                    "k={k} remainder unsound at a={a}, t={t}"
                );
            }
        }
    }
}

#[test]
fn logistic_ode_identity_by_central_difference() {
    // f' = a f (1 - f), checked against (f(x+h)-f(x-h))/2h at h = 1e-6
    let h = 1e-6;
    for &a in &[0.5, 1.0, 3.0] {
        let mut x = 0.0f64;
        while x <= 20.0 {
            let xs = x.max(h);
            let fp = logistic(a, xs + h, 0).unwrap();
            let fm = logistic(a, xs - h, 0).unwrap();
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = logistic(a, xs, 1).unwrap();
            let rel = (numeric - analytic).abs() / analytic.abs().max(1e-300);
            assert!(rel < 1e-8, "ODE identity off by {rel:e} at a={a}, x={xs}");
            x += 0.5;
        }
    }
}

#[test]
fn second_derivative_identity_matches_closed_form() {
    // f'' = a^2 f (1-f)(1-2f) against differencing f'
    let h = 1e-6;
    for &a in &[1.0, 2.0] {
        for &x in &[0.25, 1.0, 3.0, 7.0] {
            let numeric = (logistic(a, x + h, 1).unwrap() - logistic(a, x - h, 1).unwrap()) / (2.0 * h);
            let analytic = logistic(a, x, 2).unwrap();
            assert!((numeric - analytic).abs() < 1e-7 * analytic.abs().max(1e-3));
        }
    }
}

#[test]
fn convergence_flag_honors_tolerance() {
    // t large: certified below tolerance quickly
    let p = EtaPoint::new(1.0, 12.0).unwrap();
    let r = eta_direct(&p, &SeriesAccuracy::default());
    assert!(r.converged && r.error_estimate <= 1e-15 && r.terms_used < 30);
    // t small: runs out of terms, still carries a finite bound for k = 0
    let p = EtaPoint::new(1.0, 0.1).unwrap();
    let r = eta_direct(&p, &SeriesAccuracy::default());
    assert!(!r.converged && r.error_estimate.is_finite());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn logistic_ode_residual_random(a in 0.2f64..5.0, x in 0.0f64..18.0) {
            let h = 1e-6;
            let x = x.max(h);
            let numeric = (logistic(a, x + h, 0).unwrap() - logistic(a, x - h, 0).unwrap()) / (2.0 * h);
            let analytic = logistic(a, x, 1).unwrap();
            prop_assert!((numeric - analytic).abs() <= 1e-7 * analytic.max(1e-12));
        }

        #[test]
        fn partial_sums_stay_enclosed(a in 0.3f64..12.0, t in 0.3f64..20.0, budget in 200usize..5000) {
            // two different budgets past the peak bracket the same limit
            let p = EtaPoint::new(a, t).unwrap();
            let small = eta_direct(&p, &acc(budget));
            let big = eta_direct(&p, &acc(200_000));
            prop_assert!((small.value - big.value).abs() <= small.error_estimate + big.error_estimate);
        }
    }
}
