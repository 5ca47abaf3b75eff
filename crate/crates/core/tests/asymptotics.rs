use std::f64::consts::PI;

use proptest::prelude::*;

use hemicap::asymptotics::{
    alignment_limit, component_limits, delta_concentration_check, error_term_log, pairwise_error,
    retention_limit_at_zero, sum_rate_feasibility,
};
use hemicap::special::q_function;
use hemicap::LimitReport;

/// `Q(x)` by Simpson's rule on `[x, x + 40]`.
fn q_quadrature(x: f64) -> f64 {
    let steps = 40_000;
    let h = 40.0 / steps as f64;
    let f = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let mut acc = f(x) + f(x + 40.0);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn q_function_matches_quadrature() {
    for x in [0.0, 0.5, 1.0, 2.0, 3.5, 5.0, 200f64.sqrt() / 2.0] {
        let q = q_function(x);
        let r = q_quadrature(x);
        assert!((q - r).abs() <= 1e-10 * r, "x={x}: {q} vs {r}");
    }
    assert!((q_function(2.0) - 0.022_750_131_948_179).abs() < 1e-15);
}

#[test]
fn pairwise_error_at_delta_sq_200() {
    let e = pairwise_error(200.0).unwrap();
    assert!((e.q_value - 7.687e-13).abs() < 1e-15);
    assert!((e.chernoff_bound - (-25f64).exp()).abs() < 1e-25);
}

#[test]
fn delta_mean_matches_exact_expectation() {
    // E|Delta_l|^2 = 2 l n P exactly
    let m = delta_concentration_check(100, 1.0, 1, 2000, 3).unwrap() * 100.0;
    assert!((m - 200.0).abs() < 3.0, "{m}");
}

#[test]
fn limit_report_values() {
    let r = LimitReport::new(0.2, 1.0).unwrap();
    assert!((r.c - 0.336_070_7).abs() < 1e-7);
    assert!((r.retention_at_zero - 0.609_098_1).abs() < 1e-7);
    assert!((r.pupe_prefilter_at_zero + r.retention_at_zero - 1.0).abs() < 1e-15);
    assert!((r.parallel_limit - 0.159_576_9).abs() < 1e-7);
    assert!((r.output_norm_limit - 0.474_831_3).abs() < 1e-7);
    assert!((r.sent_retention_at_zero - 0.993_277_8).abs() < 1e-7);
    assert_eq!(r.ml_exponent, 0.25);
}

#[test]
fn error_terms_peak_at_one() {
    for n in [200, 400, 800] {
        let logs: Vec<f64> = (1..=20)
            .map(|l| error_term_log(n, 2.5, 0.1, 1.0, l).unwrap())
            .collect();
        let argmax = logs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }
}

#[test]
fn sum_rate_flag_flips_at_one_over_two_d() {
    assert!(sum_rate_feasibility(1e6, 2.5, 0.1, 1.0).unwrap().feasible);
    assert!(!sum_rate_feasibility(1e6, 2.5, 0.3, 1.0).unwrap().feasible);
}

proptest! {
    #[test]
    fn q_below_chernoff(delta_sq in 0.0f64..2000.0) {
        let e = pairwise_error(delta_sq).unwrap();
        prop_assert!(e.q_value <= e.chernoff_bound);
    }

    #[test]
    fn limits_are_probabilities(beta in 1e-4f64..10.0, power in 0.01f64..10.0) {
        let c = alignment_limit(beta).unwrap();
        prop_assert!(c > 0.0 && c < 1.0);
        let (ret, pupe) = retention_limit_at_zero(beta).unwrap();
        prop_assert!(ret > 0.5 && ret < 1.0 && (ret + pupe - 1.0).abs() < 1e-15);
        let comps = component_limits(beta, power).unwrap();
        prop_assert!(comps.output_norm >= comps.parallel);
    }

    #[test]
    fn alignment_increases_with_beta(a in 1e-3f64..5.0, b in 1e-3f64..5.0) {
        prop_assume!(a < b);
        prop_assert!(alignment_limit(a).unwrap() < alignment_limit(b).unwrap());
    }
}
