//! The reference closed forms are reproduced term by term and kept separate from
//! the exact renewal oracles. These tests freeze their values and
//! record where they agree with the exact models.

use tinyarq::protocols::closed_forms::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-8 * b.abs().max(1.0)
}

#[test]
fn coded_coefficients_stay_in_their_ranges() {
    for i in 0..100 {
        let eps = 0.5 * f64::from(i) / 99.0;
        let a = coded_alpha(eps);
        let b = coded_beta(eps);
        assert!((0.75..=1.0).contains(&a), "alpha({eps}) = {a}");
        assert!((0.5..0.65).contains(&b), "beta({eps}) = {b}");
    }
    assert_eq!(coded_alpha(0.0), 1.0);
    assert_eq!(coded_beta(0.0), 0.5);
}

#[test]
fn frozen_reference_values() {
    let cases = [
        (
            0.5,
            5,
            8,
            0.514934792,
            0.926990646,
            19.416666667,
            50.784722222,
        ),
        (
            0.2,
            5,
            8,
            0.864706086,
            1.576494670,
            8.302533333,
            7.861663582,
        ),
        (0.3, 10, 30, 0.749716876, 1.4, 22.248691462, 196.451729315),
    ];
    for (e, k, t, coded_eta, cf_eta, coded_mean, coded_var) in cases {
        assert!(close(coded_throughput_alpha_beta(e, k, t), coded_eta));
        assert!(close(cf_throughput_alpha(e, k, t), cf_eta));
        assert!((coded_mean_delay_rational(e, k, t) - coded_mean).abs() < 1e-8);
        assert!((coded_delay_variance_rational(e, k, t) - coded_var).abs() < 1e-8);
    }
    assert!(close(uncoded_delay_variance_expanded(0.5, 5, 8), 180.75));
    assert!(close(uncoded_delay_variance_leading(0.2, 5, 8), 0.7));
}

#[test]
fn exact_forms_at_reference_points() {
    assert!(close(uncoded_delay_variance(0.2, 5, 8), 10.4725));
    assert!(close(cf_closed_form_throughput(0.5, 5, 8), 0.435897436));
    assert!(close(coded_closed_forms(0.5, 5, 8).throughput, 0.457692308));
    assert!(close(
        coded_closed_forms(0.5, 5, 8).delay_variance,
        93.716553288
    ));
}

#[test]
fn forms_reduce_to_error_free_values() {
    for (k, t) in [(5, 8), (10, 30)] {
        let kf = f64::from(k);
        assert_eq!(uncoded_throughput(0.0, k, t), 1.0);
        assert_eq!(uncoded_mean_delay(0.0, k, t), kf);
        assert_eq!(uncoded_delay_variance(0.0, k, t), 0.0);
        assert!(close(cf_mean_delay_series(0.0, k, t, 3), kf + 1.0));
        assert!(close(coded_mean_delay_series(0.0, k, t, 3), kf + 1.0));
        assert!(close(coded_closed_forms(0.0, k, t).mean_delay, kf + 1.0));
        // The expanded reference form of the uncoded variance does not vanish on an
        // error-free link; the exact form does.
        assert!(close(uncoded_delay_variance_expanded(0.0, k, t), -kf));
    }
}

#[test]
fn small_erasure_series_approach_exact_values() {
    for (k, t) in [(5, 8), (5, 15), (10, 16), (10, 30)] {
        let cf = |e| (cf_moments(e, k, t).1.mean - cf_mean_delay_series(e, k, t, 2)).abs();
        let coded = |e| (coded_moments(e, k, t).1.mean - coded_mean_delay_series(e, k, t, 2)).abs();
        assert!(cf(0.01) < cf(0.02) && cf(0.02) < cf(0.04));
        assert!(coded(0.01) < coded(0.02) && coded(0.02) < coded(0.04));
        assert!(cf(1e-6) < 1e-4 && coded(1e-6) < 1e-4);
    }
}
