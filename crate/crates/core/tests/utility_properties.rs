//! Property tests for the recursive-utility aggregator and the deterministic
//! stream evaluators.

use approx::assert_relative_eq;
use ezport::market::EzPreferences;
use ezport::utility::{
    aggregator_f, aggregator_f_power_form, constant_stream_v0, evaluate_deterministic_utility,
    evaluate_truncated, inverse_ordinal_transform, ordinal_transform, ConsumptionStream,
};
use proptest::prelude::*;

fn prefs() -> impl Strategy<Value = EzPreferences> {
    (1.1f64..8.0, 1.1f64..4.0, 0.01f64..0.5)
        .prop_map(|(g, p, d)| EzPreferences::new(g, p, d).unwrap())
}

proptest! {
    #[test]
    fn aggregator_forms_agree(
        ez in prefs(),
        c in 0.01f64..10.0,
        v in -10.0f64..-0.01,
    ) {
        let a = aggregator_f(&ez, c, v).unwrap();
        let b = aggregator_f_power_form(&ez, c, v).unwrap();
        prop_assert!(
            (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0),
            "forms disagree: {a} vs {b}"
        );
    }

    #[test]
    fn ordinal_transform_round_trips(
        ez in prefs(),
        y in 0.01f64..50.0,
        z in -5.0f64..5.0,
    ) {
        let (ybar, zbar) = ordinal_transform(&ez, y, z).unwrap();
        let (y2, z2) = inverse_ordinal_transform(&ez, ybar, zbar).unwrap();
        prop_assert!((y2 - y).abs() <= 1e-12 * y.abs().max(1.0));
        prop_assert!((z2 - z).abs() <= 1e-10 * z.abs().max(1.0));
    }

    #[test]
    fn homothetic_scaling_of_constant_streams(
        ez in prefs(),
        c in 0.1f64..5.0,
        kappa in 0.2f64..5.0,
        t_end in 0.5f64..20.0,
    ) {
        let base = ConsumptionStream::constant(c, c, t_end).unwrap();
        let scaled = ConsumptionStream::constant(kappa * c, kappa * c, t_end).unwrap();
        let v1 = evaluate_deterministic_utility(&ez, &base, 64).unwrap().v0();
        let v2 = evaluate_deterministic_utility(&ez, &scaled, 64).unwrap().v0();
        let expected = kappa.powf(1.0 - ez.gamma) * v1;
        prop_assert!(
            (v2 - expected).abs() <= 1e-10 * expected.abs(),
            "homotheticity broken: {v2} vs {expected}"
        );
    }

    #[test]
    fn concavity_in_the_stream(
        ez in prefs(),
        c1 in 0.1f64..5.0,
        c2 in 0.1f64..5.0,
        alpha in 0.05f64..0.95,
        t_end in 0.5f64..10.0,
    ) {
        // V is concave in the consumption stream (mixture of constants is
        // again constant here, so the closed form applies on both sides).
        let mix = alpha * c1 + (1.0 - alpha) * c2;
        let v_mix = constant_stream_v0(&ez, mix, mix, t_end);
        let v_split = alpha * constant_stream_v0(&ez, c1, c1, t_end)
            + (1.0 - alpha) * constant_stream_v0(&ez, c2, c2, t_end);
        prop_assert!(
            v_mix >= v_split - 1e-8 * v_split.abs().max(1.0),
            "concavity violated: {v_mix} < {v_split}"
        );
    }

    #[test]
    fn truncation_monotone_in_level(
        ez in prefs(),
        c in 0.2f64..4.0,
        t_end in 0.5f64..5.0,
        n_low in 1.0f64..8.0,
        bump in 1.0f64..16.0,
    ) {
        let stream = ConsumptionStream::constant(c, c, t_end).unwrap();
        let y_low = evaluate_truncated(&ez, &stream, n_low, 64).unwrap().y0();
        let y_high = evaluate_truncated(&ez, &stream, n_low + bump, 64).unwrap().y0();
        // Truncated generators decrease in n pointwise, so Y^n decreases.
        prop_assert!(
            y_high <= y_low + 1e-9 * y_low.abs().max(1.0),
            "truncation not monotone: Y^{} = {y_low} < Y^{} = {y_high}",
            n_low, n_low + bump
        );
    }

    #[test]
    fn evaluator_matches_closed_form(
        ez in prefs(),
        c in 0.1f64..5.0,
        ct in 0.1f64..5.0,
        t_end in 0.5f64..20.0,
    ) {
        let stream = ConsumptionStream::constant(c, ct, t_end).unwrap();
        let v0 = evaluate_deterministic_utility(&ez, &stream, 512).unwrap().v0();
        let closed = constant_stream_v0(&ez, c, ct, t_end);
        // v0 = u0^theta amplifies the quadrature error in u0 by |theta|.
        let tol = 1e-9 * (1.0 + ez.theta.abs()) * closed.abs();
        prop_assert!((v0 - closed).abs() <= tol, "v0 {v0} vs {closed}");
    }
}

#[test]
fn piecewise_stream_continuity_across_breakpoints() {
    // A piecewise stream that happens to be constant must agree with the
    // constant closed form.
    let ez = EzPreferences::new(5.0, 1.5, 0.08).unwrap();
    let stream =
        ConsumptionStream::piecewise(vec![(0.0, 1.0), (3.0, 1.0), (7.0, 1.0)], 1.0, 10.0).unwrap();
    let v0 = evaluate_deterministic_utility(&ez, &stream, 100)
        .unwrap()
        .v0();
    assert_relative_eq!(v0, constant_stream_v0(&ez, 1.0, 1.0, 10.0), max_relative = 1e-10);
}
