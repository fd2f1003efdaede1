//! Property tests for the market-model coefficient fields and the parameter
//! condition checkers.

use ezport::market::{
    check_heston_conditions, derived_coefficients, make_heston, make_kim_omberg, EzPreferences,
    HestonParams, KimOmbergParams,
};
use proptest::prelude::*;

fn prefs() -> impl Strategy<Value = EzPreferences> {
    (1.1f64..8.0, 1.1f64..4.0, 0.01f64..0.5)
        .prop_map(|(g, p, d)| EzPreferences::new(g, p, d).unwrap())
}

proptest! {
    #[test]
    fn m_field_between_inverse_gamma_and_one(
        ez in prefs(),
        rho in -1.0f64..1.0,
        x in 0.001f64..1.0,
    ) {
        let p = HestonParams { rho, ..HestonParams::baseline() };
        let m = make_heston(p).unwrap();
        let d = derived_coefficients(&m, &ez, x).unwrap();
        prop_assert!(d.m >= 1.0 / ez.gamma - 1e-12);
        prop_assert!(d.m <= 1.0 + 1e-12);
    }

    #[test]
    fn heston_sufficient_condition_implies_item_ii(
        ez in prefs(),
        lambda in 0.01f64..2.0,
        b in 0.5f64..10.0,
        a in 0.05f64..0.45,
        ell in 0.01f64..0.1,
    ) {
        // With r1 = 0, whenever the informational sufficient condition C4
        // holds, the main inequality C3 must hold as well.
        let mut p = HestonParams { lambda, b, a, ell, ..HestonParams::baseline() };
        // Choose rho to satisfy C4 when possible: b lambda rho <= -psi a lambda^2 / 2.
        let rho_needed = -0.5 * ez.psi * a * lambda / b;
        if rho_needed < -1.0 {
            return Ok(()); // C4 unsatisfiable for this draw
        }
        p.rho = (rho_needed - 0.01).max(-1.0);
        let rep = check_heston_conditions(&p, &ez);
        let c4 = rep.conditions.iter().find(|c| c.id == "C4").unwrap();
        let c3 = rep.conditions.iter().find(|c| c.id == "C3").unwrap();
        prop_assert!(c4.pass, "constructed rho should satisfy C4");
        prop_assert!(c3.pass, "C4 held but C3 failed: left {} right {}", c3.left, c3.right);
    }

    #[test]
    fn derived_coefficients_match_direct_formulas(
        ez in prefs(),
        x in 0.001f64..0.5,
    ) {
        let p = HestonParams::baseline();
        let m = make_heston(p).unwrap();
        let d = derived_coefficients(&m, &ez, x).unwrap();
        let sigma = p.sigma * x.sqrt();
        let mu = p.sigma * p.lambda * x;
        let g = ez.gamma;
        let h_direct = (1.0 - g) * (p.r0 + p.r1 * x)
            + (1.0 - g) / (2.0 * g) * mu * mu / (sigma * sigma);
        prop_assert!((d.sigma_sq - sigma * sigma).abs() <= 1e-15 * sigma * sigma);
        prop_assert!((d.lambda - mu / sigma).abs() <= 1e-13 * (mu / sigma).abs());
        prop_assert!((d.h - h_direct).abs() <= 1e-12 * h_direct.abs().max(1.0));
        let m_direct = 1.0 + (1.0 - g) / g * p.rho * p.rho;
        prop_assert!((d.m - m_direct).abs() <= 1e-14);
    }

    #[test]
    fn feller_boundary_is_enforced(
        b in 0.1f64..10.0,
        ell in 0.001f64..0.2,
        a_scale in 0.2f64..3.0,
    ) {
        let a_critical = (2.0 * b * ell).sqrt();
        let a = a_scale * a_critical;
        let p = HestonParams { b, ell, a, ..HestonParams::baseline() };
        let built = make_heston(p);
        if a_scale < 1.0 {
            prop_assert!(built.is_ok());
        } else {
            prop_assert!(built.is_err());
        }
    }

    #[test]
    fn kim_omberg_zero_slope_always_satisfies_item_ii(
        ez in prefs(),
        b in 0.001f64..1.0,
        a in 0.001f64..0.2,
    ) {
        let p = KimOmbergParams {
            lambda1: 0.0,
            lambda0: 0.3,
            b,
            a,
            ..KimOmbergParams::baseline()
        };
        make_kim_omberg(p).unwrap();
        let rep = ezport::market::check_kim_omberg_conditions(&p, &ez);
        let d3 = rep.conditions.iter().find(|c| c.id == "D3").unwrap();
        prop_assert!(d3.pass);
        prop_assert!(d3.left.abs() <= 1e-15);
    }
}
