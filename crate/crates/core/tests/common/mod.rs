//! Shared oracles for the integration tests. These are computed from closed
//! forms independent of the library's solvers so they can cross-check them.

#![allow(dead_code)]

use ezport::market::EzPreferences;

/// Closed-form solution of the x-independent value ODE for constant market
/// coefficients, via the Riccati substitution: with `q = delta^psi
/// e^(-(psi/theta) y)` the ODE becomes `q' = q^2 + beta q`,
/// `beta = (psi/theta)(h - delta theta)`, and `v = 1/q` is linear:
/// `v(t) = (v(T) + 1/beta) e^(beta (T - t)) - 1/beta`, `v(T) = delta^-psi`.
pub fn riccati_y(ez: &EzPreferences, h: f64, t: f64, t_end: f64) -> f64 {
    let beta = ez.psi / ez.theta * (h - ez.delta * ez.theta);
    let v_terminal = ez.delta.powf(-ez.psi);
    let tau = t_end - t;
    let v = if beta.abs() < 1e-14 {
        v_terminal + tau
    } else {
        (v_terminal + 1.0 / beta) * (beta * tau).exp() - 1.0 / beta
    };
    ez.theta / ez.psi * (ez.delta.powf(ez.psi) * v).ln()
}

/// Golden-section minimization on [lo, hi] to absolute tolerance `tol`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
