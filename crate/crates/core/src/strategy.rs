//! Optimal feedback controls extracted from a solved value surface, and the
//! candidate state-price deflator along simulated paths with an
//! SDE-consistency diagnostic.

use ndarray::Array2;

use crate::error::{EzError, Result};
use crate::market::{EzPreferences, MarketModel};
use crate::solver::{bilinear, Grid, PolicySpec, ValueSurface};

/// Optimal risky fraction and consumption-wealth ratio on the solver grid.
#[derive(Clone, Debug)]
pub struct PolicySurface {
    pub grid: Grid,
    pub pi_star: Array2<f64>,
    pub ctilde_star: Array2<f64>,
}

impl PolicySurface {
    pub fn interp_pi(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.pi_star, t, x)
    }

    pub fn interp_ctilde(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.ctilde_star, t, x)
    }

    /// The same policy as raw grid arrays for the policy-evaluation PDE.
    pub fn to_spec(&self) -> PolicySpec {
        PolicySpec {
            pi: self.pi_star.clone(),
            ctilde: self.ctilde_star.clone(),
        }
    }
}

/// Pointwise optimal controls:
/// `pi* = (1/gamma)[mu/Sigma + rho z / sigma]`,
/// `ctilde* = delta^psi e^(-(psi/theta) y)`.
pub fn extract_policy(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
) -> Result<PolicySurface> {
    let grid = surf.grid.clone();
    let nx = grid.nx();
    let nt = grid.t_steps;
    let mut pi = Array2::<f64>::zeros((nt + 1, nx));
    let mut ctilde = Array2::<f64>::zeros((nt + 1, nx));
    let dpsi = ez.delta.powf(ez.psi);
    for (j, &x) in grid.x.iter().enumerate() {
        let sigma = m.sigma(x);
        if sigma == 0.0 {
            return Err(EzError::InvalidArgument(format!(
                "sigma vanishes at grid node x = {x}"
            )));
        }
        let myopic = m.mu(x) / (sigma * sigma);
        let rho = m.rho(x);
        for i in 0..=nt {
            pi[[i, j]] = (myopic + rho * surf.z[[i, j]] / sigma) / ez.gamma;
            ctilde[[i, j]] = dpsi * (-ez.psi / ez.theta * surf.y[[i, j]]).exp();
        }
    }
    Ok(PolicySurface {
        grid,
        pi_star: pi,
        ctilde_star: ctilde,
    })
}

/// Pointwise optimal controls at a single point, interpolating the surface.
pub fn policy_at(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    t: f64,
    x: f64,
) -> (f64, f64) {
    let sigma = m.sigma(x);
    let z = surf.interp_z(t, x);
    let pi = (m.mu(x) / (sigma * sigma) + m.rho(x) * z / sigma) / ez.gamma;
    let ctilde = ez.delta.powf(ez.psi) * (-ez.psi / ez.theta * surf.interp_y(t, x)).exp();
    (pi, ctilde)
}

/// One simulated trajectory of the state and the wealth it finances, with
/// the Brownian increments that drove it. `x` and `w` hold `n + 1` points,
/// the increment arrays hold `n`.
pub struct WealthStatePath<'a> {
    pub dt: f64,
    pub x: &'a [f64],
    pub w: &'a [f64],
    pub dw: &'a [f64],
    pub dw_perp: &'a [f64],
}

impl<'a> WealthStatePath<'a> {
    fn validate(&self) -> Result<()> {
        let n = self.dw.len();
        if n == 0 || self.dw_perp.len() != n || self.x.len() != n + 1 || self.w.len() != n + 1 {
            return Err(EzError::InvalidArgument(
                "path arrays must have consistent lengths (n increments, n+1 states)".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(EzError::InvalidArgument("dt must be > 0".into()));
        }
        if self.w.iter().any(|&w| !(w > 0.0)) {
            return Err(EzError::SimulationFailure(
                "nonpositive wealth along the path".into(),
            ));
        }
        Ok(())
    }
}

/// State-price density along a path, with its log values.
pub struct DeflatorPath {
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    pub log_d: Vec<f64>,
    /// Consumption-wealth ratio read off the surface at each grid time.
    pub ctilde: Vec<f64>,
}

/// The deflator along a wealth path:
/// `D(t) = exp{(theta-1) int_0^t ctilde*_s ds - delta theta t}
///         * W_t^(-gamma) e^(Y_t) / (w_0^(-gamma) e^(Y_0))`,
/// with `Y` bilinearly interpolated and the integral by the trapezoid rule.
pub fn deflator_from_value(
    _m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    path: &WealthStatePath,
) -> Result<DeflatorPath> {
    path.validate()?;
    let n = path.dw.len();
    let dt = path.dt;
    let dpsi = ez.delta.powf(ez.psi);

    let mut times = Vec::with_capacity(n + 1);
    let mut log_d = Vec::with_capacity(n + 1);
    let mut d = Vec::with_capacity(n + 1);
    let mut ctilde = Vec::with_capacity(n + 1);

    let y0 = surf.interp_y(0.0, path.x[0]);
    let log_w0 = path.w[0].ln();
    let mut integral = 0.0;
    let mut prev_ct = dpsi * (-ez.psi / ez.theta * y0).exp();
    for k in 0..=n {
        let t = k as f64 * dt;
        let yk = if k == 0 {
            y0
        } else {
            surf.interp_y(t, path.x[k])
        };
        let ct = dpsi * (-ez.psi / ez.theta * yk).exp();
        if k > 0 {
            integral += 0.5 * dt * (prev_ct + ct);
        }
        prev_ct = ct;
        let lg = (ez.theta - 1.0) * integral - ez.delta * ez.theta * t
            - ez.gamma * (path.w[k].ln() - log_w0)
            + (yk - y0);
        times.push(t);
        log_d.push(lg);
        d.push(lg.exp());
        ctilde.push(ct);
    }
    // k = 0 terms all vanish identically.
    debug_assert_eq!(d[0], 1.0);
    Ok(DeflatorPath {
        times,
        d,
        log_d,
        ctilde,
    })
}

/// Compares the pathwise deflator against the Euler log-increments of its
/// SDE `dD = -r D dt + D(-gamma pi* sigma dW^rho + z dW)` and returns the
/// max absolute per-step mismatch (which shrinks at order dt).
pub fn deflator_sde_consistency(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    path: &WealthStatePath,
) -> Result<f64> {
    path.validate()?;
    let defl = deflator_from_value(m, ez, surf, path)?;
    let n = path.dw.len();
    let dt = path.dt;
    let mut worst = 0.0f64;
    for k in 0..n {
        let t = k as f64 * dt;
        let x = path.x[k];
        let rho = m.rho(x);
        let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
        let z = surf.interp_z(t, x);
        let (pi, _) = policy_at(m, ez, surf, t, x);
        let gps = ez.gamma * pi * m.sigma(x);
        // Ito correction of the two-noise stochastic exponential.
        let drift = -m.r(x) - 0.5 * z * z - 0.5 * gps * gps + gps * rho * z;
        let noise = (z - gps * rho) * path.dw[k] - gps * rho_perp * path.dw_perp[k];
        let euler = drift * dt + noise;
        worst = worst.max((defl.log_d[k + 1] - defl.log_d[k] - euler).abs());
    }
    Ok(worst)
}
