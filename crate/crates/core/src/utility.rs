//! Epstein-Zin aggregator, the transformed backward recursions, and an exact
//! ODE evaluator of the utility of deterministic consumption streams.
//!
//! For a deterministic stream the martingale component vanishes and the
//! transformed recursion collapses to a backward ODE. In the substituted
//! variable `u = Y^(1/theta)` that ODE is linear, which is what makes the
//! closed-form checks below exact.

use crate::error::{EzError, Result};
use crate::market::EzPreferences;

/// A nonnegative consumption plan on `[0, horizon]`: piecewise-constant rate
/// plus a strictly positive terminal lump sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsumptionStream {
    /// Breakpoints `(t_start, rate)`, sorted, first at `t = 0`.
    pieces: Vec<(f64, f64)>,
    /// Terminal lump sum, > 0.
    pub terminal: f64,
    /// Horizon in years.
    pub horizon: f64,
}

impl ConsumptionStream {
    pub fn constant(rate: f64, terminal: f64, horizon: f64) -> Result<Self> {
        Self::piecewise(vec![(0.0, rate)], terminal, horizon)
    }

    pub fn piecewise(pieces: Vec<(f64, f64)>, terminal: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(EzError::InvalidStream(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        if !(terminal > 0.0) {
            return Err(EzError::InvalidStream(
                "terminal consumption must be strictly positive".into(),
            ));
        }
        if pieces.is_empty() || pieces[0].0 != 0.0 {
            return Err(EzError::InvalidStream(
                "breakpoints must start at t = 0".into(),
            ));
        }
        for w in pieces.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(EzError::InvalidStream(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        if pieces.iter().any(|&(t, c)| t >= horizon && t > 0.0 || c < 0.0) {
            return Err(EzError::InvalidStream(
                "rates must be >= 0 and breakpoints inside [0, horizon)".into(),
            ));
        }
        Ok(Self {
            pieces,
            terminal,
            horizon,
        })
    }

    /// Consumption rate at time `t`.
    pub fn rate(&self, t: f64) -> f64 {
        let mut r = self.pieces[0].1;
        for &(start, c) in &self.pieces {
            if t >= start {
                r = c;
            } else {
                break;
            }
        }
        r
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.pieces
    }
}

/// Transformed utility values `Y(t) > 0` on a time grid, together with the
/// utility `V(t) = e^(delta theta t) Y(t) / (1 - gamma)`.
#[derive(Clone, Debug)]
pub struct UtilityPath {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

impl UtilityPath {
    pub fn v0(&self) -> f64 {
        self.v[0]
    }

    pub fn y0(&self) -> f64 {
        self.y[0]
    }
}

/// The Epstein-Zin aggregator
/// `f(c, v) = delta ((1-gamma)v / (1 - 1/psi)) [ (c / ((1-gamma)v)^(1/(1-gamma)))^(1-1/psi) - 1 ]`.
pub fn aggregator_f(ez: &EzPreferences, c: f64, v: f64) -> Result<f64> {
    if !(v < 0.0) {
        return Err(EzError::InvalidArgument(format!(
            "utility argument must be < 0, got {v}"
        )));
    }
    if c < 0.0 {
        return Err(EzError::InvalidArgument(format!(
            "consumption must be >= 0, got {c}"
        )));
    }
    let one_m_gamma = 1.0 - ez.gamma;
    let q = 1.0 - 1.0 / ez.psi;
    let gv = one_m_gamma * v; // > 0
    let ratio = c / gv.powf(1.0 / one_m_gamma);
    Ok(ez.delta * gv / q * (ratio.powf(q) - 1.0))
}

/// Closed-form rewrite of the aggregator,
/// `delta c^(1-1/psi) ((1-gamma)v)^(1-1/theta) / (1-1/psi) - delta theta v`.
/// Agrees with [`aggregator_f`] on its whole domain.
pub fn aggregator_f_power_form(ez: &EzPreferences, c: f64, v: f64) -> Result<f64> {
    if !(v < 0.0) {
        return Err(EzError::InvalidArgument(format!(
            "utility argument must be < 0, got {v}"
        )));
    }
    if c < 0.0 {
        return Err(EzError::InvalidArgument(format!(
            "consumption must be >= 0, got {c}"
        )));
    }
    let q = 1.0 - 1.0 / ez.psi;
    let gv = (1.0 - ez.gamma) * v;
    Ok(ez.delta * c.powf(q) * gv.powf(1.0 - 1.0 / ez.theta) / q - ez.delta * ez.theta * v)
}

/// Generator of the transformed recursion,
/// `F(t, c, y) = delta theta e^(-delta t) c^(1-1/psi) y^(1-1/theta)`.
/// Nonpositive and decreasing in `y` when `theta < 0`.
pub fn transformed_generator_f(ez: &EzPreferences, t: f64, c: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(EzError::InvalidArgument(format!(
            "y must be > 0, got {y}"
        )));
    }
    let q = 1.0 - 1.0 / ez.psi;
    Ok(ez.delta * ez.theta * (-ez.delta * t).exp() * c.powf(q) * y.powf(1.0 - 1.0 / ez.theta))
}

/// Ordinal transform `(ybar, zbar) = (y^(1/theta), (1/theta) y^(1/theta - 1) z) / (1 - 1/psi)`.
pub fn ordinal_transform(ez: &EzPreferences, y: f64, z: f64) -> Result<(f64, f64)> {
    if !(y > 0.0) {
        return Err(EzError::InvalidArgument(format!(
            "y must be > 0, got {y}"
        )));
    }
    let q = 1.0 - 1.0 / ez.psi;
    let ybar = y.powf(1.0 / ez.theta) / q;
    let zbar = y.powf(1.0 / ez.theta - 1.0) * z / (ez.theta * q);
    Ok((ybar, zbar))
}

/// Inverse of [`ordinal_transform`].
pub fn inverse_ordinal_transform(ez: &EzPreferences, ybar: f64, zbar: f64) -> Result<(f64, f64)> {
    let q = 1.0 - 1.0 / ez.psi;
    if !(q * ybar > 0.0) {
        return Err(EzError::InvalidArgument(format!(
            "(1 - 1/psi) * ybar must be > 0, got {}",
            q * ybar
        )));
    }
    let y = (q * ybar).powf(ez.theta);
    let z = ez.theta * q * y.powf(1.0 - 1.0 / ez.theta) * zbar;
    Ok((y, z))
}

/// RK4 sweep of `u' = -delta e^(-delta t) c(t)^(1-1/psi)` backward from `t1`
/// to `t0` over a constant-rate piece. The integrand depends on `t` only, so
/// the stages reduce to a Simpson rule.
fn rk4_piece_backward(ez: &EzPreferences, c_pow: f64, t0: f64, t1: f64, u1: f64, steps: usize) -> f64 {
    let g = |t: f64| ez.delta * (-ez.delta * t).exp() * c_pow;
    let dt = (t1 - t0) / steps as f64;
    let mut u = u1;
    let mut t = t1;
    for _ in 0..steps {
        // backward step: u(t - dt) = u(t) + int_{t-dt}^t g ds
        let k1 = g(t);
        let k2 = g(t - 0.5 * dt);
        let k4 = g(t - dt);
        u += dt / 6.0 * (k1 + 4.0 * k2 + k4);
        t -= dt;
    }
    u
}

fn validate_stream(stream: &ConsumptionStream) -> Result<()> {
    if !(stream.terminal > 0.0) {
        return Err(EzError::InvalidStream(
            "terminal consumption must be > 0".into(),
        ));
    }
    if stream.breakpoints().iter().any(|&(_, c)| c < 0.0) {
        return Err(EzError::InvalidStream("rates must be >= 0".into()));
    }
    Ok(())
}

/// Partition of `[0, T]` into the uniform output grid refined by the stream's
/// breakpoints. Returns (sorted times, indices of the uniform nodes).
fn refined_times(stream: &ConsumptionStream, steps: usize) -> (Vec<f64>, Vec<usize>) {
    let t_end = stream.horizon;
    let mut times: Vec<f64> = (0..=steps)
        .map(|i| t_end * i as f64 / steps as f64)
        .collect();
    for &(t, _) in stream.breakpoints() {
        if t > 0.0 && t < t_end {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * t_end);
    let uniform: Vec<usize> = (0..=steps)
        .map(|i| {
            let t = t_end * i as f64 / steps as f64;
            times
                .iter()
                .position(|&s| (s - t).abs() < 1e-9 * t_end.max(1.0))
                .expect("uniform node present in refined partition")
        })
        .collect();
    (times, uniform)
}

/// Evaluates the utility of a deterministic stream by integrating the
/// linearized backward ODE in `u = Y^(1/theta)` with RK4, piecewise over the
/// stream's constant segments.
pub fn evaluate_deterministic_utility(
    ez: &EzPreferences,
    stream: &ConsumptionStream,
    steps: usize,
) -> Result<UtilityPath> {
    validate_stream(stream)?;
    if steps < 1 {
        return Err(EzError::InvalidArgument("steps must be >= 1".into()));
    }
    let q = 1.0 - 1.0 / ez.psi;
    let t_end = stream.horizon;
    let (times, uniform) = refined_times(stream, steps);

    // u(T) = e^(-delta T) c_T^(1-1/psi)
    let mut u = vec![0.0; times.len()];
    let n = times.len() - 1;
    u[n] = (-ez.delta * t_end).exp() * stream.terminal.powf(q);
    for i in (0..n).rev() {
        let t0 = times[i];
        let t1 = times[i + 1];
        let c_pow = stream.rate(0.5 * (t0 + t1)).powf(q);
        // A couple of substeps keep the quadrature error far below 1e-12.
        u[i] = rk4_piece_backward(ez, c_pow, t0, t1, u[i + 1], 4);
    }

    let mut out_times = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    for (i, &idx) in uniform.iter().enumerate() {
        let t = t_end * i as f64 / steps as f64;
        let yt = u[idx].powf(ez.theta);
        out_times.push(t);
        y.push(yt);
        v.push((ez.delta * ez.theta * t).exp() * yt / (1.0 - ez.gamma));
    }
    Ok(UtilityPath {
        times: out_times,
        y,
        v,
    })
}

/// Truncated generator `F^n(t, c, y) = delta theta e^(-delta t)
/// (c^(1-1/psi) /\ n) (|y| /\ n)^(1-1/theta)`.
pub fn truncated_generator(ez: &EzPreferences, n: f64, t: f64, c: f64, y: f64) -> f64 {
    let q = 1.0 - 1.0 / ez.psi;
    let c_cap = c.powf(q).min(n);
    let y_cap = y.abs().min(n);
    ez.delta * ez.theta * (-ez.delta * t).exp() * c_cap * y_cap.powf(1.0 - 1.0 / ez.theta)
}

/// Evaluates the truncation-level-`n` backward ODE with RK4 in the `y`
/// variable (the `u`-substitution is unavailable once the caps bite).
pub fn evaluate_truncated(
    ez: &EzPreferences,
    stream: &ConsumptionStream,
    n: f64,
    steps: usize,
) -> Result<UtilityPath> {
    validate_stream(stream)?;
    if !(n >= 1.0) {
        return Err(EzError::InvalidArgument(format!(
            "truncation level must be >= 1, got {n}"
        )));
    }
    if steps < 1 {
        return Err(EzError::InvalidArgument("steps must be >= 1".into()));
    }
    let t_end = stream.horizon;
    let (times, uniform) = refined_times(stream, steps);

    let m = times.len() - 1;
    let mut y = vec![0.0; times.len()];
    y[m] = (-ez.delta * ez.theta * t_end).exp() * stream.terminal.powf(1.0 - ez.gamma);
    for i in (0..m).rev() {
        let t0 = times[i];
        let t1 = times[i + 1];
        let h = t1 - t0;
        let c = stream.rate(0.5 * (t0 + t1));
        let f = |t: f64, yv: f64| truncated_generator(ez, n, t, c, yv);
        // Classical RK4 with step -h for y'(t) = -F^n(t, c, y):
        // Y(t0) = Y(t1) + int_{t0}^{t1} F^n ds.
        let y1 = y[i + 1];
        let k1 = f(t1, y1);
        let k2 = f(t1 - 0.5 * h, y1 + 0.5 * h * k1);
        let k3 = f(t1 - 0.5 * h, y1 + 0.5 * h * k2);
        let k4 = f(t0, y1 + h * k3);
        y[i] = y1 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y[i].is_finite() {
            return Err(EzError::SolverFailure {
                step: i,
                t: t0,
                message: "truncated utility ODE produced a non-finite value".into(),
            });
        }
    }

    let mut out_times = Vec::with_capacity(steps + 1);
    let mut y_out = Vec::with_capacity(steps + 1);
    let mut v_out = Vec::with_capacity(steps + 1);
    for (i, &idx) in uniform.iter().enumerate() {
        let t = t_end * i as f64 / steps as f64;
        out_times.push(t);
        y_out.push(y[idx]);
        v_out.push((ez.delta * ez.theta * t).exp() * y[idx] / (1.0 - ez.gamma));
    }
    Ok(UtilityPath {
        times: out_times,
        y: y_out,
        v: v_out,
    })
}

/// Closed-form `u(0) = c^(1-1/psi)(1 - e^(-delta T)) + e^(-delta T) c_T^(1-1/psi)`
/// for a constant stream; `V0 = u(0)^theta / (1 - gamma)`.
pub fn constant_stream_v0(ez: &EzPreferences, c: f64, c_terminal: f64, horizon: f64) -> f64 {
    let q = 1.0 - 1.0 / ez.psi;
    let e = (-ez.delta * horizon).exp();
    let u0 = c.powf(q) * (1.0 - e) + e * c_terminal.powf(q);
    u0.powf(ez.theta) / (1.0 - ez.gamma)
}
