//! Finite-difference solver for the backward semilinear PDE of the value
//! process, the a priori bound surfaces, policy-evaluation PDEs for
//! suboptimal Markovian policies, and the Lyapunov operator.
//!
//! Scheme: backward Euler on the linear drift/diffusion part (tridiagonal
//! solve per time step), with the nonlinear generator terms lagged and
//! refreshed by a fixed number of Picard sweeps. The spatial stencil is the
//! standard three-point one on a possibly nonuniform grid; at both edges the
//! second derivative is set to zero and the drift term uses a one-sided
//! difference.

use ndarray::Array2;

use crate::error::{EzError, Result};
use crate::market::{
    check_heston_conditions, check_kim_omberg_conditions, derived_coefficients, EzPreferences,
    GridSpacing, MarketModel, ModelKind,
};

/// Space-time grid: strictly increasing x-nodes inside the model domain and
/// a uniform time step.
#[derive(Clone, Debug)]
pub struct Grid {
    pub x: Vec<f64>,
    pub t_steps: usize,
    pub horizon: f64,
}

impl Grid {
    pub fn new(x: Vec<f64>, t_steps: usize, horizon: f64) -> Result<Self> {
        if x.len() < 3 {
            return Err(EzError::InvalidGrid("need at least 3 x-nodes".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EzError::InvalidGrid(
                "x-nodes must be strictly increasing".into(),
            ));
        }
        if t_steps == 0 || !(horizon > 0.0) {
            return Err(EzError::InvalidGrid(
                "need t_steps >= 1 and horizon > 0".into(),
            ));
        }
        Ok(Self {
            x,
            t_steps,
            horizon,
        })
    }

    /// Default grid for a model: its default spatial truncation and spacing,
    /// `nx` nodes, and `steps_per_year * horizon` time steps.
    pub fn for_model(m: &MarketModel, nx: usize, horizon: f64, steps_per_year: f64) -> Result<Self> {
        let (lo, hi) = m.default_grid_bounds();
        let x = match m.default_grid_spacing() {
            GridSpacing::Geometric => geometric_nodes(lo, hi, nx),
            GridSpacing::Uniform => uniform_nodes(lo, hi, nx),
        };
        let t_steps = (steps_per_year * horizon).ceil().max(1.0) as usize;
        Self::new(x, t_steps, horizon)
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.t_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.t_steps as f64
    }

    fn check_inside(&self, m: &MarketModel) -> Result<()> {
        let (lo, hi) = m.domain();
        let first = *self.x.first().unwrap();
        let last = *self.x.last().unwrap();
        if first <= lo || last >= hi {
            return Err(EzError::InvalidGrid(format!(
                "grid [{first}, {last}] not strictly inside the domain ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

pub fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
        .collect()
}

pub fn geometric_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|j| lo * ratio.powi(j as i32)).collect()
}

/// Grid values of the value-process solution `y(t, x)` and its
/// martingale-component field `z(t, x) = a(x) dy/dx`.
#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub grid: Grid,
    /// Shape `(t_steps + 1, nx)`.
    pub y: Array2<f64>,
    pub z: Array2<f64>,
    /// Numerical supremum of `h` over the grid nodes.
    pub h_max: f64,
}

impl ValueSurface {
    /// Constant upper bound `(h_max - delta*theta)(T - t)`.
    pub fn upper_bound(&self, ez: &EzPreferences, t: f64) -> f64 {
        (self.h_max - ez.delta * ez.theta) * (self.grid.horizon - t)
    }

    /// Bilinear interpolation of `y`, clamped to the grid.
    pub fn interp_y(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.y, t, x)
    }

    /// Bilinear interpolation of `z`, clamped to the grid.
    pub fn interp_z(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.z, t, x)
    }
}

pub(crate) fn bilinear(grid: &Grid, field: &Array2<f64>, t: f64, x: f64) -> f64 {
    let nt = grid.t_steps;
    let tt = (t / grid.dt()).clamp(0.0, nt as f64);
    let i = (tt.floor() as usize).min(nt - 1);
    let ft = tt - i as f64;

    let xs = &grid.x;
    let nx = xs.len();
    let (j, fx) = if x <= xs[0] {
        (0, 0.0)
    } else if x >= xs[nx - 1] {
        (nx - 2, 1.0)
    } else {
        let j = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(nx - 2),
            Err(k) => k - 1,
        };
        (j, (x - xs[j]) / (xs[j + 1] - xs[j]))
    };

    let f00 = field[[i, j]];
    let f01 = field[[i, j + 1]];
    let f10 = field[[i + 1, j]];
    let f11 = field[[i + 1, j + 1]];
    (1.0 - ft) * ((1.0 - fx) * f00 + fx * f01) + ft * ((1.0 - fx) * f10 + fx * f11)
}

/// A Markovian policy on the solver grid: portfolio fraction and
/// consumption-wealth ratio, shape `(t_steps + 1, nx)`.
#[derive(Clone, Debug)]
pub struct PolicySpec {
    pub pi: Array2<f64>,
    pub ctilde: Array2<f64>,
}

impl PolicySpec {
    pub fn constant(grid: &Grid, pi: f64, ctilde: f64) -> Result<Self> {
        if ctilde < 0.0 {
            return Err(EzError::InvalidArgument(format!(
                "ctilde must be >= 0, got {ctilde}"
            )));
        }
        let shape = (grid.t_steps + 1, grid.nx());
        Ok(Self {
            pi: Array2::from_elem(shape, pi),
            ctilde: Array2::from_elem(shape, ctilde),
        })
    }
}

/// Generator of the value equation at a state `x`:
/// `H = M z^2 / 2 + ((1-gamma)/gamma) lambda rho z
///    + theta (delta^psi / psi) e^(-(psi/theta) y) + h - delta theta`.
pub fn generator_h(m: &MarketModel, ez: &EzPreferences, x: f64, y: f64, z: f64) -> Result<f64> {
    let d = derived_coefficients(m, ez, x)?;
    Ok(generator_h_precomputed(ez, d.m, d.lambda * m.rho(x), d.h, y, z))
}

#[inline]
fn generator_h_precomputed(
    ez: &EzPreferences,
    m_factor: f64,
    lambda_rho: f64,
    h: f64,
    y: f64,
    z: f64,
) -> f64 {
    let consumption = ez.theta * ez.delta.powf(ez.psi) / ez.psi * (-ez.psi / ez.theta * y).exp();
    0.5 * m_factor * z * z + (1.0 - ez.gamma) / ez.gamma * lambda_rho * z + consumption + h
        - ez.delta * ez.theta
}

/// Generator with the portfolio and consumption brackets evaluated at a
/// given policy instead of at their optimizers:
/// `(1-gamma) r - delta theta + z^2/2
///  + [-(1-gamma) ctilde + delta theta e^(-y/theta) ctilde^(1-1/psi)]
///  + [-(gamma(1-gamma)/2) pi^2 Sigma + (1-gamma) pi (mu + sigma rho z)]`.
pub fn generator_h_policy(
    m: &MarketModel,
    ez: &EzPreferences,
    x: f64,
    y: f64,
    z: f64,
    pi: f64,
    ctilde: f64,
) -> Result<f64> {
    if !m.contains(x) {
        let (lo, hi) = m.domain();
        return Err(EzError::OutsideDomain { x, lo, hi });
    }
    let gam = ez.gamma;
    let r = m.r(x);
    let mu = m.mu(x);
    let sigma = m.sigma(x);
    let sigma_sq = sigma * sigma;
    let rho = m.rho(x);

    // The ctilde bracket has limit 0 as ctilde -> 0+.
    let bc = if ctilde > 0.0 {
        -(1.0 - gam) * ctilde
            + ez.delta * ez.theta * (-y / ez.theta).exp() * ctilde.powf(1.0 - 1.0 / ez.psi)
    } else {
        0.0
    };
    let bp = -gam * (1.0 - gam) / 2.0 * pi * pi * sigma_sq
        + (1.0 - gam) * pi * (mu + sigma * rho * z);
    Ok((1.0 - gam) * r - ez.delta * ez.theta + 0.5 * z * z + bc + bp)
}

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Picard sweeps on the nonlinear terms per time step.
    pub sweeps: usize,
    /// Allowed excess of `y` over the constant a priori upper bound.
    pub bound_tolerance: f64,
    /// When false, the bound check only records the violation.
    pub enforce_upper_bound: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            sweeps: 2,
            bound_tolerance: 1e-3,
            enforce_upper_bound: true,
        }
    }
}

/// Three-point first/second derivative stencils on a nonuniform grid.
struct Stencils {
    /// (w_minus, w_center, w_plus) for d/dx at interior nodes.
    d1: Vec<[f64; 3]>,
    /// Same for d^2/dx^2.
    d2: Vec<[f64; 3]>,
}

fn build_stencils(x: &[f64]) -> Stencils {
    let n = x.len();
    let mut d1 = vec![[0.0; 3]; n];
    let mut d2 = vec![[0.0; 3]; n];
    for j in 1..n - 1 {
        let hm = x[j] - x[j - 1];
        let hp = x[j + 1] - x[j];
        d1[j] = [
            -hp / (hm * (hm + hp)),
            (hp - hm) / (hm * hp),
            hm / (hp * (hm + hp)),
        ];
        d2[j] = [
            2.0 / (hm * (hm + hp)),
            -2.0 / (hm * hp),
            2.0 / (hp * (hm + hp)),
        ];
    }
    Stencils { d1, d2 }
}

fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for j in 1..n {
        let m = diag[j] - lower[j] * scratch[j - 1];
        scratch[j] = upper[j] / m;
        rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / m;
    }
    for j in (0..n - 1).rev() {
        rhs[j] -= scratch[j] * rhs[j + 1];
    }
}

/// Spatial derivative field `dy/dx` (central interior, one-sided edges).
fn gradient(x: &[f64], y: &[f64], stencils: &Stencils, out: &mut [f64]) {
    let n = x.len();
    out[0] = (y[1] - y[0]) / (x[1] - x[0]);
    out[n - 1] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    for j in 1..n - 1 {
        let w = stencils.d1[j];
        out[j] = w[0] * y[j - 1] + w[1] * y[j] + w[2] * y[j + 1];
    }
}

/// Backward sweep for `dy/dt + drift(x) dy/dx + a(x)^2/2 d2y/dx2
/// + source(t, j, x, y, a(x) dy/dx) = 0`, `y(T, .) = 0`.
fn solve_backward<S>(
    grid: &Grid,
    drift: &dyn Fn(f64) -> f64,
    diffusion: &dyn Fn(f64) -> f64,
    source: S,
    sweeps: usize,
) -> Result<(Array2<f64>, Array2<f64>)>
where
    S: Fn(f64, usize, f64, f64, f64) -> f64,
{
    let nx = grid.nx();
    let nt = grid.t_steps;
    let dt = grid.dt();
    let x = &grid.x;
    let stencils = build_stencils(x);

    let a_vals: Vec<f64> = x.iter().map(|&v| diffusion(v)).collect();
    let b_vals: Vec<f64> = x.iter().map(|&v| drift(v)).collect();

    // Tridiagonal rows of I - dt * L, fixed over time steps.
    let mut lower = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    for j in 1..nx - 1 {
        let w1 = stencils.d1[j];
        let w2 = stencils.d2[j];
        let half_a2 = 0.5 * a_vals[j] * a_vals[j];
        lower[j] = -dt * (b_vals[j] * w1[0] + half_a2 * w2[0]);
        diag[j] = 1.0 - dt * (b_vals[j] * w1[1] + half_a2 * w2[1]);
        upper[j] = -dt * (b_vals[j] * w1[2] + half_a2 * w2[2]);
    }
    // Edges: d2y/dx2 = 0, one-sided drift.
    let h0 = x[1] - x[0];
    diag[0] = 1.0 + dt * b_vals[0] / h0;
    upper[0] = -dt * b_vals[0] / h0;
    let hn = x[nx - 1] - x[nx - 2];
    lower[nx - 1] = dt * b_vals[nx - 1] / hn;
    diag[nx - 1] = 1.0 - dt * b_vals[nx - 1] / hn;

    let mut y = Array2::<f64>::zeros((nt + 1, nx));
    let mut z = Array2::<f64>::zeros((nt + 1, nx));

    let mut y_prev = vec![0.0; nx]; // slice at t_{n}
    let mut y_iter = vec![0.0; nx]; // current Picard iterate for t_{n-1}
    let mut grad = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut scratch = vec![0.0; nx];

    for n in (1..=nt).rev() {
        let t_new = grid.time(n - 1);
        y_iter.copy_from_slice(&y_prev);
        let mut residual = f64::INFINITY;
        for _ in 0..sweeps.max(1) {
            gradient(x, &y_iter, &stencils, &mut grad);
            for j in 0..nx {
                let zj = a_vals[j] * grad[j];
                rhs[j] = y_prev[j] + dt * source(t_new, j, x[j], y_iter[j], zj);
            }
            thomas_solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
            residual = rhs
                .iter()
                .zip(&y_iter)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            y_iter.copy_from_slice(&rhs);
            if !residual.is_finite() {
                break;
            }
        }
        if !residual.is_finite() || y_iter.iter().any(|v| !v.is_finite()) {
            return Err(EzError::SolverFailure {
                step: n - 1,
                t: t_new,
                message: format!("fixed-point sweep diverged (residual {residual})"),
            });
        }
        gradient(x, &y_iter, &stencils, &mut grad);
        for j in 0..nx {
            y[[n - 1, j]] = y_iter[j];
            z[[n - 1, j]] = a_vals[j] * grad[j];
        }
        y_prev.copy_from_slice(&y_iter);
    }
    // Terminal slice: y = 0, z = 0 already.
    Ok((y, z))
}

fn warn_if_conditions_fail(m: &MarketModel, ez: &EzPreferences) {
    if ez.psi <= 1.0 {
        // Checkers are stated for psi > 1 only.
        return;
    }
    let report = match m.kind() {
        ModelKind::Heston(p) => Some(check_heston_conditions(p, ez)),
        ModelKind::KimOmberg(p) => Some(check_kim_omberg_conditions(p, ez)),
        ModelKind::Constant(_) => None,
    };
    if let Some(rep) = report {
        if !rep.pass {
            eprintln!("warning: parameter conditions fail; solving anyway");
        }
    }
}

/// Solves the value PDE and checks the constant a priori upper bound.
pub fn solve_value_pde(
    m: &MarketModel,
    ez: &EzPreferences,
    grid: &Grid,
    config: &SolveConfig,
) -> Result<ValueSurface> {
    grid.check_inside(m)?;
    warn_if_conditions_fail(m, ez);

    let nx = grid.nx();
    let mut m_factor = vec![0.0; nx];
    let mut lambda_rho = vec![0.0; nx];
    let mut h = vec![0.0; nx];
    for (j, &xj) in grid.x.iter().enumerate() {
        let d = derived_coefficients(m, ez, xj)?;
        m_factor[j] = d.m;
        lambda_rho[j] = d.lambda * m.rho(xj);
        h[j] = d.h;
    }
    let h_max = h.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));

    let (y, z) = solve_backward(
        grid,
        &|x| m.b(x),
        &|x| m.a(x),
        |_t, j, _x, yv, zv| generator_h_precomputed(ez, m_factor[j], lambda_rho[j], h[j], yv, zv),
        config.sweeps,
    )?;

    let surf = ValueSurface {
        grid: grid.clone(),
        y,
        z,
        h_max,
    };
    let violation = upper_bound_violation(&surf, ez);
    if config.enforce_upper_bound && violation > config.bound_tolerance {
        return Err(EzError::SolverFailure {
            step: 0,
            t: 0.0,
            message: format!("a priori upper bound violated by {violation:.3e}"),
        });
    }
    Ok(surf)
}

/// Max excess of `y` over `(h_max - delta*theta)(T - t)` on the grid.
pub fn upper_bound_violation(surf: &ValueSurface, ez: &EzPreferences) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..=surf.grid.t_steps {
        let bound = surf.upper_bound(ez, surf.grid.time(i));
        for j in 0..surf.grid.nx() {
            worst = worst.max(surf.y[[i, j]] - bound);
        }
    }
    worst
}

/// The Feynman-Kac lower-bound surface: solves the linear PDE with the
/// measure-adjusted drift `b + ((1-gamma)/gamma) a rho lambda` and running
/// coefficient `h`, then shifts by the horizon-dependent constants.
pub fn apriori_lower_bound(
    m: &MarketModel,
    ez: &EzPreferences,
    grid: &Grid,
) -> Result<Array2<f64>> {
    grid.check_inside(m)?;
    let nx = grid.nx();
    let mut h = vec![0.0; nx];
    for (j, &xj) in grid.x.iter().enumerate() {
        h[j] = derived_coefficients(m, ez, xj)?.h;
    }
    let h_max = h.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));

    let adj_drift = |x: f64| {
        m.b(x) + (1.0 - ez.gamma) / ez.gamma * m.a(x) * m.rho(x) * m.lambda(x)
    };
    let (g, _) = solve_backward(grid, &adj_drift, &|x| m.a(x), |_t, j, _x, _y, _z| h[j], 1)?;

    let t_end = grid.horizon;
    let dpsi = ez.delta.powf(ez.psi);
    let consumption_floor =
        ez.theta * dpsi / ez.psi * ((ez.delta * ez.psi - ez.psi / ez.theta * h_max) * t_end).exp();
    let mut lower = g;
    for i in 0..=grid.t_steps {
        let remaining = t_end - grid.time(i);
        let shift = -ez.delta * ez.theta * remaining + consumption_floor * remaining;
        for j in 0..nx {
            lower[[i, j]] += shift;
        }
    }
    Ok(lower)
}

/// Solves the policy-evaluation PDE: the same equation with the generator
/// frozen at the supplied policy instead of at the minimizers.
pub fn policy_evaluation_pde(
    m: &MarketModel,
    ez: &EzPreferences,
    grid: &Grid,
    policy: &PolicySpec,
) -> Result<ValueSurface> {
    grid.check_inside(m)?;
    if policy.pi.dim() != (grid.t_steps + 1, grid.nx())
        || policy.ctilde.dim() != (grid.t_steps + 1, grid.nx())
    {
        return Err(EzError::InvalidArgument(
            "policy surfaces must match the grid shape".into(),
        ));
    }
    if policy
        .pi
        .iter()
        .chain(policy.ctilde.iter())
        .any(|v| !v.is_finite())
    {
        return Err(EzError::InvalidArgument(
            "policy surfaces must be finite".into(),
        ));
    }
    if policy.ctilde.iter().any(|&v| v < 0.0) {
        return Err(EzError::InvalidArgument("ctilde must be >= 0".into()));
    }

    let nx = grid.nx();
    let gam = ez.gamma;
    let mut r = vec![0.0; nx];
    let mut mu = vec![0.0; nx];
    let mut sigma = vec![0.0; nx];
    let mut rho = vec![0.0; nx];
    let mut h = vec![0.0; nx];
    for (j, &xj) in grid.x.iter().enumerate() {
        r[j] = m.r(xj);
        mu[j] = m.mu(xj);
        sigma[j] = m.sigma(xj);
        rho[j] = m.rho(xj);
        h[j] = derived_coefficients(m, ez, xj)?.h;
    }
    let h_max = h.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));

    let dt = grid.dt();
    let source = |t: f64, j: usize, _x: f64, yv: f64, zv: f64| {
        let i = ((t / dt).round() as usize).min(grid.t_steps);
        let pi = policy.pi[[i, j]];
        let ctilde = policy.ctilde[[i, j]];
        let bc = if ctilde > 0.0 {
            -(1.0 - gam) * ctilde
                + ez.delta * ez.theta * (-yv / ez.theta).exp() * ctilde.powf(1.0 - 1.0 / ez.psi)
        } else {
            0.0
        };
        let bp = -gam * (1.0 - gam) / 2.0 * pi * pi * sigma[j] * sigma[j]
            + (1.0 - gam) * pi * (mu[j] + sigma[j] * rho[j] * zv);
        (1.0 - gam) * r[j] - ez.delta * ez.theta + 0.5 * zv * zv + bc + bp
    };

    let (y, z) = solve_backward(grid, &|x| m.b(x), &|x| m.a(x), source, 2)?;
    Ok(ValueSurface {
        grid: grid.clone(),
        y,
        z,
        h_max,
    })
}

/// The Lyapunov-type operator applied to a candidate with derivatives
/// `d1 = phi'`, `d2 = phi''`:
/// `F[phi] = a^2 phi''/2 + (b + ((1-gamma)/gamma) a rho lambda) phi'
///         + M (a phi')^2 / 2 + h`.
pub fn lyapunov_f(
    m: &MarketModel,
    ez: &EzPreferences,
    d1: impl Fn(f64) -> f64,
    d2: impl Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    let d = derived_coefficients(m, ez, x)?;
    let a = m.a(x);
    let drift = m.b(x) + (1.0 - ez.gamma) / ez.gamma * a * m.rho(x) * d.lambda;
    let p1 = d1(x);
    Ok(0.5 * a * a * d2(x) + drift * p1 + 0.5 * d.m * (a * p1) * (a * p1) + d.h)
}

/// A parameterized Lyapunov candidate: its label and first two derivatives.
pub struct PhiCandidate {
    pub label: String,
    pub d1: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl PhiCandidate {
    /// `phi(x) = -c ln x + cbar x` (explodes at both ends of `(0, inf)`).
    pub fn log_linear(c: f64, cbar: f64) -> Self {
        Self {
            label: format!("-{c}*ln(x) + {cbar}*x"),
            d1: Box::new(move |x| -c / x + cbar),
            d2: Box::new(move |x| c / (x * x)),
        }
    }

    /// `phi(x) = c x^2` (explodes at both infinities).
    pub fn quadratic(c: f64) -> Self {
        Self {
            label: format!("{c}*x^2"),
            d1: Box::new(move |x| 2.0 * c * x),
            d2: Box::new(move |_| 2.0 * c),
        }
    }

    /// Constant candidate; its operator value is just `h`.
    pub fn constant() -> Self {
        Self {
            label: "const".into(),
            d1: Box::new(|_| 0.0),
            d2: Box::new(|_| 0.0),
        }
    }
}

/// Result of scanning a family of Lyapunov candidates on a grid.
#[derive(Clone, Debug)]
pub struct LyapunovScan {
    pub best_index: usize,
    pub best_label: String,
    /// Grid supremum of the operator for the best candidate.
    pub best_sup: f64,
    /// Operator value at the innermost edge node for the best candidate.
    pub left_edge: f64,
    /// Operator value at the outermost edge node.
    pub right_edge: f64,
}

/// Minimizes the grid supremum of the operator over a candidate family and
/// reports the boundary trend of the winner.
pub fn lyapunov_scan(
    m: &MarketModel,
    ez: &EzPreferences,
    family: &[PhiCandidate],
    xs: &[f64],
) -> Result<LyapunovScan> {
    if family.is_empty() {
        return Err(EzError::InvalidArgument("empty candidate family".into()));
    }
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for (k, cand) in family.iter().enumerate() {
        let mut sup = f64::NEG_INFINITY;
        let mut left = 0.0;
        let mut right = 0.0;
        for (j, &x) in xs.iter().enumerate() {
            let v = lyapunov_f(m, ez, &cand.d1, &cand.d2, x)?;
            sup = sup.max(v);
            if j == 0 {
                left = v;
            }
            if j == xs.len() - 1 {
                right = v;
            }
        }
        if best.map_or(true, |(_, s, _, _)| sup < s) {
            best = Some((k, sup, left, right));
        }
    }
    let (best_index, best_sup, left_edge, right_edge) = best.unwrap();
    Ok(LyapunovScan {
        best_index,
        best_label: family[best_index].label.clone(),
        best_sup,
        left_edge,
        right_edge,
    })
}

/// Time-0 consumption-wealth ratio as a function of the horizon.
#[derive(Clone, Debug)]
pub struct HorizonSeries {
    pub horizons: Vec<f64>,
    pub ctilde0: Vec<f64>,
}

impl HorizonSeries {
    /// Interpolated series value at horizon `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.horizons.len();
        if t <= self.horizons[0] {
            return self.ctilde0[0];
        }
        if t >= self.horizons[n - 1] {
            return self.ctilde0[n - 1];
        }
        let k = self.horizons.partition_point(|&h| h <= t) - 1;
        let f = (t - self.horizons[k]) / (self.horizons[k + 1] - self.horizons[k]);
        self.ctilde0[k] * (1.0 - f) + self.ctilde0[k + 1] * f
    }

    /// Relative gap between the series at horizon `t` and its last value.
    pub fn relative_gap(&self, t: f64) -> f64 {
        let limit = *self.ctilde0.last().unwrap();
        (self.value_at(t) - limit).abs() / limit.abs()
    }
}

/// Sweeps the time-0 optimal consumption-wealth ratio at `x0` over horizons
/// `T_k` up to `t_max`.
///
/// The model coefficients are time-independent, so a single solve on
/// `[0, t_max]` carries every shorter horizon: the slice at time `t_max - T`
/// is the time-0 solution of the horizon-`T` problem.
pub fn stationary_consumption_limit(
    m: &MarketModel,
    ez: &EzPreferences,
    x0: f64,
    t_max: f64,
    n_points: usize,
    nx: usize,
    steps_per_year: f64,
) -> Result<HorizonSeries> {
    if !(t_max > 0.0) {
        return Err(EzError::InvalidArgument("t_max must be > 0".into()));
    }
    if n_points < 2 {
        return Err(EzError::InvalidArgument("need at least 2 points".into()));
    }
    let grid = Grid::for_model(m, nx, t_max, steps_per_year)?;
    // The constant upper bound is derived for theta < 0 (psi > 1); for the
    // psi < 1 sweeps the consumption term changes sign, so only record it.
    let config = SolveConfig {
        enforce_upper_bound: ez.theta < 0.0,
        ..SolveConfig::default()
    };
    let surf = solve_value_pde(m, ez, &grid, &config)?;

    let mut horizons = Vec::with_capacity(n_points);
    let mut ctilde0 = Vec::with_capacity(n_points);
    for k in 1..=n_points {
        let horizon = t_max * k as f64 / n_points as f64;
        let y0 = surf.interp_y(t_max - horizon, x0);
        horizons.push(horizon);
        ctilde0.push(ez.delta.powf(ez.psi) * (-ez.psi / ez.theta * y0).exp());
    }
    Ok(HorizonSeries { horizons, ctilde0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{h_supremum, make_constant, make_heston, make_kim_omberg, ConstantParams,
        HestonParams, KimOmbergParams};
    use approx::assert_relative_eq;

    fn ez55() -> EzPreferences {
        EzPreferences::new(5.0, 1.5, 0.08).unwrap()
    }

    fn heston() -> MarketModel {
        make_heston(HestonParams::baseline()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.1, 0.2], 10, 1.0).is_err());
        assert!(Grid::new(vec![0.1, 0.2, 0.15], 10, 1.0).is_err());
        assert!(Grid::new(vec![0.1, 0.2, 0.3], 0, 1.0).is_err());
        assert!(Grid::new(vec![0.1, 0.2, 0.3], 10, 1.0).is_ok());
    }

    #[test]
    fn generator_hand_value() {
        let m = heston();
        let ez = ez55();
        let h = generator_h(&m, &ez, 0.04, 0.0, 0.0).unwrap();
        assert_relative_eq!(h, 0.5754466, max_relative = 1e-6);
    }

    #[test]
    fn generator_decreasing_in_y() {
        let m = heston();
        let ez = ez55();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let y = -2.0 + 0.5 * k as f64;
            let h = generator_h(&m, &ez, 0.05, y, 0.3).unwrap();
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn quadratic_term_bounded_below() {
        let m = heston();
        let ez = ez55();
        let d = derived_coefficients(&m, &ez, 0.07).unwrap();
        for z in [-2.0, -0.5, 0.3, 1.7] {
            assert!(0.5 * d.m * z * z >= z * z / (2.0 * ez.gamma));
        }
    }

    #[test]
    fn terminal_slice_is_zero() {
        let m = heston();
        let grid = Grid::for_model(&m, 60, 1.0, 50.0).unwrap();
        let surf = solve_value_pde(&m, &ez55(), &grid, &SolveConfig::default()).unwrap();
        for j in 0..grid.nx() {
            assert_eq!(surf.y[[grid.t_steps, j]], 0.0);
        }
    }

    #[test]
    fn heston_upper_bound_holds() {
        let m = heston();
        let ez = ez55();
        let grid = Grid::for_model(&m, 200, 10.0, 100.0).unwrap();
        let surf = solve_value_pde(&m, &ez, &grid, &SolveConfig::default()).unwrap();
        // h_max ~ -0.2, -delta*theta = 0.96: bound 0.76 per remaining year.
        for j in 0..grid.nx() {
            assert!(surf.y[[0, j]] <= 7.6 + 1e-3);
        }
    }

    #[test]
    fn constant_h_lower_bound_pde_part() {
        // Constant coefficients: g(t, x) = h (T - t) exactly, so the lower
        // bound surface equals the closed-form shift plus h (T - t).
        let p = ConstantParams {
            r: 0.05,
            lambda: 0.4,
            sigma: 0.2,
            rho: -0.5,
            state_vol: 0.0,
        };
        let m = make_constant(p).unwrap();
        let ez = ez55();
        let grid = Grid::new(uniform_nodes(-1.0, 1.0, 5), 100, 2.0).unwrap();
        let lower = apriori_lower_bound(&m, &ez, &grid).unwrap();
        let h = derived_coefficients(&m, &ez, 0.0).unwrap().h;
        let dpsi = ez.delta.powf(ez.psi);
        let shift = ez.theta * dpsi / ez.psi
            * ((ez.delta * ez.psi - ez.psi / ez.theta * h) * 2.0).exp();
        let expected = (h - ez.delta * ez.theta + shift) * 2.0;
        assert_relative_eq!(lower[[0, 2]], expected, max_relative = 1e-10);
    }

    #[test]
    fn x_independent_solution_for_constant_model() {
        let p = ConstantParams {
            r: 0.05,
            lambda: 0.4,
            sigma: 0.2,
            rho: -0.5,
            state_vol: 0.0,
        };
        let m = make_constant(p).unwrap();
        let grid = Grid::new(uniform_nodes(-1.0, 1.0, 9), 400, 2.0).unwrap();
        let surf = solve_value_pde(&m, &ez55(), &grid, &SolveConfig::default()).unwrap();
        for i in 0..=grid.t_steps {
            for j in 0..grid.nx() {
                assert_relative_eq!(surf.y[[i, j]], surf.y[[i, 0]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lyapunov_constant_candidate_returns_h() {
        let m = heston();
        let ez = ez55();
        let x = 0.03;
        let v = lyapunov_f(&m, &ez, |_| 0.0, |_| 0.0, x).unwrap();
        assert_relative_eq!(v, derived_coefficients(&m, &ez, x).unwrap().h);
    }

    #[test]
    fn lyapunov_heston_log_linear_boundary_trend() {
        let m = heston();
        let ez = ez55();
        let cand = PhiCandidate::log_linear(0.01, 0.01);
        // Interior value vs values far toward both boundaries.
        let near_zero = lyapunov_f(&m, &ez, &cand.d1, &cand.d2, 1e-6).unwrap();
        let interior = lyapunov_f(&m, &ez, &cand.d1, &cand.d2, 0.0225).unwrap();
        let far_out = lyapunov_f(&m, &ez, &cand.d1, &cand.d2, 50.0).unwrap();
        assert!(near_zero < interior && far_out < interior);
    }

    #[test]
    fn lyapunov_kim_omberg_quadratic_bounded() {
        let m = make_kim_omberg(KimOmbergParams::baseline()).unwrap();
        let ez = ez55();
        let cand = PhiCandidate::quadratic(1e-3);
        let xs = uniform_nodes(-0.5, 0.5, 101);
        let scan = lyapunov_scan(&m, &ez, std::slice::from_ref(&cand), &xs).unwrap();
        assert!(scan.best_sup.is_finite());
    }

    #[test]
    fn lyapunov_scan_single_constant_returns_sup_h() {
        let m = heston();
        let ez = ez55();
        let xs = geometric_nodes(0.0225 / 50.0, 0.225, 100);
        let fam = vec![PhiCandidate::constant()];
        let scan = lyapunov_scan(&m, &ez, &fam, &xs).unwrap();
        assert_relative_eq!(scan.best_sup, h_supremum(&m, &ez, &xs), epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_scan_rejects_empty_family() {
        let m = heston();
        let xs = geometric_nodes(0.001, 0.2, 10);
        assert!(lyapunov_scan(&m, &ez55(), &[], &xs).is_err());
    }

    #[test]
    fn bilinear_interp_recovers_nodes() {
        let m = heston();
        let grid = Grid::for_model(&m, 50, 1.0, 50.0).unwrap();
        let surf = solve_value_pde(&m, &ez55(), &grid, &SolveConfig::default()).unwrap();
        let (i, j) = (7, 23);
        let t = grid.time(i);
        let x = grid.x[j];
        assert_relative_eq!(surf.interp_y(t, x), surf.y[[i, j]], epsilon = 1e-12);
    }
}
