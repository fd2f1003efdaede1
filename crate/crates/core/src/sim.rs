//! Seeded Monte Carlo engine for state, wealth, and deflator paths, and the
//! martingale / supermartingale verification checks.
//!
//! Paths are generated lazily: a `PathBundle` is a recipe (model, horizon,
//! step, seed), and each path is materialized on demand from its own RNG
//! stream keyed by `(seed, path index)`. Parallel and serial runs therefore
//! see identical draws, and reductions use fixed-order pairwise summation so
//! estimates are bitwise reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EzError, Result};
use crate::market::{EzPreferences, MarketModel};
use crate::solver::ValueSurface;
use crate::strategy::{deflator_from_value, PolicySurface, WealthStatePath};
use crate::utility::aggregator_f;

/// Recipe for a family of simulated state paths; paths are generated on
/// demand so the bundle itself stays O(1) in memory.
#[derive(Clone, Debug)]
pub struct PathBundle {
    pub model: MarketModel,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// One realized state trajectory with its driving Brownian increments.
#[derive(Clone, Debug)]
pub struct StatePath {
    pub x: Vec<f64>,
    pub dw: Vec<f64>,
    pub dw_perp: Vec<f64>,
}

impl PathBundle {
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Path `i` under the bundle's seed. Deterministic in `(seed, i)`.
    pub fn path(&self, i: usize) -> StatePath {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let n = self.n_steps();
        let sqrt_dt = self.dt.sqrt();
        let floor = self.model.state_floor();

        let mut x = Vec::with_capacity(n + 1);
        let mut dw = Vec::with_capacity(n);
        let mut dw_perp = Vec::with_capacity(n);
        x.push(self.x0);
        let mut cur = self.x0;
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            let gp: f64 = StandardNormal.sample(&mut rng);
            let dwk = g * sqrt_dt;
            let dwpk = gp * sqrt_dt;
            // Full truncation: coefficients see the floored state, the
            // signed state is kept.
            let eval = match floor {
                Some(f) => cur.max(f),
                None => cur,
            };
            cur += self.model.b(eval) * self.dt + self.model.a(eval) * dwk;
            x.push(cur);
            dw.push(dwk);
            dw_perp.push(dwpk);
        }
        StatePath { x, dw, dw_perp }
    }

    /// The same Brownian paths aggregated to step `2 dt` (adjacent
    /// increments summed), for refinement/bias studies.
    pub fn coarsened(&self, path: &StatePath) -> StatePath {
        let n = path.dw.len() / 2;
        let dt2 = 2.0 * self.dt;
        let floor = self.model.state_floor();
        let mut x = Vec::with_capacity(n + 1);
        let mut dw = Vec::with_capacity(n);
        let mut dw_perp = Vec::with_capacity(n);
        x.push(self.x0);
        let mut cur = self.x0;
        for k in 0..n {
            let dwk = path.dw[2 * k] + path.dw[2 * k + 1];
            let dwpk = path.dw_perp[2 * k] + path.dw_perp[2 * k + 1];
            let eval = match floor {
                Some(f) => cur.max(f),
                None => cur,
            };
            cur += self.model.b(eval) * dt2 + self.model.a(eval) * dwk;
            x.push(cur);
            dw.push(dwk);
            dw_perp.push(dwpk);
        }
        StatePath { x, dw, dw_perp }
    }
}

/// Builds a lazy bundle of Euler-Maruyama state paths (full-truncation
/// variant for the square-root state).
pub fn simulate_state(
    m: &MarketModel,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    if !m.contains(x0) {
        let (lo, hi) = m.domain();
        return Err(EzError::OutsideDomain { x: x0, lo, hi });
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(EzError::InvalidArgument("need dt > 0 and horizon > 0".into()));
    }
    if n_paths == 0 {
        return Err(EzError::InvalidArgument("need at least one path".into()));
    }
    Ok(PathBundle {
        model: *m,
        x0,
        horizon,
        dt,
        n_paths,
        seed,
    })
}

/// A Markovian feedback policy the simulator can follow.
pub trait MarkovPolicy: Sync {
    fn pi(&self, t: f64, x: f64) -> f64;
    fn ctilde(&self, t: f64, x: f64) -> f64;
}

impl MarkovPolicy for PolicySurface {
    fn pi(&self, t: f64, x: f64) -> f64 {
        self.interp_pi(t, x)
    }
    fn ctilde(&self, t: f64, x: f64) -> f64 {
        self.interp_ctilde(t, x)
    }
}

/// State-independent policy.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy {
    pub pi: f64,
    pub ctilde: f64,
}

impl MarkovPolicy for ConstantPolicy {
    fn pi(&self, _t: f64, _x: f64) -> f64 {
        self.pi
    }
    fn ctilde(&self, _t: f64, _x: f64) -> f64 {
        self.ctilde
    }
}

/// Bounded perturbation of a base policy: additive shift in the risky
/// fraction and multiplicative scaling of the consumption ratio.
pub struct PerturbedPolicy<'a> {
    pub base: &'a PolicySurface,
    pub pi_shift: f64,
    pub ctilde_scale: f64,
}

impl MarkovPolicy for PerturbedPolicy<'_> {
    fn pi(&self, t: f64, x: f64) -> f64 {
        self.base.interp_pi(t, x) + self.pi_shift
    }
    fn ctilde(&self, t: f64, x: f64) -> f64 {
        self.base.interp_ctilde(t, x) * self.ctilde_scale
    }
}

/// Wealth along one state path under a feedback policy, by the log-Euler
/// scheme `dlog W = (r + pi mu - ctilde - pi^2 Sigma / 2) dt
/// + pi sigma dW^rho` (strictly positive by construction).
pub fn simulate_wealth_path(
    m: &MarketModel,
    policy: &dyn MarkovPolicy,
    path: &StatePath,
    dt: f64,
    w0: f64,
) -> Result<Vec<f64>> {
    if !(w0 > 0.0) {
        return Err(EzError::InvalidArgument(format!("w0 must be > 0, got {w0}")));
    }
    let n = path.dw.len();
    let floor = m.state_floor();
    let mut w = Vec::with_capacity(n + 1);
    let mut log_w = w0.ln();
    w.push(w0);
    for k in 0..n {
        let t = k as f64 * dt;
        let x = match floor {
            Some(f) => path.x[k].max(f),
            None => path.x[k],
        };
        let pi = policy.pi(t, x);
        let ct = policy.ctilde(t, x);
        if !pi.is_finite() || !ct.is_finite() {
            return Err(EzError::SimulationFailure(format!(
                "non-finite policy value at t = {t}, x = {x}"
            )));
        }
        let sigma = m.sigma(x);
        let rho = m.rho(x);
        let dw_rho = rho * path.dw[k] + (1.0 - rho * rho).max(0.0).sqrt() * path.dw_perp[k];
        log_w += (m.r(x) + pi * m.mu(x) - ct - 0.5 * pi * pi * sigma * sigma) * dt
            + pi * sigma * dw_rho;
        w.push(log_w.exp());
    }
    Ok(w)
}

/// Terminal wealths across the bundle.
pub fn simulate_wealth(
    m: &MarketModel,
    policy: &dyn MarkovPolicy,
    bundle: &PathBundle,
    w0: f64,
) -> Result<Vec<f64>> {
    (0..bundle.n_paths)
        .into_par_iter()
        .map(|i| {
            let p = bundle.path(i);
            simulate_wealth_path(m, policy, &p, bundle.dt, w0).map(|w| *w.last().unwrap())
        })
        .collect()
}

/// Monte Carlo verdict for one check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimReport {
    pub label: String,
    pub estimate: f64,
    /// Sample standard deviation / sqrt(n_paths).
    pub std_error: f64,
    /// Discretization allowance (coarse-vs-fine estimate difference).
    pub bias: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub pass: bool,
}

impl std::fmt::Display for SimReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (estimate {:.6e}, se {:.2e}, bias {:.2e}, {} paths, dt {:.4e})",
            self.label,
            if self.pass { "pass" } else { "FAIL" },
            self.estimate,
            self.std_error,
            self.bias,
            self.n_paths,
            self.dt
        )
    }
}

/// Fixed-order pairwise summation; independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let sq: Vec<f64> = samples.iter().map(|&s| (s - mean) * (s - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Which side of the budget identity a run is expected to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    /// Martingale at the optimum: estimate must equal `w0` up to noise and
    /// discretization bias.
    Optimal,
    /// Supermartingale for a suboptimal policy: estimate at most `w0` up to
    /// noise.
    Perturbed,
}

/// The optimal feedback controls read off a value surface pointwise.
pub struct OptimalFromSurface<'a> {
    pub m: &'a MarketModel,
    pub ez: &'a EzPreferences,
    pub surf: &'a ValueSurface,
}

impl OptimalFromSurface<'_> {
    /// States are clamped into the solver grid (where sigma > 0), matching
    /// the clamping the interpolated policy surface applies.
    fn clamp(&self, x: f64) -> f64 {
        let xs = &self.surf.grid.x;
        x.clamp(xs[0], *xs.last().unwrap())
    }
}

impl MarkovPolicy for OptimalFromSurface<'_> {
    fn pi(&self, t: f64, x: f64) -> f64 {
        crate::strategy::policy_at(self.m, self.ez, self.surf, t, self.clamp(x)).0
    }
    fn ctilde(&self, t: f64, x: f64) -> f64 {
        crate::strategy::policy_at(self.m, self.ez, self.surf, t, self.clamp(x)).1
    }
}

fn budget_payoff(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    policy: &dyn MarkovPolicy,
    optimal: Option<&dyn MarkovPolicy>,
    path: &StatePath,
    dt: f64,
    w0: f64,
) -> Result<f64> {
    let w = simulate_wealth_path(m, policy, path, dt, w0)?;
    // The deflator is defined through the *optimal* wealth; under a
    // perturbed policy it must still ride W* on the same Brownian draws.
    let w_star_storage;
    let w_star: &[f64] = match optimal {
        Some(op) => {
            w_star_storage = simulate_wealth_path(m, op, path, dt, w0)?;
            &w_star_storage
        }
        None => &w,
    };
    let wpath = WealthStatePath {
        dt,
        x: &path.x,
        w: w_star,
        dw: &path.dw,
        dw_perp: &path.dw_perp,
    };
    let defl = deflator_from_value(m, ez, surf, &wpath)?;
    let n = path.dw.len();
    // trapezoid of D_s * c_s with c = ctilde(policy) * W.
    let floor = m.state_floor();
    let mut integral = 0.0;
    let mut prev = {
        let x0 = match floor {
            Some(f) => path.x[0].max(f),
            None => path.x[0],
        };
        defl.d[0] * policy.ctilde(0.0, x0) * w[0]
    };
    for k in 1..=n {
        let t = k as f64 * dt;
        let x = match floor {
            Some(f) => path.x[k].max(f),
            None => path.x[k],
        };
        let cur = defl.d[k] * policy.ctilde(t, x) * w[k];
        integral += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    Ok(w[n] * defl.d[n] + integral)
}

/// Estimates `E[W_T D*_T + int_0^T D*_s c_s ds]` under `policy` and tests
/// it against the initial wealth.
pub fn martingale_budget_check(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    policy: &dyn MarkovPolicy,
    bundle: &PathBundle,
    w0: f64,
    mode: BudgetMode,
    label: &str,
) -> Result<SimReport> {
    let optimal_policy = OptimalFromSurface { m, ez, surf };
    let optimal: Option<&dyn MarkovPolicy> = match mode {
        BudgetMode::Optimal => None,
        BudgetMode::Perturbed => Some(&optimal_policy),
    };
    let payoffs: Vec<f64> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|i| {
            let p = bundle.path(i);
            budget_payoff(m, ez, surf, policy, optimal, &p, bundle.dt, w0)
        })
        .collect::<Result<_>>()?;
    let (estimate, se) = mean_and_se(&payoffs);

    let bias = if mode == BudgetMode::Optimal {
        // Same Brownian paths at step 2 dt; the estimate difference proxies
        // the O(dt) scheme bias.
        let coarse: Vec<f64> = (0..bundle.n_paths)
            .into_par_iter()
            .map(|i| {
                let p = bundle.coarsened(&bundle.path(i));
                budget_payoff(m, ez, surf, policy, optimal, &p, 2.0 * bundle.dt, w0)
            })
            .collect::<Result<_>>()?;
        (mean_and_se(&coarse).0 - estimate).abs()
    } else {
        0.0
    };

    let pass = match mode {
        BudgetMode::Optimal => (estimate - w0).abs() <= 3.0 * se + bias,
        BudgetMode::Perturbed => estimate <= w0 + 3.0 * se,
    };
    Ok(SimReport {
        label: label.to_string(),
        estimate,
        std_error: se,
        bias,
        n_paths: bundle.n_paths,
        dt: bundle.dt,
        pass,
    })
}

/// Expected drift direction in the supermartingale check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftMode {
    /// Martingale at the optimum: total drift centered at zero.
    Optimal,
    /// Strictly suboptimal policy: total drift negative beyond noise.
    Perturbed,
}

/// Samples the total drift of
/// `R = W^(1-gamma) e^Y / (1-gamma) + int f(c_s, V_s) ds` per path
/// (zero in expectation at the optimum, nonpositive otherwise) and reports
/// the mean of `R_T - R_0`.
pub fn supermartingale_value_check(
    m: &MarketModel,
    ez: &EzPreferences,
    surf: &ValueSurface,
    policy: &dyn MarkovPolicy,
    bundle: &PathBundle,
    w0: f64,
    mode: DriftMode,
    label: &str,
) -> Result<SimReport> {
    let gam = ez.gamma;
    let floor = m.state_floor();
    let drifts: Vec<f64> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let p = bundle.path(i);
            let w = simulate_wealth_path(m, policy, &p, bundle.dt, w0)?;
            let n = p.dw.len();
            let mut integral = 0.0;
            let mut r0 = 0.0;
            let mut r_t = 0.0;
            for k in 0..=n {
                let t = k as f64 * bundle.dt;
                let x = match floor {
                    Some(f) => p.x[k].max(f),
                    None => p.x[k],
                };
                let y = surf.interp_y(t, x);
                let v = w[k].powf(1.0 - gam) * y.exp() / (1.0 - gam);
                let c = policy.ctilde(t, x) * w[k];
                let r = v + integral;
                if k == 0 {
                    r0 = r;
                }
                if k == n {
                    r_t = r;
                } else {
                    integral += aggregator_f(ez, c, v).map_err(|e| {
                        EzError::SimulationFailure(format!("aggregator failed: {e}"))
                    })? * bundle.dt;
                }
            }
            Ok(r_t - r0)
        })
        .collect::<Result<_>>()?;
    let (estimate, se) = mean_and_se(&drifts);
    let pass = match mode {
        DriftMode::Optimal => estimate.abs() <= 3.0 * se,
        DriftMode::Perturbed => estimate < -3.0 * se,
    };
    Ok(SimReport {
        label: label.to_string(),
        estimate,
        std_error: se,
        bias: 0.0,
        n_paths: bundle.n_paths,
        dt: bundle.dt,
        pass,
    })
}
