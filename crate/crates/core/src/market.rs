//! Preference and market-model data, derived coefficient fields, and the
//! parameter-admissibility checkers for the Heston and Kim-Omberg
//! specializations.
//!
//! Everything here is scalar: a single risky asset and a one-dimensional
//! state variable, so the quadratic forms collapse to `lambda^2`,
//! `lambda*rho`, and `rho^2`.

use serde::{Deserialize, Serialize};

use crate::error::{EzError, Result};

/// Epstein-Zin preference parameters with the derived composite exponent
/// `theta = (1 - gamma) / (1 - 1/psi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EzPreferences {
    /// Relative risk aversion, > 1.
    pub gamma: f64,
    /// Elasticity of intertemporal substitution.
    pub psi: f64,
    /// Time-discount rate per year, > 0.
    pub delta: f64,
    /// `(1 - gamma) / (1 - 1/psi)`; negative when `gamma, psi > 1`.
    pub theta: f64,
}

impl EzPreferences {
    /// Preferences in the focal regime `gamma > 1`, `psi > 1` (so `theta < 0`).
    pub fn new(gamma: f64, psi: f64, delta: f64) -> Result<Self> {
        if !(psi > 1.0) {
            return Err(EzError::InvalidPreferences(format!(
                "psi must be > 1, got {psi}"
            )));
        }
        Self::with_any_eis(gamma, psi, delta)
    }

    /// Like [`EzPreferences::new`] but admits any EIS `psi > 0`, `psi != 1`.
    ///
    /// The value PDE and its policy extraction are well defined for `psi < 1`
    /// as well; the horizon-convergence study needs `psi = 0.2`. The
    /// verification checkers still require `psi > 1`.
    pub fn with_any_eis(gamma: f64, psi: f64, delta: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(EzError::InvalidPreferences(format!(
                "gamma must be > 1, got {gamma}"
            )));
        }
        if !(psi > 0.0) || psi == 1.0 {
            return Err(EzError::InvalidPreferences(format!(
                "psi must be positive and != 1, got {psi}"
            )));
        }
        if !(delta > 0.0) {
            return Err(EzError::InvalidPreferences(format!(
                "delta must be > 0, got {delta}"
            )));
        }
        let theta = (1.0 - gamma) / (1.0 - 1.0 / psi);
        Ok(Self {
            gamma,
            psi,
            delta,
            theta,
        })
    }
}

/// Heston-type stochastic volatility model parameters:
/// `r(x) = r0 + r1 x`, `mu(x) = sigma lambda x`, `sigma(x) = sigma sqrt(x)`,
/// state `dX = b(ell - X) dt + a sqrt(X) dW` on `(0, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub r0: f64,
    pub r1: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub b: f64,
    pub ell: f64,
    pub a: f64,
    pub rho: f64,
}

impl HestonParams {
    /// The empirically calibrated baseline set used throughout the tests:
    /// `lambda=0.47, sigma=1, b=5, a=0.25, rho=-0.5, r=0.05`.
    pub fn baseline() -> Self {
        Self {
            r0: 0.05,
            r1: 0.0,
            lambda: 0.47,
            sigma: 1.0,
            b: 5.0,
            ell: 0.0225,
            a: 0.25,
            rho: -0.5,
        }
    }
}

/// Kim-Omberg predictable-returns model parameters:
/// `r(x) = r0 + r1 x`, `mu(x) = sigma (lambda0 + lambda1 x)`, constant
/// `sigma`, state `dX = -b X dt + a dW` on the whole real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KimOmbergParams {
    pub r0: f64,
    pub r1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub sigma: f64,
    pub b: f64,
    pub a: f64,
    pub rho: f64,
}

impl KimOmbergParams {
    /// Monthly-units baseline: `lambda1=1, sigma=0.0436, b=0.0226,
    /// a=0.0189, rho=-0.935, r=0.0014`.
    pub fn baseline() -> Self {
        Self {
            r0: 0.0014,
            r1: 0.0,
            lambda0: 0.0,
            lambda1: 1.0,
            sigma: 0.0436,
            b: 0.0226,
            a: 0.0189,
            rho: -0.935,
        }
    }
}

/// Constant-coefficient degenerate market used as an ODE oracle: the state
/// is inert (`b = 0`, tiny or zero `a`) and every market coefficient is flat,
/// so the value surface is x-independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    pub r: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
    /// State diffusion; may be zero. Defaults to 0.
    #[serde(default)]
    pub state_vol: f64,
}

/// Market model kind together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Heston(HestonParams),
    KimOmberg(KimOmbergParams),
    Constant(ConstantParams),
}

/// Spacing rule for the default spatial grid of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridSpacing {
    Uniform,
    Geometric,
}

/// A 1-D Markovian market model: coefficient functions `r, mu, sigma, b, a,
/// rho` on an open state domain. Immutable after construction.
#[derive(Clone, Copy, Debug)]
pub struct MarketModel {
    kind: ModelKind,
    x_lo: f64,
    x_hi: f64,
}

impl MarketModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Open domain `(x_lo, x_hi)`; either end may be infinite.
    pub fn domain(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.x_lo && x < self.x_hi
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(EzError::OutsideDomain {
                x,
                lo: self.x_lo,
                hi: self.x_hi,
            })
        }
    }

    /// Interest rate.
    pub fn r(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Heston(p) => p.r0 + p.r1 * x,
            ModelKind::KimOmberg(p) => p.r0 + p.r1 * x,
            ModelKind::Constant(p) => p.r,
        }
    }

    /// Excess return of the risky asset.
    pub fn mu(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Heston(p) => p.sigma * p.lambda * x,
            ModelKind::KimOmberg(p) => p.sigma * (p.lambda0 + p.lambda1 * x),
            ModelKind::Constant(p) => p.sigma * p.lambda,
        }
    }

    /// Asset volatility.
    pub fn sigma(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Heston(p) => p.sigma * x.max(0.0).sqrt(),
            ModelKind::KimOmberg(p) => p.sigma,
            ModelKind::Constant(p) => p.sigma,
        }
    }

    /// State drift.
    pub fn b(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Heston(p) => p.b * (p.ell - x),
            ModelKind::KimOmberg(p) => -p.b * x,
            ModelKind::Constant(_) => 0.0,
        }
    }

    /// State diffusion.
    pub fn a(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Heston(p) => p.a * x.max(0.0).sqrt(),
            ModelKind::KimOmberg(p) => p.a,
            ModelKind::Constant(p) => p.state_vol,
        }
    }

    /// State-asset correlation.
    pub fn rho(&self, x: f64) -> f64 {
        let _ = x;
        match self.kind {
            ModelKind::Heston(p) => p.rho,
            ModelKind::KimOmberg(p) => p.rho,
            ModelKind::Constant(p) => p.rho,
        }
    }

    /// Market price of risk `lambda = mu / sigma`.
    pub fn lambda(&self, x: f64) -> f64 {
        self.mu(x) / self.sigma(x)
    }

    /// Floor applied to the state before coefficient evaluation during
    /// simulation (full-truncation scheme for the square-root state).
    pub fn state_floor(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Heston(_) => Some(0.0),
            _ => None,
        }
    }

    /// Default spatial truncation for the solver grid.
    ///
    /// Heston: `[ell/50, 10 ell]`; Kim-Omberg: six stationary standard
    /// deviations around zero; constant: `[-1, 1]` (the value is
    /// x-independent anyway).
    pub fn default_grid_bounds(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Heston(p) => (p.ell / 50.0, 10.0 * p.ell),
            ModelKind::KimOmberg(p) => {
                let sd = p.a / (2.0 * p.b).sqrt();
                (-6.0 * sd, 6.0 * sd)
            }
            ModelKind::Constant(_) => (-1.0, 1.0),
        }
    }

    pub fn default_grid_spacing(&self) -> GridSpacing {
        match self.kind {
            ModelKind::Heston(_) => GridSpacing::Geometric,
            _ => GridSpacing::Uniform,
        }
    }
}

/// Builds the Heston market model, enforcing positivity of the state.
pub fn make_heston(p: HestonParams) -> Result<MarketModel> {
    if !(p.a > 0.0) {
        return Err(EzError::InvalidModel(format!("a must be > 0, got {}", p.a)));
    }
    if p.b < 0.0 || p.ell < 0.0 {
        return Err(EzError::InvalidModel(format!(
            "b and ell must be >= 0, got b={}, ell={}",
            p.b, p.ell
        )));
    }
    if p.b * p.ell <= 0.5 * p.a * p.a {
        return Err(EzError::InvalidModel(format!(
            "Feller condition violated: b*ell = {} <= a^2/2 = {}",
            p.b * p.ell,
            0.5 * p.a * p.a
        )));
    }
    if !(p.sigma > 0.0) {
        return Err(EzError::InvalidModel(format!(
            "sigma must be > 0, got {}",
            p.sigma
        )));
    }
    if p.rho.abs() > 1.0 {
        return Err(EzError::InvalidModel(format!(
            "rho must be in [-1, 1], got {}",
            p.rho
        )));
    }
    Ok(MarketModel {
        kind: ModelKind::Heston(p),
        x_lo: 0.0,
        x_hi: f64::INFINITY,
    })
}

/// Builds the Kim-Omberg market model on the whole real line.
pub fn make_kim_omberg(p: KimOmbergParams) -> Result<MarketModel> {
    if !(p.a > 0.0) || !(p.b > 0.0) {
        return Err(EzError::InvalidModel(format!(
            "a and b must be > 0, got a={}, b={}",
            p.a, p.b
        )));
    }
    if !(p.sigma > 0.0) {
        return Err(EzError::InvalidModel(format!(
            "sigma must be > 0, got {}",
            p.sigma
        )));
    }
    if p.rho.abs() > 1.0 {
        return Err(EzError::InvalidModel(format!(
            "rho must be in [-1, 1], got {}",
            p.rho
        )));
    }
    Ok(MarketModel {
        kind: ModelKind::KimOmberg(p),
        x_lo: f64::NEG_INFINITY,
        x_hi: f64::INFINITY,
    })
}

/// Builds the constant-coefficient degenerate model.
pub fn make_constant(p: ConstantParams) -> Result<MarketModel> {
    if !(p.sigma > 0.0) {
        return Err(EzError::InvalidModel(format!(
            "sigma must be > 0, got {}",
            p.sigma
        )));
    }
    if p.state_vol < 0.0 {
        return Err(EzError::InvalidModel(format!(
            "state_vol must be >= 0, got {}",
            p.state_vol
        )));
    }
    if p.rho.abs() > 1.0 {
        return Err(EzError::InvalidModel(format!(
            "rho must be in [-1, 1], got {}",
            p.rho
        )));
    }
    Ok(MarketModel {
        kind: ModelKind::Constant(p),
        x_lo: f64::NEG_INFINITY,
        x_hi: f64::INFINITY,
    })
}

/// Builds the model of any [`ModelKind`].
pub fn make_model(kind: ModelKind) -> Result<MarketModel> {
    match kind {
        ModelKind::Heston(p) => make_heston(p),
        ModelKind::KimOmberg(p) => make_kim_omberg(p),
        ModelKind::Constant(p) => make_constant(p),
    }
}

/// Pointwise derived coefficient fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedCoefficients {
    /// `Sigma = sigma^2`.
    pub sigma_sq: f64,
    /// `M = 1 + ((1-gamma)/gamma) rho^2`, pinched in `[1/gamma, 1]`.
    pub m: f64,
    /// `h = (1-gamma) r + ((1-gamma)/(2 gamma)) mu^2 / Sigma`.
    pub h: f64,
    /// Market price of risk `lambda = mu / sigma`.
    pub lambda: f64,
}

/// Evaluates the derived coefficients at a state strictly inside the domain.
pub fn derived_coefficients(
    m: &MarketModel,
    ez: &EzPreferences,
    x: f64,
) -> Result<DerivedCoefficients> {
    m.check_inside(x)?;
    let sigma = m.sigma(x);
    let sigma_sq = sigma * sigma;
    let rho = m.rho(x);
    let mu = m.mu(x);
    let gam = ez.gamma;
    Ok(DerivedCoefficients {
        sigma_sq,
        m: 1.0 + (1.0 - gam) / gam * rho * rho,
        h: (1.0 - gam) * m.r(x) + (1.0 - gam) / (2.0 * gam) * mu * mu / sigma_sq,
        lambda: mu / sigma,
    })
}

/// Numerical supremum of `h` over a set of grid nodes. Finite because
/// `gamma > 1` makes `h` bounded from above.
pub fn h_supremum(m: &MarketModel, ez: &EzPreferences, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| {
            let mu = m.mu(x);
            let s2 = m.sigma(x).powi(2);
            (1.0 - ez.gamma) * m.r(x) + (1.0 - ez.gamma) / (2.0 * ez.gamma) * mu * mu / s2
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One row of a parameter-admissibility report.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub id: String,
    pub description: String,
    pub left: f64,
    pub right: f64,
    pub pass: bool,
    /// Informational rows (sufficient conditions) do not gate the overall
    /// verdict.
    pub informational: bool,
}

/// Result of a full parameter-condition suite.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCheckReport {
    pub conditions: Vec<ConditionCheck>,
    /// True iff every non-informational condition passes.
    pub pass: bool,
}

impl ParamCheckReport {
    fn from_conditions(conditions: Vec<ConditionCheck>) -> Self {
        let pass = conditions
            .iter()
            .filter(|c| !c.informational)
            .all(|c| c.pass);
        Self { conditions, pass }
    }

    /// Plain-text table rendering.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<5} {:<58} {:>14} {:>14} {:>6}\n",
            "id", "condition", "left", "right", "pass"
        ));
        for c in &self.conditions {
            let tag = if c.informational { " (info)" } else { "" };
            out.push_str(&format!(
                "{:<5} {:<58} {:>14.6e} {:>14.6e} {:>6}{}\n",
                c.id,
                c.description,
                c.left,
                c.right,
                if c.pass { "ok" } else { "FAIL" },
                tag
            ));
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

fn cond(id: &str, description: &str, left: f64, right: f64, pass: bool) -> ConditionCheck {
    ConditionCheck {
        id: id.to_string(),
        description: description.to_string(),
        left,
        right,
        pass,
        informational: false,
    }
}

fn info_cond(id: &str, description: &str, left: f64, right: f64, pass: bool) -> ConditionCheck {
    ConditionCheck {
        informational: true,
        ..cond(id, description, left, right, pass)
    }
}

/// Full Heston parameter-condition suite: the state-positivity inequalities,
/// the two verification restrictions, and (informational) the sufficient
/// condition that implies the second restriction when `r1 = 0`.
pub fn check_heston_conditions(p: &HestonParams, ez: &EzPreferences) -> ParamCheckReport {
    let lam2 = p.lambda * p.lambda;
    let lam_rho = p.lambda * p.rho;
    let rho2 = p.rho * p.rho;
    let psi = ez.psi;

    let mut conds = vec![
        cond("C1a", "b >= 0", p.b, 0.0, p.b >= 0.0),
        cond("C1b", "ell >= 0", p.ell, 0.0, p.ell >= 0.0),
        cond(
            "C1c",
            "r1 + lambda^2/(2 gamma) >= 0",
            p.r1 + lam2 / (2.0 * ez.gamma),
            0.0,
            p.r1 + lam2 / (2.0 * ez.gamma) >= 0.0,
        ),
        cond("C1d", "a > 0", p.a, 0.0, p.a > 0.0),
        cond(
            "C1e",
            "b*ell > a^2/2 (state stays positive)",
            p.b * p.ell,
            0.5 * p.a * p.a,
            p.b * p.ell > 0.5 * p.a * p.a,
        ),
        cond(
            "C2",
            "r1 > 0 or lambda^2 > 0",
            p.r1,
            lam2,
            p.r1 > 0.0 || lam2 > 0.0,
        ),
    ];

    let c3_left = (psi - 1.0)
        * (p.r1 + p.b * lam_rho / p.a + 0.5 * lam2 * (psi - (psi - 1.0) * rho2));
    let c3_right = p.b * p.b / (2.0 * p.a * p.a);
    conds.push(cond(
        "C3",
        "(psi-1)[r1 + b*lam*rho/a + lam^2(psi-(psi-1)rho^2)/2] < b^2/(2a^2)",
        c3_left,
        c3_right,
        c3_left < c3_right,
    ));

    let c4_left = p.b * lam_rho;
    let c4_right = -0.5 * psi * p.a * lam2;
    conds.push(info_cond(
        "C4",
        "sufficient (r1=0): b*lam*rho <= -psi*a*lam^2/2",
        c4_left,
        c4_right,
        c4_left <= c4_right,
    ));

    ParamCheckReport::from_conditions(conds)
}

/// Full Kim-Omberg parameter-condition suite.
pub fn check_kim_omberg_conditions(p: &KimOmbergParams, ez: &EzPreferences) -> ParamCheckReport {
    let lam1sq = p.lambda1 * p.lambda1;
    let lam1_rho = p.lambda1 * p.rho;
    let rho2 = p.rho * p.rho;
    let psi = ez.psi;

    let mut conds = vec![
        cond("D1a", "a > 0", p.a, 0.0, p.a > 0.0),
        cond("D1b", "b > 0", p.b, 0.0, p.b > 0.0),
        cond(
            "D1c",
            "r1 = 0 or lambda1^2 > 0",
            p.r1,
            lam1sq,
            p.r1 == 0.0 || lam1sq > 0.0,
        ),
    ];

    // Drift slope of the state under the measure the linear z-term induces.
    let d2_left = -p.b + (1.0 - ez.gamma) / ez.gamma * p.a * lam1_rho;
    conds.push(cond(
        "D2",
        "-b + ((1-gamma)/gamma) a lam1 rho < 0 or lambda1^2 > 0",
        d2_left,
        lam1sq,
        d2_left < 0.0 || lam1sq > 0.0,
    ));

    let d3_left =
        (psi - 1.0) * (p.b * lam1_rho / p.a + 0.5 * lam1sq * (psi - (psi - 1.0) * rho2));
    let d3_right = p.b * p.b / (2.0 * p.a * p.a);
    conds.push(cond(
        "D3",
        "(psi-1)[b*lam1*rho/a + lam1^2(psi-(psi-1)rho^2)/2] < b^2/(2a^2)",
        d3_left,
        d3_right,
        d3_left < d3_right,
    ));

    let d4_left = p.b * lam1_rho;
    let d4_right = -0.5 * psi * p.a * lam1sq;
    conds.push(info_cond(
        "D4",
        "sufficient: b*lam1*rho <= -psi*a*lam1^2/2",
        d4_left,
        d4_right,
        d4_left <= d4_right,
    ));

    ParamCheckReport::from_conditions(conds)
}

/// Whether the exponential moment `E[exp(q int X ds)]` of an integrated
/// square-root process with mean-reversion speed `kappa` and vol `a` is
/// finite: true iff `q < kappa^2 / (2 a^2)`.
pub fn cir_laplace_finite(q: f64, kappa: f64, a: f64) -> Result<bool> {
    if !(a > 0.0) {
        return Err(EzError::InvalidArgument(format!("a must be > 0, got {a}")));
    }
    Ok(q < kappa * kappa / (2.0 * a * a))
}
