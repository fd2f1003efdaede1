//! JSON run configuration shared by all CLI subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EzError, Result};
use crate::market::{make_model, EzPreferences, MarketModel, ModelKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferencesSection {
    pub gamma: f64,
    pub psi: f64,
    pub delta: f64,
}

fn default_nx() -> usize {
    400
}
fn default_steps_per_year() -> f64 {
    200.0
}
fn default_horizon() -> f64 {
    10.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_steps_per_year")]
    pub steps_per_year: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            nx: default_nx(),
            steps_per_year: default_steps_per_year(),
            horizon: default_horizon(),
        }
    }
}

fn default_n_paths() -> usize {
    10_000
}
fn default_dt() -> f64 {
    1.0 / 250.0
}
fn default_w0() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_w0")]
    pub w0: f64,
    /// Start state; defaults per model kind when absent.
    #[serde(default)]
    pub x0: Option<f64>,
    /// Additive risky-fraction shift for the perturbed-policy check.
    #[serde(default)]
    pub pi_shift: Option<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_paths: default_n_paths(),
            dt: default_dt(),
            seed: 0,
            w0: default_w0(),
            x0: None,
            pi_shift: None,
        }
    }
}

fn default_t_max() -> f64 {
    100.0
}
fn default_n_points() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    /// EIS values to sweep; empty means "use the preferences section".
    #[serde(default)]
    pub psi: Vec<f64>,
    /// Discount rates to sweep; empty means "use the preferences section".
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default)]
    pub x0: Option<f64>,
}

impl Default for HorizonSection {
    fn default() -> Self {
        Self {
            psi: Vec::new(),
            delta: Vec::new(),
            t_max: default_t_max(),
            n_points: default_n_points(),
            x0: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preferences: PreferencesSection,
    pub model: ModelKind,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub horizon: HorizonSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EzError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| EzError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn preferences(&self) -> Result<EzPreferences> {
        let p = &self.preferences;
        EzPreferences::with_any_eis(p.gamma, p.psi, p.delta)
    }

    pub fn market_model(&self) -> Result<MarketModel> {
        make_model(self.model)
    }

    /// Start state for simulation/horizon runs: explicit value, or a
    /// model-specific default (long-run mean for mean-reverting states).
    pub fn x0(&self, explicit: Option<f64>) -> f64 {
        if let Some(x) = explicit {
            return x;
        }
        match self.model {
            ModelKind::Heston(p) => {
                if p.ell > 0.0 {
                    p.ell
                } else {
                    0.01
                }
            }
            ModelKind::KimOmberg(_) => 0.0,
            ModelKind::Constant(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_heston_config() {
        let text = r#"{
            "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.08},
            "model": {"kind": "heston", "r0": 0.05, "r1": 0.0, "lambda": 0.47,
                      "sigma": 1.0, "b": 5.0, "ell": 0.0225, "a": 0.25, "rho": -0.5}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.solver.nx, 400);
        assert_eq!(cfg.simulation.n_paths, 10_000);
        assert!(cfg.preferences().is_ok());
        assert!(cfg.market_model().is_ok());
        assert_eq!(cfg.x0(None), 0.0225);
        assert_eq!(cfg.x0(Some(0.04)), 0.04);
    }

    #[test]
    fn rejects_unknown_model_kind() {
        let text = r#"{
            "preferences": {"gamma": 5.0, "psi": 1.5, "delta": 0.08},
            "model": {"kind": "garch", "omega": 0.1}
        }"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(serde_json::from_str::<RunConfig>("{not json").is_err());
    }

    #[test]
    fn round_trips_through_serde() {
        let text = r#"{
            "preferences": {"gamma": 2.0, "psi": 1.5, "delta": 0.05},
            "model": {"kind": "constant", "r": 0.03, "lambda": 0.3,
                      "sigma": 0.2, "rho": 0.0},
            "solver": {"nx": 50, "steps_per_year": 100.0, "horizon": 2.0},
            "simulation": {"n_paths": 100, "dt": 0.01, "seed": 42, "w0": 1.0}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.solver.nx, 50);
        assert_eq!(back.simulation.seed, 42);
    }
}
