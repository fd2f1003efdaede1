//! Command-line front end: parameter condition checks, PDE solves with CSV
//! emission, Monte Carlo verification runs, and horizon sweeps.
//!
//! Exit codes: 0 success, 1 condition/check failure, 2 configuration error,
//! 3 numeric failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ezport::config::RunConfig;
use ezport::error::EzError;
use ezport::market::{check_heston_conditions, check_kim_omberg_conditions, ModelKind};
use ezport::sim::{
    martingale_budget_check, simulate_state, BudgetMode, MarkovPolicy, PerturbedPolicy,
};
use ezport::solver::{
    apriori_lower_bound, solve_value_pde, stationary_consumption_limit, upper_bound_violation,
    Grid, SolveConfig,
};
use ezport::strategy::extract_policy;

#[derive(Parser)]
#[command(name = "ezport", version, about = "Finite-horizon Epstein-Zin portfolio solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the parameter condition checkers and print the table.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the value PDE; write value/policy surfaces and bound summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the Monte Carlo budget-identity checks.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Sweep the time-0 consumption-wealth ratio over horizons.
    Horizon {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

const EXIT_CHECK_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code_for(err: &EzError) -> u8 {
    match err {
        EzError::SolverFailure { .. } | EzError::SimulationFailure(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// 17 significant digits: round-trips f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_check(config: &Path) -> Result<u8, EzError> {
    let cfg = RunConfig::load(config)?;
    let ez = cfg.preferences()?;
    // The checkers run on the raw parameters: a set that fails a condition
    // (e.g. Feller) must produce the table and exit 1, not a build error.
    let report = match &cfg.model {
        ModelKind::Heston(p) => check_heston_conditions(p, &ez),
        ModelKind::KimOmberg(p) => check_kim_omberg_conditions(p, &ez),
        ModelKind::Constant(_) => {
            cfg.market_model()?;
            println!("constant-coefficient model: no conditions to check");
            return Ok(0);
        }
    };
    print!("{}", report.text_table());
    Ok(if report.pass { 0 } else { EXIT_CHECK_FAIL })
}

fn cmd_solve(config: &Path, out: &Path) -> Result<u8, EzError> {
    let cfg = RunConfig::load(config)?;
    let ez = cfg.preferences()?;
    let m = cfg.market_model()?;
    let grid = Grid::for_model(&m, cfg.solver.nx, cfg.solver.horizon, cfg.solver.steps_per_year)?;
    let surf = solve_value_pde(&m, &ez, &grid, &SolveConfig::default())?;
    let policy = extract_policy(&m, &ez, &surf)?;
    let lower = apriori_lower_bound(&m, &ez, &grid)?;

    std::fs::create_dir_all(out)?;
    {
        let mut w = BufWriter::new(File::create(out.join("value_surface.csv"))?);
        writeln!(w, "t,x,y,z")?;
        for i in 0..=grid.t_steps {
            let t = grid.time(i);
            for (j, &x) in grid.x.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt(t),
                    fmt(x),
                    fmt(surf.y[[i, j]]),
                    fmt(surf.z[[i, j]])
                )?;
            }
        }
    }
    {
        let mut w = BufWriter::new(File::create(out.join("policy_surface.csv"))?);
        writeln!(w, "t,x,pi_star,ctilde_star")?;
        for i in 0..=grid.t_steps {
            let t = grid.time(i);
            for (j, &x) in grid.x.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt(t),
                    fmt(x),
                    fmt(policy.pi_star[[i, j]]),
                    fmt(policy.ctilde_star[[i, j]])
                )?;
            }
        }
    }
    {
        let upper_violation = upper_bound_violation(&surf, &ez);
        let mut lower_violation = f64::NEG_INFINITY;
        for i in 0..=grid.t_steps {
            for j in 0..grid.nx() {
                lower_violation = lower_violation.max(lower[[i, j]] - surf.y[[i, j]]);
            }
        }
        let mut w = BufWriter::new(File::create(out.join("bounds.txt"))?);
        writeln!(w, "h_max {}", fmt(surf.h_max))?;
        writeln!(w, "upper_bound_t0 {}", fmt(surf.upper_bound(&ez, 0.0)))?;
        writeln!(w, "max_upper_violation {}", fmt(upper_violation))?;
        writeln!(w, "max_lower_violation {}", fmt(lower_violation))?;
    }
    println!(
        "solved {} x {} grid over T = {}; outputs in {}",
        grid.t_steps + 1,
        grid.nx(),
        grid.horizon,
        out.display()
    );
    Ok(0)
}

fn cmd_simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    paths: Option<usize>,
    dt: Option<f64>,
) -> Result<u8, EzError> {
    let cfg = RunConfig::load(config)?;
    let ez = cfg.preferences()?;
    let m = cfg.market_model()?;
    let grid = Grid::for_model(&m, cfg.solver.nx, cfg.solver.horizon, cfg.solver.steps_per_year)?;
    let surf = solve_value_pde(&m, &ez, &grid, &SolveConfig::default())?;
    let policy = extract_policy(&m, &ez, &surf)?;

    let sim = &cfg.simulation;
    let seed = seed.unwrap_or(sim.seed);
    let n_paths = paths.unwrap_or(sim.n_paths);
    let dt = dt.unwrap_or(sim.dt);
    let x0 = cfg.x0(sim.x0);
    let bundle = simulate_state(&m, x0, cfg.solver.horizon, dt, n_paths, seed)?;

    let optimal = martingale_budget_check(
        &m,
        &ez,
        &surf,
        &policy as &dyn MarkovPolicy,
        &bundle,
        sim.w0,
        BudgetMode::Optimal,
        "budget_optimal",
    )?;
    let perturbed_policy = PerturbedPolicy {
        base: &policy,
        pi_shift: sim.pi_shift.unwrap_or(0.2),
        ctilde_scale: 1.0,
    };
    let perturbed = martingale_budget_check(
        &m,
        &ez,
        &surf,
        &perturbed_policy,
        &bundle,
        sim.w0,
        BudgetMode::Perturbed,
        "budget_perturbed",
    )?;

    std::fs::create_dir_all(out)?;
    for rep in [&optimal, &perturbed] {
        let path = out.join(format!("{}.json", rep.label));
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, rep)?;
        writeln!(w)?;
        println!("{rep}");
    }
    Ok(if optimal.pass && perturbed.pass {
        0
    } else {
        EXIT_CHECK_FAIL
    })
}

fn cmd_horizon(config: &Path, out: &Path) -> Result<u8, EzError> {
    let cfg = RunConfig::load(config)?;
    let m = cfg.market_model()?;
    let hz = &cfg.horizon;
    let psis = if hz.psi.is_empty() {
        vec![cfg.preferences.psi]
    } else {
        hz.psi.clone()
    };
    let deltas = if hz.delta.is_empty() {
        vec![cfg.preferences.delta]
    } else {
        hz.delta.clone()
    };
    let x0 = cfg.x0(hz.x0);

    std::fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join("horizon.csv"))?);
    writeln!(w, "horizon,psi,delta,ctilde0")?;
    for &psi in &psis {
        for &delta in &deltas {
            let ez = ezport::market::EzPreferences::with_any_eis(cfg.preferences.gamma, psi, delta)?;
            let series = stationary_consumption_limit(
                &m,
                &ez,
                x0,
                hz.t_max,
                hz.n_points,
                cfg.solver.nx,
                cfg.solver.steps_per_year,
            )?;
            for (h, c) in series.horizons.iter().zip(&series.ctilde0) {
                writeln!(w, "{},{},{},{}", fmt(*h), fmt(psi), fmt(delta), fmt(*c))?;
            }
        }
    }
    println!(
        "horizon sweep: {} psi x {} delta values up to T = {}",
        psis.len(),
        deltas.len(),
        hz.t_max
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Check { config } => cmd_check(config),
        Cmd::Solve { config, out } => cmd_solve(config, out),
        Cmd::Simulate {
            config,
            out,
            seed,
            paths,
            dt,
        } => cmd_simulate(config, out, *seed, *paths, *dt),
        Cmd::Horizon { config, out } => cmd_horizon(config, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
