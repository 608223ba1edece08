//! Command-line front end: argument parsing, dispatch and output encoding.
//!
//! [`execute`] runs a parsed command in-process and returns the rendered
//! text, which keeps every command testable without spawning the binary.

pub mod args;
pub mod commands;
pub mod format;

use std::path::Path;

use wedgeq_core::{load_config, Error, Grid, Result, WorkflowSpec};

pub use args::{Cli, Command, Format};
pub use commands::Report;

fn load(path: &Path, lambda: Option<f64>) -> Result<WorkflowSpec> {
    let mut spec = load_config(path)?;
    if let Some(l) = lambda {
        spec.lambda = l;
        spec.validate()?;
    }
    Ok(spec)
}

fn pick_grid(flag: Option<&Grid>, config: Option<&Grid>, fallback: impl FnOnce() -> Result<Grid>) -> Result<Grid> {
    match flag.or(config) {
        Some(g) => Ok(g.clone()),
        None => fallback(),
    }
}

/// Runs `command` and returns its report.
pub fn report(command: &Command) -> Result<Report> {
    let common = command.common();
    let spec = load(&common.config, common.lambda)?;
    let seed = common.seed;
    match command {
        Command::Moments(_) => commands::moments(&spec),
        Command::Wait(_) => commands::wait(&spec),
        Command::Wedge(_) => commands::wedge(&spec),
        Command::Stabilize(_) => commands::stabilize(&spec),
        Command::Equilibrium(_) => commands::equilibrium(&spec),
        Command::Sweep(a) => {
            let grid = pick_grid(a.grid.as_ref(), spec.grids.lambda_grid.as_ref(), || Grid::new(vec![spec.lambda]))?;
            commands::sweep(&spec, &grid)
        }
        Command::Design(a) => {
            let grid = pick_grid(a.grid.as_ref(), spec.grids.s_grid.as_ref(), || {
                Grid::new(vec![spec.ai_moments()?.mean / spec.manual.tau_h])
            })?;
            let rho_h = match (&a.rho_h, &spec.grids.rho_h) {
                (Some(r), _) | (None, Some(r)) => r.clone(),
                (None, None) => vec![spec.lambda * spec.manual.tau_h / spec.capacity],
            };
            commands::design(&spec, &grid, &rho_h)
        }
        Command::Dist(a) => {
            let n = a.samples.or(spec.grids.n_samples).unwrap_or(commands::DEFAULT_SAMPLES);
            let w = a.bin_width.or(spec.grids.bin_width).unwrap_or(commands::DEFAULT_BIN_WIDTH);
            commands::dist(&spec, n, w, seed.unwrap_or(spec.sim.seed))
        }
        Command::ReviewCurve(a) => {
            let grid = pick_grid(a.grid.as_ref(), spec.grids.pi_grid.as_ref(), || commands::DEFAULT_PI_GRID.parse())?;
            let thetas = match (&a.theta, &spec.grids.theta, spec.signal.as_ref().and_then(|s| s.theta)) {
                (Some(t), _, _) | (None, Some(t), _) => t.clone(),
                (None, None, Some(t)) => vec![t],
                (None, None, None) => {
                    return Err(Error::domain("theta", "give --theta, grids.theta or signal.theta"));
                }
            };
            commands::review_curve(&spec, &grid, &thetas)
        }
        Command::Simulate(a) => commands::simulate(
            &spec,
            &commands::SimulateOptions {
                seed,
                reps: a.reps,
                arrivals: a.arrivals,
            },
        ),
    }
}

/// Runs `command`, writes to `--out` when given, and returns the text for
/// stdout (empty when written to a file).
pub fn execute(command: &Command) -> Result<String> {
    let common = command.common();
    let text = report(command)?.render(common.format);
    match &common.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Machine-readable error line written to stderr.
pub fn error_json(e: &Error) -> String {
    let v = serde_json::json!({"error": e.code(), "exit_code": e.exit_code(), "message": e.to_string()});
    format!("{v}\n")
}
