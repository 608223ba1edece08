use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wedgeq_core::Grid;

#[derive(Debug, Parser)]
#[command(name = "wedgeq", version, about = "Waiting-time analytics for AI-assisted review workflows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Workflow document (JSON).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Output encoding; each command has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Override the document's arrival rate.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Override the document's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:step` (inclusive) or a single value.
    #[arg(long)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    /// Savings-ratio grid `start:stop:step`.
    #[arg(long)]
    pub grid: Option<Grid>,
    /// Manual utilizations, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rho_h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReviewCurveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Risk grid `start:stop:step` within [0, 1].
    #[arg(long)]
    pub grid: Option<Grid>,
    /// Congestion costs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub arrivals: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Route and mixed service-time moments.
    Moments(Common),
    /// Mean waiting time of the mixed queue.
    Wait(Common),
    /// Manual-versus-AI comparison and decision diagnostics.
    Wedge(Common),
    /// Smallest AI share that stabilizes an overloaded manual queue.
    Stabilize(Common),
    /// Waits of the pure routes over an arrival-rate grid.
    Sweep(GridArgs),
    /// Admissible AI variability over a savings-ratio grid.
    Design(DesignArgs),
    /// Sampled service-time histograms.
    Dist(DistArgs),
    /// Congestion-priced review equilibrium.
    Equilibrium(Common),
    /// Optimal review effort against perceived risk.
    ReviewCurve(ReviewCurveArgs),
    /// Discrete-event simulation with an analytic comparison.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Moments(c)
            | Command::Wait(c)
            | Command::Wedge(c)
            | Command::Stabilize(c)
            | Command::Equilibrium(c) => c,
            Command::Sweep(a) => &a.common,
            Command::Design(a) => &a.common,
            Command::Dist(a) => &a.common,
            Command::ReviewCurve(a) => &a.common,
            Command::Simulate(a) => &a.common,
        }
    }
}
