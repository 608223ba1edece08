//! Queueing analytics for task workflows where AI drafts are reviewed by a
//! scarce human team and escaped errors come back as rework.
//!
//! The crate computes mean waiting times from the first two moments of the
//! human-attention requirement, the manual-versus-AI decision diagnostics,
//! the congestion-priced selective review equilibrium, and a discrete-event
//! simulator that checks all of them by Monte Carlo.

pub mod diagnostics;
pub mod error;
pub mod quadrature;
pub mod queue;
pub mod service;
pub mod simulator;
pub mod verification;
pub mod workflow;

pub use diagnostics::{
    bang_bang, lambda_star, stabilization, variance_budget, wedge_test, Direction, Stabilization, WedgeReport,
};
pub use error::{Error, Result};
pub use queue::{utilization, wq_kingman, wq_pk, QueueInputs, WaitMethod, WaitResult, STABILITY_MARGIN};
pub use service::{
    ai_route_moments, mixed_moments, residual_error, sample_ai, sample_manual, AiDraw, ErrorCurve, ManualRoute,
    ReworkModel, RouteMoments,
};
pub use simulator::{
    replicate, run, sample_routes, AiRoute, ArrivalProcess, ReworkMode, RouteSamples, SimConfig, SimStats, WaitQuantiles,
    Workload,
};
pub use workflow::{load_config, Grid, GridsBlock, SignalBlock, SimBlock, WorkflowSpec};
pub use verification::{
    phi, policy_profile, policy_route_moments, review_effort, solve_equilibrium, BetaDensity, Equilibrium,
    EquilibriumSolution, PolicyProfile, ReviewPolicy, RiskMap, SignalEnvironment,
};

