//! The JSON workflow document that drives every command.
//!
//! A document describes one queue: arrival rate, capacity, routing share, the
//! manual route, the AI route in either fixed-review or signal-policy mode,
//! and optional simulation and grid settings. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, ensure_unit, Error, Result};
use crate::service::{ai_route_moments, ErrorCurve, ManualRoute, ReworkModel, RouteMoments};
use crate::simulator::{AiRoute, ArrivalProcess, ReworkMode, SimConfig, Workload};
use crate::verification::{
    solve_equilibrium, BetaDensity, RiskMap, SignalEnvironment, DEFAULT_QUADRATURE_NODES,
};

/// Largest tolerated deviation of the signal density's mass from 1.
pub const DENSITY_MASS_TOLERANCE: f64 = 1e-10;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowSpec {
    /// Arrival rate, tasks per calendar hour.
    pub lambda: f64,
    /// Attention-hours supplied per calendar hour.
    #[serde(alias = "capacity_C")]
    pub capacity: f64,
    /// Share of tasks routed to AI.
    #[serde(default = "one")]
    pub x: f64,
    /// Squared CV of interarrival times (1 = Poisson).
    #[serde(default = "one")]
    pub c2_a: f64,
    pub manual: ManualRoute,
    /// Fixed review effort per AI draft, attention-hours.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_curve: Option<ErrorCurve>,
    pub rework: ReworkModel,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub grids: GridsBlock,
}

/// Signal-dependent review policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalBlock {
    pub risk_map: RiskMap,
    pub density: BetaDensity,
    /// Loss per escaped error.
    #[serde(alias = "K")]
    pub loss_k: f64,
    pub kappa: f64,
    /// Waiting cost per task per calendar hour.
    pub c_w: f64,
    #[serde(default)]
    pub p_inf: f64,
    /// Congestion cost of review time. When absent the equilibrium value is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

impl SignalBlock {
    pub fn environment(&self) -> SignalEnvironment {
        SignalEnvironment {
            risk_map: self.risk_map,
            density: self.density,
            loss_k: self.loss_k,
            kappa: self.kappa,
            c_w: self.c_w,
            p_inf: self.p_inf,
            quadrature_nodes: self.quadrature_nodes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub seed: u64,
    pub n_arrivals: usize,
    #[serde(alias = "warmup")]
    pub warmup_fraction: f64,
    #[serde(alias = "batches")]
    pub n_batches: usize,
    pub reps: usize,
    pub rework_mode: ReworkMode,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            seed: 42,
            n_arrivals: SimConfig::DEFAULT_ARRIVALS,
            warmup_fraction: SimConfig::DEFAULT_WARMUP,
            n_batches: SimConfig::DEFAULT_BATCHES,
            reps: 1,
            rework_mode: ReworkMode::Folded,
        }
    }
}

/// Default grids for the table-producing commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_h: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
}

/// A strictly increasing list of grid points, written either as a JSON array
/// or as `"start:stop:step"` with both ends included.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("grid", "must contain at least one point"));
        }
        if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::domain("grid", format!("point {bad} is not finite")));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid", "points must be strictly increasing"));
        }
        Ok(Self(points))
    }

    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        for (name, v) in [("start", start), ("stop", stop), ("step", step)] {
            if !v.is_finite() {
                return Err(Error::domain("grid", format!("{name} is not finite")));
            }
        }
        if step <= 0.0 {
            return Err(Error::domain("grid", format!("step must be positive, got {step}")));
        }
        if stop < start {
            return Err(Error::domain("grid", format!("stop {stop} is below start {start}")));
        }
        // Tolerate the usual decimal representation error in (stop - start) / step.
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let snap = |v: f64| -> f64 { format!("{v:.11e}").parse().expect("float text re-parses") };
        let points = (0..=n).map(|i| snap(start + step * i as f64)).collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain("grid", format!("`{t}` is not a number in `{s}`")))
        };
        match parts.as_slice() {
            [a] => Self::new(vec![parse(a)?]),
            [a, b, step] => Self::range(parse(a)?, parse(b)?, parse(step)?),
            _ => Err(Error::domain("grid", format!("expected `start:stop:step`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Range(String),
            List(Vec<f64>),
        }
        let grid = match Raw::deserialize(d)? {
            Raw::Range(s) => s.parse(),
            Raw::List(v) => Grid::new(v),
        };
        grid.map_err(serde::de::Error::custom)
    }
}

/// Reads and validates a workflow document.
pub fn load_config(path: impl AsRef<Path>) -> Result<WorkflowSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    WorkflowSpec::from_json(&text)
}

/// Prefixes a bare field name in a domain error with its block.
fn within(block: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Domain { field, reason } if !field.contains('.') => Error::Domain {
            field: format!("{block}.{field}"),
            reason,
        },
        other => other,
    })
}

impl WorkflowSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("lambda", self.lambda)?;
        ensure_positive("capacity", self.capacity)?;
        ensure_unit("x", self.x)?;
        ensure_non_negative("c2_a", self.c2_a)?;
        within("manual", ManualRoute::new(self.manual.tau_h, self.manual.c2_h).map(drop))?;
        within("rework", ReworkModel::new(self.rework.mu_r, self.rework.mu_r2).map(drop))?;
        match (&self.review_r, &self.signal) {
            (Some(_), Some(_)) => {
                return Err(Error::domain("review_r", "give either `review_r` or `signal`, not both"));
            }
            (None, None) => {
                return Err(Error::domain("review_r", "one of `review_r` or `signal` is required"));
            }
            (Some(r), None) => {
                ensure_non_negative("review_r", *r)?;
                let c = self
                    .error_curve
                    .ok_or_else(|| Error::domain("error_curve", "required when `review_r` is given"))?;
                within("error_curve", ErrorCurve::new(c.p0, c.p_inf, c.kappa).map(drop))?;
            }
            (None, Some(signal)) => {
                if self.error_curve.is_some() {
                    return Err(Error::domain(
                        "error_curve",
                        "not used in signal mode; kappa and p_inf belong in `signal`",
                    ));
                }
                self.validate_signal(signal)?;
            }
        }
        self.validate_sim()?;
        self.validate_grids()
    }

    fn validate_signal(&self, signal: &SignalBlock) -> Result<()> {
        let env = signal.environment();
        within("signal", env.validate())?;
        if let Some(theta) = signal.theta {
            ensure_positive("signal.theta", theta)?;
        }
        let mass = env.density_mass()?;
        if (mass - 1.0).abs() > DENSITY_MASS_TOLERANCE {
            return Err(Error::domain(
                "signal.density",
                format!("integrates to {mass}, not 1 within {DENSITY_MASS_TOLERANCE:e}"),
            ));
        }
        Ok(())
    }

    fn validate_sim(&self) -> Result<()> {
        if self.sim.reps == 0 {
            return Err(Error::domain("sim.reps", "must be at least 1"));
        }
        let check = SimConfig {
            n_arrivals: self.sim.n_arrivals,
            warmup_fraction: self.sim.warmup_fraction,
            n_batches: self.sim.n_batches,
            ..SimConfig::new(self.placeholder_workload(), self.sim.seed)
        };
        within("sim", check.validate())
    }

    fn validate_grids(&self) -> Result<()> {
        let g = &self.grids;
        if let Some(rho) = &g.rho_h {
            for &r in rho {
                ensure_positive("grids.rho_h", r)?;
                if r >= 1.0 {
                    return Err(Error::domain("grids.rho_h", format!("must be < 1, got {r}")));
                }
            }
        }
        if let Some(theta) = &g.theta {
            for &t in theta {
                ensure_positive("grids.theta", t)?;
            }
        }
        if let Some(n) = g.n_samples {
            if n == 0 {
                return Err(Error::domain("grids.n_samples", "must be positive"));
            }
        }
        if let Some(w) = g.bin_width {
            ensure_positive("grids.bin_width", w)?;
        }
        Ok(())
    }

    /// A workload with the right rates but no AI solve, used only to reuse
    /// the simulation-config checks.
    fn placeholder_workload(&self) -> Workload {
        Workload {
            lambda: self.lambda,
            capacity: self.capacity,
            x: self.x,
            manual: self.manual,
            ai: AiRoute::FixedReview {
                curve: ErrorCurve {
                    p0: 0.0,
                    p_inf: 0.0,
                    kappa: 1.0,
                },
                rework: self.rework,
                review: 0.0,
            },
        }
    }

    pub fn is_policy_mode(&self) -> bool {
        self.signal.is_some()
    }

    pub fn environment(&self) -> Option<SignalEnvironment> {
        self.signal.as_ref().map(SignalBlock::environment)
    }

    /// The congestion cost used for the AI route in signal mode: the
    /// configured `theta`, or else the primary equilibrium root.
    pub fn policy_theta(&self) -> Result<Option<f64>> {
        let Some(signal) = &self.signal else {
            return Ok(None);
        };
        if let Some(theta) = signal.theta {
            return Ok(Some(theta));
        }
        let sol = solve_equilibrium(&signal.environment(), &self.rework, self.lambda, self.capacity)?;
        Ok(Some(sol.primary.theta_star))
    }

    pub fn ai_route(&self) -> Result<AiRoute> {
        match (&self.review_r, &self.signal) {
            (Some(r), _) => Ok(AiRoute::FixedReview {
                curve: self.error_curve.ok_or_else(|| Error::domain("error_curve", "missing"))?,
                rework: self.rework,
                review: *r,
            }),
            (None, Some(signal)) => Ok(AiRoute::Policy {
                env: signal.environment(),
                rework: self.rework,
                theta: self.policy_theta()?.expect("signal mode"),
            }),
            (None, None) => Err(Error::domain("review_r", "one of `review_r` or `signal` is required")),
        }
    }

    /// AI-route moments. In fixed mode this is the closed form; in signal
    /// mode it is the policy average at [`Self::policy_theta`].
    pub fn ai_moments(&self) -> Result<RouteMoments> {
        match (&self.review_r, &self.error_curve) {
            (Some(r), Some(curve)) => ai_route_moments(curve, &self.rework, *r),
            _ => self.ai_route()?.moments(),
        }
    }

    pub fn workload(&self) -> Result<Workload> {
        Ok(Workload {
            lambda: self.lambda,
            capacity: self.capacity,
            x: self.x,
            manual: self.manual,
            ai: self.ai_route()?,
        })
    }

    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig> {
        let config = SimConfig {
            arrivals: ArrivalProcess::from_c2(self.c2_a),
            n_arrivals: self.sim.n_arrivals,
            warmup_fraction: self.sim.warmup_fraction,
            n_batches: self.sim.n_batches,
            rework_mode: self.sim.rework_mode,
            ..SimConfig::new(self.workload()?, seed.unwrap_or(self.sim.seed))
        };
        config.validate()?;
        Ok(config)
    }
}
