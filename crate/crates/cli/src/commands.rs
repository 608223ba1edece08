//! One function per subcommand. Each returns a [`Report`] and never prints.

use serde::Serialize;
use serde_json::{json, Value};
use wedgeq_core::diagnostics::routing_derivative_numerator;
use wedgeq_core::queue::is_stable;
use wedgeq_core::verification::review_effort_for_risk;
use wedgeq_core::{
    mixed_moments, policy_profile, replicate, residual_error, sample_routes, solve_equilibrium, stabilization,
    variance_budget, wedge_test, wq_kingman, wq_pk, Error, Grid, QueueInputs, Result, RouteMoments, SignalEnvironment,
    WaitResult, WorkflowSpec,
};

use crate::args::Format;
use crate::format::{render_flat_csv, render_json, to_rounded_value, Cell, Table};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_PI_GRID: &str = "0:1:0.01";
/// Refuse histograms wider than this many bins.
pub const MAX_BINS: usize = 1_000_000;

pub const SWEEP_COLUMNS: [&str; 7] = ["lambda", "w_manual", "w_ai", "rho_H", "rho_A", "stable_H", "stable_A"];
pub const DESIGN_COLUMNS: [&str; 3] = ["s", "rho_H", "c2_a_max"];
pub const DIST_COLUMNS: [&str; 6] = ["bin_lo", "bin_hi", "manual_count", "ai_count", "manual_density", "ai_density"];
pub const REVIEW_CURVE_COLUMNS: [&str; 3] = ["pi", "theta", "r_star"];

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Json(Value),
    Table(Table),
}

impl Report {
    fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Report::Json(to_rounded_value(value)?))
    }

    pub fn render(&self, format: Option<Format>) -> String {
        match (self, format) {
            (Report::Json(v), None | Some(Format::Json)) => render_json(v),
            (Report::Json(v), Some(Format::Csv)) => render_flat_csv(v),
            (Report::Table(t), None | Some(Format::Csv)) => t.to_csv(),
            (Report::Table(t), Some(Format::Json)) => render_json(&t.to_json()),
        }
    }
}

fn require_signal(spec: &WorkflowSpec) -> Result<SignalEnvironment> {
    spec.environment()
        .ok_or_else(|| Error::domain("signal", "this command needs a `signal` block"))
}

/// AI-route moments with a JSON description of how they were obtained.
fn ai_details(spec: &WorkflowSpec) -> Result<(RouteMoments, Value)> {
    if let (Some(r), Some(curve)) = (spec.review_r, spec.error_curve) {
        let m = spec.ai_moments()?;
        let detail = json!({
            "mode": "fixed",
            "review_r": r,
            "p_r": residual_error(&curve, r)?,
            "tau_a": m.mean,
            "q_a": m.m2,
            "c2_a": m.c2(),
        });
        return Ok((m, detail));
    }
    let env = require_signal(spec)?;
    let configured = spec.signal.as_ref().and_then(|s| s.theta);
    let theta = spec.policy_theta()?.expect("signal mode has a theta");
    let p = policy_profile(&env, theta, &spec.rework)?;
    let detail = json!({
        "mode": "policy",
        "theta": theta,
        "theta_source": if configured.is_some() { "config" } else { "equilibrium" },
        "pi_star": p.pi_star,
        "threshold_signal": p.threshold_signal,
        "mean_review": p.mean_review,
        "escape_probability": p.escape_probability,
        "irreducible_escape": p.irreducible_escape,
        "tau_a": p.moments.mean,
        "q_a": p.moments.m2,
        "c2_a": p.moments.c2(),
    });
    Ok((p.moments, detail))
}

fn manual_json(spec: &WorkflowSpec) -> Value {
    let m = spec.manual;
    json!({"tau_h": m.tau_h, "c2_h": m.c2_h, "q_h": m.q_h()})
}

pub fn moments(spec: &WorkflowSpec) -> Result<Report> {
    let (ai, ai_json) = ai_details(spec)?;
    let mixed = mixed_moments(&spec.manual, &ai, spec.x)?;
    Report::json(&json!({
        "manual": manual_json(spec),
        "ai": ai_json,
        "mixed": {"x": spec.x, "m": mixed.mean, "q": mixed.m2, "c2_s": mixed.c2()},
        "rho": spec.lambda * mixed.mean / spec.capacity,
    }))
}

/// P-K for Poisson arrivals, Kingman otherwise.
fn wait_for(spec: &WorkflowSpec, lambda: f64, service: RouteMoments) -> Result<WaitResult> {
    let q = QueueInputs::with_arrival_c2(lambda, spec.capacity, service, spec.c2_a)?;
    if spec.c2_a == 1.0 {
        wq_pk(&q)
    } else {
        wq_kingman(&q)
    }
}

fn stable_wait(spec: &WorkflowSpec, lambda: f64, service: RouteMoments) -> Result<Option<f64>> {
    match wait_for(spec, lambda, service) {
        Ok(w) => Ok(Some(w.wq)),
        Err(Error::Unstable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn wait(spec: &WorkflowSpec) -> Result<Report> {
    let (ai, ai_json) = ai_details(spec)?;
    let mixed = mixed_moments(&spec.manual, &ai, spec.x)?;
    let w = wait_for(spec, spec.lambda, mixed)?;
    let q = QueueInputs::with_arrival_c2(spec.lambda, spec.capacity, mixed, spec.c2_a)?;
    Report::json(&json!({
        "lambda": spec.lambda,
        "capacity": spec.capacity,
        "x": spec.x,
        "c2_a": spec.c2_a,
        "m": mixed.mean,
        "q": mixed.m2,
        "rho": w.rho,
        "wq": w.wq,
        "total_sojourn": w.total_sojourn,
        "method": w.method,
        "approximate": w.approximate,
        "wq_pk": wq_pk(&q)?.wq,
        "wq_kingman": wq_kingman(&q)?.wq,
        "w_manual": stable_wait(spec, spec.lambda, spec.manual.moments())?,
        "w_ai": stable_wait(spec, spec.lambda, ai)?,
        "ai": ai_json,
    }))
}

pub fn wedge(spec: &WorkflowSpec) -> Result<Report> {
    let (ai, ai_json) = ai_details(spec)?;
    let report = wedge_test(&spec.manual, &ai, spec.lambda, spec.capacity)?;
    let mut v = to_rounded_value(&report)?;
    let obj = v.as_object_mut().expect("report serializes as an object");
    obj.insert(
        "routing_numerator".into(),
        json!(routing_derivative_numerator(&spec.manual, &ai, spec.lambda, spec.capacity)),
    );
    obj.insert("manual".into(), manual_json(spec));
    obj.insert("ai".into(), ai_json);
    let mut v = json!({"lambda": spec.lambda, "capacity": spec.capacity, "report": v});
    crate::format::round_json(&mut v);
    Ok(Report::Json(v))
}

pub fn stabilize(spec: &WorkflowSpec) -> Result<Report> {
    let (ai, _) = ai_details(spec)?;
    let st = stabilization(&spec.manual, &ai, spec.lambda, spec.capacity)?;
    let load_at = |x: f64| -> Result<f64> { Ok(spec.lambda * mixed_moments(&spec.manual, &ai, x)?.mean / spec.capacity) };
    let load_at_x_c = st.x_c.map(load_at).transpose()?;
    Report::json(&json!({
        "lambda": spec.lambda,
        "capacity": spec.capacity,
        "tau_h": spec.manual.tau_h,
        "tau_a": ai.mean,
        "rho_h": spec.lambda * spec.manual.tau_h / spec.capacity,
        "rho_a": spec.lambda * ai.mean / spec.capacity,
        "x_c": st.x_c,
        "feasible": st.feasible,
        "manual_overloaded": st.manual_overloaded,
        "rescue_ok": st.rescue_ok,
        "load_at_x_c": load_at_x_c,
    }))
}

/// Pure-route waits over an arrival-rate grid. In signal mode the AI route
/// keeps the policy of the document's own arrival rate.
pub fn sweep(spec: &WorkflowSpec, grid: &Grid) -> Result<Report> {
    let (ai, _) = ai_details(spec)?;
    let manual = spec.manual.moments();
    let mut t = Table::new(&SWEEP_COLUMNS);
    for &lambda in grid.points() {
        if lambda <= 0.0 {
            return Err(Error::domain("grid", format!("arrival rates must be positive, got {lambda}")));
        }
        let rho_h = lambda * manual.mean / spec.capacity;
        let rho_a = lambda * ai.mean / spec.capacity;
        let cell = |w: Option<f64>| w.map_or(Cell::Empty, Cell::Num);
        t.push(vec![
            Cell::Num(lambda),
            cell(stable_wait(spec, lambda, manual)?),
            cell(stable_wait(spec, lambda, ai)?),
            Cell::Num(rho_h),
            Cell::Num(rho_a),
            Cell::Bool(is_stable(rho_h)),
            Cell::Bool(is_stable(rho_a)),
        ]);
    }
    Ok(Report::Table(t))
}

pub fn design(spec: &WorkflowSpec, s_grid: &Grid, rho_h: &[f64]) -> Result<Report> {
    let mut t = Table::new(&DESIGN_COLUMNS);
    for &rho in rho_h {
        for &s in s_grid.points() {
            let budget = match variance_budget(spec.manual.c2_h, s, rho) {
                Ok(v) => Cell::Num(v),
                // AI route itself unstable at this (s, rho_H).
                Err(Error::Domain { field, .. }) if field == "savings_ratio" && s > 0.0 => Cell::Empty,
                Err(e) => return Err(e),
            };
            t.push(vec![Cell::Num(s), Cell::Num(rho), budget]);
        }
    }
    Ok(Report::Table(t))
}

fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let c2 = if mean > 0.0 { m2 / (mean * mean) - 1.0 } else { 0.0 };
    (mean, c2)
}

pub fn dist(spec: &WorkflowSpec, n_samples: usize, bin_width: f64, seed: u64) -> Result<Report> {
    if n_samples == 0 {
        return Err(Error::domain("samples", "must be positive"));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::domain("bin_width", format!("must be positive, got {bin_width}")));
    }
    let workload = spec.workload()?;
    let samples = sample_routes(&workload, n_samples, seed)?;
    let max = samples.manual.iter().chain(&samples.ai).fold(0.0f64, |m, &v| m.max(v));
    let bins = (max / bin_width).floor() as usize + 1;
    if bins > MAX_BINS {
        return Err(Error::domain("bin_width", format!("{bins} bins exceed the limit of {MAX_BINS}")));
    }
    let histogram = |xs: &[f64]| {
        let mut counts = vec![0u64; bins];
        for &x in xs {
            counts[((x / bin_width).floor() as usize).min(bins - 1)] += 1;
        }
        counts
    };
    let manual = histogram(&samples.manual);
    let ai = histogram(&samples.ai);
    let density = |c: u64| c as f64 / (n_samples as f64 * bin_width);

    let mut t = Table::new(&DIST_COLUMNS);
    let (manual_mean, manual_c2) = sample_moments(&samples.manual);
    let (ai_mean, ai_c2) = sample_moments(&samples.ai);
    let analytic = workload.ai.moments()?;
    t.meta = vec![
        ("n_samples".into(), n_samples as f64),
        ("bin_width".into(), bin_width),
        ("seed".into(), seed as f64),
        ("manual_mean".into(), manual_mean),
        ("manual_c2".into(), manual_c2),
        ("ai_mean".into(), ai_mean),
        ("ai_c2".into(), ai_c2),
        ("ai_escape_rate".into(), samples.escaped as f64 / n_samples as f64),
        ("manual_mean_analytic".into(), spec.manual.tau_h),
        ("manual_c2_analytic".into(), spec.manual.c2_h),
        ("ai_mean_analytic".into(), analytic.mean),
        ("ai_c2_analytic".into(), analytic.c2()),
    ];
    for i in 0..bins {
        t.push(vec![
            Cell::Num(i as f64 * bin_width),
            Cell::Num((i + 1) as f64 * bin_width),
            Cell::Int(manual[i]),
            Cell::Int(ai[i]),
            Cell::Num(density(manual[i])),
            Cell::Num(density(ai[i])),
        ]);
    }
    Ok(Report::Table(t))
}

pub fn equilibrium(spec: &WorkflowSpec) -> Result<Report> {
    let env = require_signal(spec)?;
    let sol = solve_equilibrium(&env, &spec.rework, spec.lambda, spec.capacity)?;
    let mut v = to_rounded_value(&sol)?;
    let obj = v.as_object_mut().expect("solution serializes as an object");
    obj.insert("n_roots".into(), json!(sol.roots.len()));
    let mut v = json!({"lambda": spec.lambda, "capacity": spec.capacity, "c_w": env.c_w, "solution": v});
    crate::format::round_json(&mut v);
    Ok(Report::Json(v))
}

pub fn review_curve(spec: &WorkflowSpec, pi_grid: &Grid, thetas: &[f64]) -> Result<Report> {
    let env = require_signal(spec)?;
    if let Some(bad) = pi_grid.points().iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain("grid", format!("risk {bad} is outside [0, 1]")));
    }
    let mut t = Table::new(&REVIEW_CURVE_COLUMNS);
    for &theta in thetas {
        for &pi in pi_grid.points() {
            let r = review_effort_for_risk(&env, theta, pi)?;
            t.push(vec![Cell::Num(pi), Cell::Num(theta), Cell::Num(r)]);
        }
    }
    Ok(Report::Table(t))
}

pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub arrivals: Option<usize>,
}

fn comparison(sim: f64, analytic: Option<f64>, hw95: f64, hw99: f64) -> Value {
    match analytic {
        Some(a) => json!({
            "value": a,
            "delta": sim - a,
            "delta_ci95_units": (sim - a) / hw95,
            "inside_ci95": (sim - a).abs() <= hw95,
            "inside_ci99": (sim - a).abs() <= hw99,
        }),
        None => Value::Null,
    }
}

pub fn simulate(spec: &WorkflowSpec, opts: &SimulateOptions) -> Result<Report> {
    let mut config = spec.sim_config(opts.seed)?;
    if let Some(n) = opts.arrivals {
        config.n_arrivals = n;
        config.validate()?;
    }
    let reps = opts.reps.unwrap_or(spec.sim.reps);
    let stats = replicate(&config, reps)?;
    let service = config.workload.service_moments()?;
    let q = QueueInputs::with_arrival_c2(spec.lambda, spec.capacity, service, spec.c2_a)?;
    let ok = |r: Result<WaitResult>| match r {
        Ok(w) => Ok(Some(w.wq)),
        Err(Error::Unstable { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let pk = ok(wq_pk(&q))?;
    let kingman = ok(wq_kingman(&q))?;
    let (hw95, hw99) = (stats.wq_half_width_95, stats.wq_half_width_99);
    Report::json(&json!({
        "config": {
            "seed": config.seed,
            "n_arrivals": config.n_arrivals,
            "warmup_fraction": config.warmup_fraction,
            "n_batches": config.n_batches,
            "reps": reps,
            "rework_mode": config.rework_mode,
            "arrivals": config.arrivals,
        },
        "stats": stats,
        "analytic": {
            "m": service.mean,
            "q": service.m2,
            "c2_s": service.c2(),
            "rho": stats.rho_analytic,
            "escape_probability": config.workload.ai.escape_probability()?,
            "wq_pk": comparison(stats.wq_mean, pk, hw95, hw99),
            "wq_kingman": comparison(stats.wq_mean, kingman, hw95, hw99),
        },
    }))
}
