//! Decision formulas comparing the manual and AI routes.
//!
//! `savings_ratio` is `tau_a / tau_h`; `rho_h` is the utilization the queue
//! would have with every task handled manually.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::queue::{is_stable, wq_pk, QueueInputs};
use crate::service::{ManualRoute, RouteMoments};

/// Absolute tolerance on the routing-derivative numerator below which the
/// two routes are reported as indifferent.
pub const KNIFE_EDGE_TOLERANCE: f64 = 1e-12;

/// Relative disagreement tolerated between the inequality form of the wedge
/// test and a direct comparison of waiting times.
const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    FullAi,
    FullManual,
    Indifferent,
}

/// Minimum AI share needed to stabilize an overloaded manual queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    /// `Some(0.0)` when the manual queue is already stable, `None` when no
    /// share can stabilize it.
    pub x_c: Option<f64>,
    pub feasible: bool,
    pub manual_overloaded: bool,
    /// The AI route uses less attention on average than manual handling.
    pub rescue_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeReport {
    pub w_manual: f64,
    pub w_ai: f64,
    pub ai_better: bool,
    /// Variability ratio `(1 + c2_a) / (1 + c2_h)`.
    pub lhs: f64,
    /// Variance budget `(tau_h/tau_a)^2 (1 - lambda tau_a/C) / (1 - lambda tau_h/C)`.
    pub rhs: f64,
    pub savings_ratio: f64,
    pub rho_h: f64,
    pub rho_a: f64,
    pub c2_a_max: f64,
    pub lambda_star: Option<f64>,
    pub bang_bang_direction: Direction,
    pub x_c: Option<f64>,
    pub rescue_ok: bool,
}

fn route_wait(lambda: f64, capacity: f64, service: RouteMoments, route: &str) -> Result<f64> {
    let q = QueueInputs::new(lambda, capacity, service)?;
    wq_pk(&q).map(|w| w.wq).map_err(|e| match e {
        Error::Unstable { rho, .. } => Error::Unstable {
            rho,
            route: Some(route.to_owned()),
        },
        other => other,
    })
}

/// Compares pure manual and pure AI handling at the same arrival rate.
///
/// Both pure systems must be stable. The inequality form and the direct
/// comparison of waits are evaluated independently; a disagreement beyond
/// `1e-9` is reported as [`Error::Inconsistent`].
pub fn wedge_test(manual: &ManualRoute, ai: &RouteMoments, lambda: f64, capacity: f64) -> Result<WedgeReport> {
    ensure_positive("ai.mean", ai.mean)?;
    let w_manual = route_wait(lambda, capacity, manual.moments(), "manual")?;
    let w_ai = route_wait(lambda, capacity, *ai, "ai")?;

    let tau_h = manual.tau_h;
    let tau_a = ai.mean;
    let lhs = (1.0 + ai.c2()) / (1.0 + manual.c2_h);
    let rhs = (tau_h / tau_a).powi(2) * (1.0 - lambda * tau_a / capacity) / (1.0 - lambda * tau_h / capacity);
    let ai_better = lhs < rhs;

    let ineq_gap = (lhs - rhs) / rhs;
    let wait_gap = if w_manual > 0.0 {
        (w_ai - w_manual) / w_manual
    } else {
        w_ai - w_manual
    };
    if ineq_gap.abs() > CONSISTENCY_TOLERANCE
        && wait_gap.abs() > CONSISTENCY_TOLERANCE
        && ineq_gap.signum() != wait_gap.signum()
    {
        return Err(Error::Inconsistent(format!(
            "wedge inequality (lhs {lhs}, rhs {rhs}) disagrees with waits (manual {w_manual}, ai {w_ai})"
        )));
    }

    let savings_ratio = tau_a / tau_h;
    let rho_h = lambda * tau_h / capacity;
    let stab = stabilization(manual, ai, lambda, capacity)?;
    Ok(WedgeReport {
        w_manual,
        w_ai,
        ai_better,
        lhs,
        rhs,
        savings_ratio,
        rho_h,
        rho_a: lambda * tau_a / capacity,
        c2_a_max: variance_budget(manual.c2_h, savings_ratio, rho_h)?,
        lambda_star: lambda_star(manual, ai, capacity),
        bang_bang_direction: bang_bang(manual, ai, lambda, capacity)?,
        x_c: stab.x_c,
        rescue_ok: stab.rescue_ok,
    })
}

/// Largest AI squared CV for which AI still shortens the mean wait.
pub fn variance_budget(c2_h: f64, savings_ratio: f64, rho_h: f64) -> Result<f64> {
    ensure_non_negative("c2_h", c2_h)?;
    ensure_positive("savings_ratio", savings_ratio)?;
    ensure_non_negative("rho_h", rho_h)?;
    if rho_h >= 1.0 {
        return Err(Error::domain("rho_h", format!("manual route must be stable, got {rho_h}")));
    }
    if savings_ratio * rho_h >= 1.0 {
        return Err(Error::domain(
            "savings_ratio",
            format!("AI route unstable: s * rho_h = {} >= 1", savings_ratio * rho_h),
        ));
    }
    let s = savings_ratio;
    Ok((1.0 - rho_h * s) / (1.0 - rho_h) * (1.0 + c2_h) / (s * s) - 1.0)
}

/// Numerator of `dW/dx`; its sign is independent of `x`.
pub fn routing_derivative_numerator(manual: &ManualRoute, ai: &RouteMoments, lambda: f64, capacity: f64) -> f64 {
    let q_h = manual.q_h();
    capacity * (ai.m2 - q_h) + lambda * (q_h * ai.mean - ai.m2 * manual.tau_h)
}

/// Waiting-time-minimizing corner for a fixed review effort.
///
/// Errors only when no routing fraction yields a stable queue.
pub fn bang_bang(manual: &ManualRoute, ai: &RouteMoments, lambda: f64, capacity: f64) -> Result<Direction> {
    let rho_h = lambda * manual.tau_h / capacity;
    let rho_a = lambda * ai.mean / capacity;
    if !is_stable(rho_h) && !is_stable(rho_a) {
        return Err(Error::Unstable {
            rho: rho_h.min(rho_a),
            route: Some("mixed".into()),
        });
    }
    let n = routing_derivative_numerator(manual, ai, lambda, capacity);
    Ok(if n.abs() <= KNIFE_EDGE_TOLERANCE {
        Direction::Indifferent
    } else if n < 0.0 {
        Direction::FullAi
    } else {
        Direction::FullManual
    })
}

/// Arrival rate at which the preferred corner switches, when that crossing
/// lies where both pure routes are stable.
pub fn lambda_star(manual: &ManualRoute, ai: &RouteMoments, capacity: f64) -> Option<f64> {
    let q_h = manual.q_h();
    let denom = q_h * ai.mean - ai.m2 * manual.tau_h;
    if denom == 0.0 {
        return None;
    }
    let value = capacity * (q_h - ai.m2) / denom;
    let stable = |tau: f64| is_stable(value * tau / capacity);
    (value.is_finite() && value > 0.0 && stable(manual.tau_h) && stable(ai.mean)).then_some(value)
}

pub fn stabilization(manual: &ManualRoute, ai: &RouteMoments, lambda: f64, capacity: f64) -> Result<Stabilization> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("capacity", capacity)?;
    let tau_h = manual.tau_h;
    let tau_a = ai.mean;
    let rescue_ok = tau_a < tau_h;
    let manual_overloaded = lambda * tau_h >= capacity;
    if !manual_overloaded {
        return Ok(Stabilization {
            x_c: Some(0.0),
            feasible: true,
            manual_overloaded,
            rescue_ok,
        });
    }
    if !rescue_ok || lambda * tau_a >= capacity {
        return Ok(Stabilization {
            x_c: None,
            feasible: false,
            manual_overloaded,
            rescue_ok,
        });
    }
    Ok(Stabilization {
        x_c: Some((lambda * tau_h - capacity) / (lambda * (tau_h - tau_a))),
        feasible: true,
        manual_overloaded,
        rescue_ok,
    })
}
