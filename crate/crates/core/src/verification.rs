//! Signal-dependent selective verification and the congestion equilibrium.
//!
//! A reviewer observing signal `s` believes the AI draft is wrong with
//! probability `pi(s)`. Given a congestion cost `theta` per attention-hour,
//! the cost-minimizing review effort is
//!
//! ```text
//! r*(s; theta) = max(0, ln(kappa K' pi(s) / theta)) / kappa,   K' = K (1 - p_inf)
//! ```
//!
//! so drafts with `pi(s) <= pi* = theta / (kappa K')` pass unreviewed and the
//! residual escape probability `pi(s) exp(-kappa r*)` is clipped at `pi*`.
//!
//! Averaging over the signal density gives policy-dependent AI-route moments
//! `tau_a(theta)`, `q_a(theta)`. The congestion cost is then closed by the
//! marginal waiting cost of mean demand,
//!
//! ```text
//! Phi(theta) = c_w lambda dW_q/dtau_a = c_w lambda^3 q_a / (2 C (C - lambda tau_a)^2)
//! ```
//!
//! holding `q_a` fixed, and an equilibrium is any `theta* = Phi(theta*)`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{ensure_non_negative, ensure_positive, ensure_unit, Error, Result};
use crate::quadrature::CompositeRule;
use crate::queue::{is_stable, STABILITY_MARGIN};
use crate::service::{ReworkModel, RouteMoments};

/// Points on the geometric scan of `theta - Phi(theta)`.
pub const SCAN_POINTS: usize = 512;
/// Absolute bracket width at which root bisection stops (relative above 1).
pub const BISECTION_TOLERANCE: f64 = 1e-10;
/// Required fixed-point residual, relative to `max(1, theta)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Allowed quadrature error estimate, relative to `max(1, |integral|)`.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_QUADRATURE_NODES: usize = 256;

/// Logistic risk map `pi(s) = base + amplitude / (1 + exp(-gain (s - midpoint)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskMap {
    pub base: f64,
    pub amplitude: f64,
    pub gain: f64,
    pub midpoint: f64,
}

impl RiskMap {
    pub fn validate(&self) -> Result<()> {
        ensure_unit("risk_map.base", self.base)?;
        ensure_non_negative("risk_map.amplitude", self.amplitude)?;
        ensure_non_negative("risk_map.gain", self.gain)?;
        ensure_unit("risk_map.midpoint", self.midpoint)?;
        if self.base + self.amplitude > 1.0 {
            return Err(Error::domain(
                "risk_map.amplitude",
                format!("base + amplitude must not exceed 1, got {}", self.base + self.amplitude),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.base + self.amplitude / (1.0 + (-self.gain * (s - self.midpoint)).exp())
    }

    /// Supremum on `[0, 1]`; the map is nondecreasing.
    pub fn max(&self) -> f64 {
        self.eval(1.0)
    }
}

/// `Beta(alpha, beta)` signal density on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaDensity {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaDensity {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("density.alpha", self.alpha)?;
        ensure_positive("density.beta", self.beta)
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        let log = (self.alpha - 1.0) * s.ln() + (self.beta - 1.0) * (1.0 - s).ln() - ln_beta(self.alpha, self.beta);
        log.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalEnvironment {
    pub risk_map: RiskMap,
    pub density: BetaDensity,
    /// Loss per escaped error.
    pub loss_k: f64,
    /// Verification skill, per attention-hour.
    pub kappa: f64,
    /// Waiting cost per task per calendar hour.
    pub c_w: f64,
    pub p_inf: f64,
    pub quadrature_nodes: usize,
}

impl SignalEnvironment {
    pub fn validate(&self) -> Result<()> {
        self.risk_map.validate()?;
        self.density.validate()?;
        ensure_positive("loss_k", self.loss_k)?;
        ensure_positive("kappa", self.kappa)?;
        ensure_non_negative("c_w", self.c_w)?;
        ensure_unit("p_inf", self.p_inf)?;
        if self.p_inf >= 1.0 {
            return Err(Error::domain("p_inf", "must be < 1 for review to have any effect"));
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::domain("quadrature_nodes", "must be positive"));
        }
        Ok(())
    }

    /// `kappa K (1 - p_inf)`: the marginal value scale of review.
    pub fn review_scale(&self) -> f64 {
        self.kappa * self.loss_k * (1.0 - self.p_inf)
    }

    pub fn pi_star(&self, theta: f64) -> f64 {
        theta / self.review_scale()
    }

    /// Congestion cost above which no draft is reviewed.
    pub fn theta_max(&self) -> f64 {
        self.review_scale() * self.risk_map.max()
    }

    fn rule(&self) -> CompositeRule {
        CompositeRule::with_nodes(self.quadrature_nodes)
    }

    /// `int_0^1 mu(s) ds`, which should be 1.
    pub fn density_mass(&self) -> Result<f64> {
        let [m] = self.rule().integrate_pieces(0.0, 1.0, &[], QUADRATURE_TOLERANCE, |s| [self.density.pdf(s)])?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviewPolicy {
    pub theta: f64,
    pub pi_star: f64,
}

impl ReviewPolicy {
    pub fn new(env: &SignalEnvironment, theta: f64) -> Result<Self> {
        ensure_positive("theta", theta)?;
        Ok(Self {
            theta,
            pi_star: env.pi_star(theta),
        })
    }
}

fn effort_for_risk(env: &SignalEnvironment, theta: f64, risk: f64) -> f64 {
    let ratio = env.review_scale() * risk / theta;
    if ratio > 1.0 {
        ratio.ln() / env.kappa
    } else {
        0.0
    }
}

/// Optimal review effort as a function of perceived risk directly.
pub fn review_effort_for_risk(env: &SignalEnvironment, theta: f64, risk: f64) -> Result<f64> {
    ensure_positive("theta", theta)?;
    ensure_unit("risk", risk)?;
    Ok(effort_for_risk(env, theta, risk))
}

pub fn review_effort(env: &SignalEnvironment, theta: f64, signal: f64) -> Result<f64> {
    ensure_positive("theta", theta)?;
    ensure_unit("signal", signal)?;
    Ok(effort_for_risk(env, theta, env.risk_map.eval(signal)))
}

/// Escape probability left after optimal review, `pi(s) exp(-kappa r*)`.
pub fn residual_escape(env: &SignalEnvironment, theta: f64, signal: f64) -> Result<f64> {
    let r = review_effort(env, theta, signal)?;
    Ok(env.risk_map.eval(signal) * (-env.kappa * r).exp())
}

/// Signal at which `pi(s) = pi*`, when the threshold is crossed inside
/// `(0, 1)`. Located by bisection.
pub fn threshold_signal(env: &SignalEnvironment, pi_star: f64) -> Option<f64> {
    let map = &env.risk_map;
    if !(map.eval(0.0) < pi_star && pi_star < map.eval(1.0)) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if map.eval(mid) < pi_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Policy-averaged AI-route quantities at a given congestion cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile {
    pub theta: f64,
    pub pi_star: f64,
    pub threshold_signal: Option<f64>,
    pub moments: RouteMoments,
    /// `E_s[r*]`.
    pub mean_review: f64,
    /// `E_s[min(pi, pi*)]`: share of AI drafts whose error escapes review.
    pub escape_probability: f64,
    /// `p_inf E_s[pi]`: the irreducible escape stream, not part of the moments.
    pub irreducible_escape: f64,
}

pub fn policy_profile(env: &SignalEnvironment, theta: f64, rework: &ReworkModel) -> Result<PolicyProfile> {
    let policy = ReviewPolicy::new(env, theta)?;
    let s_star = threshold_signal(env, policy.pi_star);
    let breaks: Vec<f64> = s_star.into_iter().collect();
    let [e_r, e_r2, e_esc, e_r_esc, e_pi] = env.rule().integrate_pieces(0.0, 1.0, &breaks, QUADRATURE_TOLERANCE, |s| {
        let density = env.density.pdf(s);
        let pi = env.risk_map.eval(s);
        let r = effort_for_risk(env, theta, pi);
        let esc = pi * (-env.kappa * r).exp();
        [density * r, density * r * r, density * esc, density * r * esc, density * pi]
    })?;
    let mean = e_r + rework.mu_r * e_esc;
    let m2 = e_r2 + 2.0 * rework.mu_r * e_r_esc + rework.mu_r2 * e_esc;
    Ok(PolicyProfile {
        theta,
        pi_star: policy.pi_star,
        threshold_signal: s_star,
        moments: RouteMoments { mean, m2 },
        mean_review: e_r,
        escape_probability: e_esc,
        irreducible_escape: env.p_inf * e_pi,
    })
}

pub fn policy_route_moments(env: &SignalEnvironment, theta: f64, rework: &ReworkModel) -> Result<RouteMoments> {
    policy_profile(env, theta, rework).map(|p| p.moments)
}

/// Marginal waiting cost of mean demand at fixed second moment.
pub fn phi_from_moments(c_w: f64, lambda: f64, capacity: f64, moments: &RouteMoments) -> Result<f64> {
    let rho = lambda * moments.mean / capacity;
    if !is_stable(rho) {
        return Err(Error::Unstable {
            rho,
            route: Some("ai".into()),
        });
    }
    let slack = capacity - lambda * moments.mean;
    Ok(c_w * lambda.powi(3) * moments.m2 / (2.0 * capacity * slack * slack))
}

pub fn phi(env: &SignalEnvironment, theta: f64, rework: &ReworkModel, lambda: f64, capacity: f64) -> Result<f64> {
    let moments = policy_route_moments(env, theta, rework)?;
    phi_from_moments(env.c_w, lambda, capacity, &moments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub theta_star: f64,
    pub pi_star: f64,
    pub threshold_signal: Option<f64>,
    pub tau_a: f64,
    pub q_a: f64,
    pub c2_a: f64,
    pub rho: f64,
    pub wq: f64,
    pub mean_review: f64,
    pub escape_probability: f64,
    pub irreducible_escape: f64,
    /// `|theta* - Phi(theta*)|`.
    pub residual: f64,
    /// Position among the roots found, smallest first.
    pub root_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub primary: Equilibrium,
    pub roots: Vec<Equilibrium>,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

struct FixedPointProblem<'a> {
    env: &'a SignalEnvironment,
    rework: &'a ReworkModel,
    lambda: f64,
    capacity: f64,
}

impl FixedPointProblem<'_> {
    fn feasible(&self, theta: f64) -> Result<bool> {
        let m = policy_route_moments(self.env, theta, self.rework)?;
        Ok(self.lambda * m.mean < self.capacity * (1.0 - STABILITY_MARGIN))
    }

    /// `theta - Phi(theta)`, with `Phi = +inf` past saturation.
    fn gap(&self, theta: f64) -> Result<f64> {
        match phi(self.env, theta, self.rework, self.lambda, self.capacity) {
            Ok(v) => Ok(theta - v),
            Err(Error::Unstable { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn equilibrium(&self, theta: f64, root_index: usize) -> Result<Equilibrium> {
        let p = policy_profile(self.env, theta, self.rework)?;
        let phi = phi_from_moments(self.env.c_w, self.lambda, self.capacity, &p.moments)?;
        let rho = self.lambda * p.moments.mean / self.capacity;
        let wq = self.lambda * p.moments.m2 / (2.0 * self.capacity * (self.capacity - self.lambda * p.moments.mean));
        Ok(Equilibrium {
            theta_star: theta,
            pi_star: p.pi_star,
            threshold_signal: p.threshold_signal,
            tau_a: p.moments.mean,
            q_a: p.moments.m2,
            c2_a: p.moments.c2(),
            rho,
            wq,
            mean_review: p.mean_review,
            escape_probability: p.escape_probability,
            irreducible_escape: p.irreducible_escape,
            residual: (theta - phi).abs(),
            root_index,
        })
    }

    fn bisect_root(&self, mut lo: f64, mut hi: f64, mut g_lo: f64) -> Result<f64> {
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.gap(mid)?;
            if g == 0.0 {
                return Ok(mid);
            }
            if (g < 0.0) == (g_lo < 0.0) {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
            }
            let width_ok = hi - lo <= BISECTION_TOLERANCE * hi.max(1.0);
            if width_ok && g.is_finite() && g.abs() < RESIDUAL_TOLERANCE * mid.max(1.0) {
                return Ok(mid);
            }
        }
        // Prefer the feasible endpoint with the smaller residual.
        let g_hi = self.gap(hi)?;
        Ok(if g_lo.is_finite() && g_lo.abs() <= g_hi.abs() { lo } else { hi })
    }
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

/// Finds every fixed point of `Phi` reachable by a sign-change scan and
/// reports the smallest as primary.
pub fn solve_equilibrium(env: &SignalEnvironment, rework: &ReworkModel, lambda: f64, capacity: f64) -> Result<EquilibriumSolution> {
    env.validate()?;
    ensure_positive("lambda", lambda)?;
    ensure_positive("capacity", capacity)?;
    if env.c_w == 0.0 {
        return Err(Error::Degenerate {
            reason: "c_w = 0 makes Phi identically zero; theta* = 0 with unbounded review".into(),
        });
    }
    let theta_hi = env.theta_max();
    if theta_hi <= 0.0 {
        return Err(Error::Degenerate {
            reason: "risk map is identically zero; no draft ever carries an error".into(),
        });
    }
    let problem = FixedPointProblem {
        env,
        rework,
        lambda,
        capacity,
    };

    // Locate the low end of the stable region.
    let theta_floor = theta_hi * 1e-12;
    let theta_lo = if problem.feasible(theta_floor)? {
        theta_floor
    } else {
        let coarse = geometric_grid(theta_floor, theta_hi, SCAN_POINTS);
        let mut first = None;
        for (i, &t) in coarse.iter().enumerate() {
            if problem.feasible(t)? {
                first = Some(i);
                break;
            }
        }
        let Some(i) = first else {
            return Err(Error::infeasible(format!(
                "no review policy keeps lambda * tau_a(theta) below capacity on [{theta_floor:e}, {theta_hi}]"
            )));
        };
        let (mut lo, mut hi) = (coarse[i - 1], coarse[i]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if problem.feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (hi * (1.0 + 1e-6)).min(theta_hi)
    };

    let mut roots = Vec::new();
    let mut scanned = Vec::with_capacity(SCAN_POINTS);
    if theta_lo < theta_hi {
        let grid = geometric_grid(theta_lo, theta_hi, SCAN_POINTS);
        let gaps = grid.iter().map(|&t| problem.gap(t)).collect::<Result<Vec<_>>>()?;
        scanned.extend(grid.iter().copied().zip(gaps.iter().copied()));
        for i in 0..grid.len() {
            if gaps[i] == 0.0 {
                roots.push(grid[i]);
                continue;
            }
            if i + 1 < grid.len() && gaps[i + 1] != 0.0 && (gaps[i] < 0.0) != (gaps[i + 1] < 0.0) {
                roots.push(problem.bisect_root(grid[i], grid[i + 1], gaps[i])?);
            }
        }
    }
    // Past theta_hi nobody is reviewed and Phi is constant.
    let g_hi = problem.gap(theta_hi)?;
    if g_hi < 0.0 {
        let above = theta_hi - g_hi;
        if above.is_finite() {
            roots.push(above);
        }
    }
    if scanned.is_empty() {
        scanned.push((theta_hi, g_hi));
    }
    if roots.is_empty() {
        return Err(Error::NoRoot { scanned });
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.max(1.0));

    let roots = roots
        .iter()
        .enumerate()
        .map(|(i, &t)| problem.equilibrium(t, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumSolution {
        primary: roots[0],
        roots,
        theta_lo,
        theta_hi,
    })
}
