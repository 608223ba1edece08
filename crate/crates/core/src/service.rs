//! Service-time primitives for the manual and AI-assisted routes.
//!
//! All quantities are in attention-hours: the amount of human attention a task
//! consumes. Conversion to calendar time (division by capacity) happens in
//! [`crate::queue`].
//!
//! The manual route is a positive random variable `T_H` with mean `tau_h` and
//! squared coefficient of variation `c2_h`. An AI-routed task costs
//! `T_A = r + M * R`: a fixed review `r`, plus a rework draw `R` when the error
//! escapes review (`M ~ Bernoulli(p(r))`).

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, ensure_unit, Error, Result};

/// Relative slack allowed when checking `m2 >= mean^2`.
const JENSEN_TOLERANCE: f64 = 1e-12;

/// Manual handling time: mean and squared coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualRoute {
    #[serde(alias = "tau_H")]
    pub tau_h: f64,
    #[serde(alias = "c2_H")]
    pub c2_h: f64,
}

impl ManualRoute {
    pub fn new(tau_h: f64, c2_h: f64) -> Result<Self> {
        ensure_positive("tau_h", tau_h)?;
        ensure_non_negative("c2_h", c2_h)?;
        Ok(Self { tau_h, c2_h })
    }

    /// Second raw moment `tau_h^2 (1 + c2_h)`.
    pub fn q_h(&self) -> f64 {
        self.tau_h * self.tau_h * (1.0 + self.c2_h)
    }

    pub fn moments(&self) -> RouteMoments {
        RouteMoments {
            mean: self.tau_h,
            m2: self.q_h(),
        }
    }
}

/// Residual miss probability after review:
/// `p(r) = p_inf + (p0 - p_inf) exp(-kappa r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorCurve {
    pub p0: f64,
    #[serde(default)]
    pub p_inf: f64,
    pub kappa: f64,
}

impl ErrorCurve {
    pub fn new(p0: f64, p_inf: f64, kappa: f64) -> Result<Self> {
        ensure_unit("p0", p0)?;
        ensure_unit("p_inf", p_inf)?;
        ensure_positive("kappa", kappa)?;
        if p_inf > p0 {
            return Err(Error::domain(
                "p_inf",
                format!("must not exceed p0 ({p_inf} > {p0})"),
            ));
        }
        Ok(Self { p0, p_inf, kappa })
    }
}

/// Rework burden of an escaped error, described by its first two raw moments.
///
/// Sampling uses a Gamma law matched to `(mu_r, mu_r2)`; a zero variance
/// degenerates to the point mass at `mu_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReworkModel {
    #[serde(alias = "mu_R")]
    pub mu_r: f64,
    #[serde(alias = "mu_R2")]
    pub mu_r2: f64,
}

impl ReworkModel {
    pub fn new(mu_r: f64, mu_r2: f64) -> Result<Self> {
        ensure_positive("mu_r", mu_r)?;
        ensure_positive("mu_r2", mu_r2)?;
        if mu_r2 < mu_r * mu_r * (1.0 - JENSEN_TOLERANCE) {
            return Err(Error::domain(
                "mu_r2",
                format!("must be >= mu_r^2 = {}, got {mu_r2}", mu_r * mu_r),
            ));
        }
        Ok(Self { mu_r, mu_r2 })
    }

    pub fn variance(&self) -> f64 {
        (self.mu_r2 - self.mu_r * self.mu_r).max(0.0)
    }

    /// Gamma shape `k` solving `mu_r2 = mu_r^2 (1 + 1/k)`; infinite for a
    /// deterministic burden.
    pub fn gamma_shape(&self) -> f64 {
        let var = self.variance();
        if var == 0.0 {
            f64::INFINITY
        } else {
            self.mu_r * self.mu_r / var
        }
    }
}

/// First two raw moments of a service requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteMoments {
    pub mean: f64,
    pub m2: f64,
}

impl RouteMoments {
    /// Validates `mean >= 0` and Jensen's inequality `m2 >= mean^2`.
    ///
    /// A zero mean is admitted: it is the exact value of an AI route with no
    /// review and no errors.
    pub fn new(mean: f64, m2: f64) -> Result<Self> {
        ensure_non_negative("mean", mean)?;
        ensure_non_negative("m2", m2)?;
        if m2 < mean * mean * (1.0 - JENSEN_TOLERANCE) {
            return Err(Error::domain(
                "m2",
                format!("violates m2 >= mean^2 ({m2} < {})", mean * mean),
            ));
        }
        Ok(Self { mean, m2 })
    }

    pub fn from_mean_c2(mean: f64, c2: f64) -> Result<Self> {
        ensure_non_negative("c2", c2)?;
        Self::new(mean, mean * mean * (1.0 + c2))
    }

    /// Squared coefficient of variation `m2 / mean^2 - 1`; zero for a zero
    /// mean.
    pub fn c2(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            (self.m2 / (self.mean * self.mean) - 1.0).max(0.0)
        }
    }

    pub fn variance(&self) -> f64 {
        (self.m2 - self.mean * self.mean).max(0.0)
    }
}

pub fn residual_error(curve: &ErrorCurve, r: f64) -> Result<f64> {
    ensure_non_negative("r", r)?;
    Ok(curve.p_inf + (curve.p0 - curve.p_inf) * (-curve.kappa * r).exp())
}

/// Moments of `T_A = r + M R` for a fixed review effort `r`.
pub fn ai_route_moments(curve: &ErrorCurve, rework: &ReworkModel, r: f64) -> Result<RouteMoments> {
    let p = residual_error(curve, r)?;
    let mean = r + p * rework.mu_r;
    let m2 = r * r + 2.0 * r * p * rework.mu_r + p * rework.mu_r2;
    Ok(RouteMoments { mean, m2 })
}

/// Moments of the unconditional service requirement when a fraction `x` of
/// tasks is routed to AI.
pub fn mixed_moments(manual: &ManualRoute, ai: &RouteMoments, x: f64) -> Result<RouteMoments> {
    ensure_unit("x", x)?;
    Ok(RouteMoments {
        mean: (1.0 - x) * manual.tau_h + x * ai.mean,
        m2: (1.0 - x) * manual.q_h() + x * ai.m2,
    })
}

/// Positive sampler matched to a mean and squared CV.
///
/// Gamma with shape `1 / c2` and scale `mean * c2`; `c2 == 0` is the point
/// mass at `mean`.
#[derive(Debug, Clone, Copy)]
pub enum MomentMatchedGamma {
    Point(f64),
    Gamma(Gamma<f64>),
}

impl MomentMatchedGamma {
    pub fn from_mean_c2(mean: f64, c2: f64) -> Result<Self> {
        ensure_positive("mean", mean)?;
        ensure_non_negative("c2", c2)?;
        if c2 == 0.0 {
            return Ok(Self::Point(mean));
        }
        let gamma = Gamma::new(1.0 / c2, mean * c2)
            .map_err(|e| Error::domain("c2", format!("gamma parameters rejected: {e}")))?;
        Ok(Self::Gamma(gamma))
    }

    pub fn manual(route: &ManualRoute) -> Result<Self> {
        Self::from_mean_c2(route.tau_h, route.c2_h)
    }

    pub fn rework(rework: &ReworkModel) -> Result<Self> {
        let var = rework.variance();
        Self::from_mean_c2(rework.mu_r, var / (rework.mu_r * rework.mu_r))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Point(v) => *v,
            Self::Gamma(g) => g.sample(rng),
        }
    }
}

/// Draw of an AI-routed task: total attention and whether an error escaped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiDraw {
    pub attention: f64,
    pub escaped: bool,
}

/// Reusable sampler for `T_A = r + M R` at a fixed review effort.
#[derive(Debug, Clone, Copy)]
pub struct AiRouteSampler {
    review: f64,
    escape_probability: f64,
    rework: MomentMatchedGamma,
}

impl AiRouteSampler {
    pub fn new(curve: &ErrorCurve, rework: &ReworkModel, r: f64) -> Result<Self> {
        Ok(Self {
            review: r,
            escape_probability: residual_error(curve, r)?,
            rework: MomentMatchedGamma::rework(rework)?,
        })
    }

    pub fn escape_probability(&self) -> f64 {
        self.escape_probability
    }

    pub fn review(&self) -> f64 {
        self.review
    }

    /// Rework burden if the error escaped, `None` otherwise. The escape flag
    /// comes from `escape_rng` and the burden from `rework_rng`, so the two
    /// sources stay decoupled.
    pub fn sample_rework<E: Rng + ?Sized, W: Rng + ?Sized>(&self, escape_rng: &mut E, rework_rng: &mut W) -> Option<f64> {
        let escaped = escape_rng.random::<f64>() < self.escape_probability;
        escaped.then(|| self.rework.sample(rework_rng))
    }

    pub fn sample_split<E: Rng + ?Sized, W: Rng + ?Sized>(&self, escape_rng: &mut E, rework_rng: &mut W) -> AiDraw {
        match self.sample_rework(escape_rng, rework_rng) {
            Some(extra) => AiDraw {
                attention: self.review + extra,
                escaped: true,
            },
            None => AiDraw {
                attention: self.review,
                escaped: false,
            },
        }
    }
}

/// One manual handling time. `c2_h == 0` returns exactly `tau_h`.
pub fn sample_manual<R: Rng + ?Sized>(route: &ManualRoute, rng: &mut R) -> Result<f64> {
    Ok(MomentMatchedGamma::manual(route)?.sample(rng))
}

/// One AI-routed handling time drawn from a single stream.
pub fn sample_ai<R: Rng + ?Sized>(
    curve: &ErrorCurve,
    rework: &ReworkModel,
    r: f64,
    rng: &mut R,
) -> Result<AiDraw> {
    let sampler = AiRouteSampler::new(curve, rework, r)?;
    let escaped = rng.random::<f64>() < sampler.escape_probability;
    let attention = if escaped {
        r + sampler.rework.sample(rng)
    } else {
        r
    };
    Ok(AiDraw { attention, escaped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_rework() -> ReworkModel {
        ReworkModel::new(7.0 / 3.0, 6.8375).unwrap()
    }

    #[test]
    fn residual_error_values() {
        let curve = ErrorCurve::new(0.3, 0.05, 2.0).unwrap();
        assert_eq!(residual_error(&curve, 0.0).unwrap(), 0.3);
        assert_relative_eq!(residual_error(&curve, 50.0).unwrap(), 0.05, epsilon = 1e-15);
        // 0.05 + 0.25 e^{-1}
        assert_relative_eq!(
            residual_error(&curve, 0.5).unwrap(),
            0.141_969_860_292_860_6,
            max_relative = 1e-14
        );
        assert!(matches!(
            residual_error(&curve, -0.1),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn error_curve_rejects_inverted_probabilities() {
        assert!(ErrorCurve::new(0.1, 0.2, 1.0).is_err());
        assert!(ErrorCurve::new(0.1, 0.0, 0.0).is_err());
        assert!(ErrorCurve::new(1.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn reference_route_moments() {
        let curve = ErrorCurve::new(0.15, 0.15, 1.0).unwrap();
        let m = ai_route_moments(&curve, &reference_rework(), 0.5).unwrap();
        assert_relative_eq!(m.mean, 0.85, max_relative = 1e-12);
        assert_relative_eq!(m.m2, 1.625625, max_relative = 1e-12);
        assert_relative_eq!(m.c2(), 1.25, max_relative = 1e-12);
        assert_relative_eq!(reference_rework().gamma_shape(), 3.908_275, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_route_moments() {
        let rework = ReworkModel::new(1.5, 4.0).unwrap();
        let none = ErrorCurve::new(0.0, 0.0, 1.0).unwrap();
        let m = ai_route_moments(&none, &rework, 0.0).unwrap();
        assert_eq!((m.mean, m.m2), (0.0, 0.0));
        assert_eq!(m.c2(), 0.0);

        let always = ErrorCurve::new(1.0, 1.0, 1.0).unwrap();
        let m = ai_route_moments(&always, &rework, 0.0).unwrap();
        assert_eq!((m.mean, m.m2), (1.5, 4.0));
    }

    #[test]
    fn mixed_endpoints_and_midpoint() {
        let manual = ManualRoute::new(1.0, 0.10).unwrap();
        let ai = RouteMoments::new(0.85, 1.625625).unwrap();
        assert_eq!(mixed_moments(&manual, &ai, 0.0).unwrap(), manual.moments());
        assert_eq!(mixed_moments(&manual, &ai, 1.0).unwrap(), ai);
        let mid = mixed_moments(&manual, &ai, 0.5).unwrap();
        assert_relative_eq!(mid.mean, 0.925, max_relative = 1e-15);
        assert_relative_eq!(mid.m2, 1.362_812_5, max_relative = 1e-15);
        assert!(mixed_moments(&manual, &ai, 1.5).is_err());
        assert!(mixed_moments(&manual, &ai, -0.01).is_err());
    }

    #[test]
    fn route_moments_enforce_jensen() {
        assert!(RouteMoments::new(1.0, 0.99).is_err());
        assert!(RouteMoments::new(-1.0, 2.0).is_err());
        assert!(RouteMoments::new(1.0, 1.0).is_ok());
        assert!(ReworkModel::new(2.0, 3.0).is_err());
        assert!(ReworkModel::new(2.0, 4.0).is_ok());
    }

    #[test]
    fn deterministic_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let manual = ManualRoute::new(1.0, 0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_manual(&manual, &mut rng).unwrap(), 1.0);
        }
        let never = ErrorCurve::new(0.0, 0.0, 1.0).unwrap();
        for _ in 0..100 {
            let d = sample_ai(&never, &reference_rework(), 0.5, &mut rng).unwrap();
            assert_eq!(d, AiDraw { attention: 0.5, escaped: false });
        }
        let point = ReworkModel::new(2.0, 4.0).unwrap();
        let always = ErrorCurve::new(1.0, 1.0, 1.0).unwrap();
        let d = sample_ai(&always, &point, 0.25, &mut rng).unwrap();
        assert_eq!(d, AiDraw { attention: 2.25, escaped: true });
    }

    fn sample_stats(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn sample_moments_match_analytic() {
        const N: usize = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let manual = ManualRoute::new(1.0, 0.10).unwrap();
        let sampler = MomentMatchedGamma::manual(&manual).unwrap();
        let xs: Vec<f64> = (0..N).map(|_| sampler.sample(&mut rng)).collect();
        let (mean, sd) = sample_stats(&xs);
        assert!((mean - 1.0).abs() < 4.0 * sd / (N as f64).sqrt());

        let curve = ErrorCurve::new(0.15, 0.15, 1.0).unwrap();
        let ai = AiRouteSampler::new(&curve, &reference_rework(), 0.5).unwrap();
        let mut esc = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..N)
            .map(|_| ai.sample_split(&mut esc, &mut rng).attention)
            .collect();
        let (mean, sd) = sample_stats(&xs);
        assert!((mean - 0.85).abs() < 4.0 * sd / (N as f64).sqrt());
        assert!((mean - 0.85).abs() / 0.85 < 0.01);
    }

    proptest! {
        #[test]
        fn residual_error_is_non_increasing(
            p_inf in 0.0f64..0.5, gap in 0.0f64..0.5, kappa in 0.01f64..10.0,
            r in 0.0f64..5.0, dr in 0.0f64..5.0,
        ) {
            let curve = ErrorCurve::new(p_inf + gap, p_inf, kappa).unwrap();
            let a = residual_error(&curve, r).unwrap();
            let b = residual_error(&curve, r + dr).unwrap();
            prop_assert!(b <= a);
            prop_assert!(a >= p_inf && a <= p_inf + gap + 1e-15);
        }

        #[test]
        fn constructed_moments_satisfy_jensen(
            p_inf in 0.0f64..0.5, gap in 0.0f64..0.5, kappa in 0.01f64..10.0,
            r in 0.0f64..5.0, mu in 0.01f64..5.0, extra in 0.0f64..10.0,
            tau in 0.01f64..5.0, c2 in 0.0f64..4.0, x in 0.0f64..=1.0,
        ) {
            let curve = ErrorCurve::new(p_inf + gap, p_inf, kappa).unwrap();
            let rework = ReworkModel::new(mu, mu * mu + extra).unwrap();
            let ai = ai_route_moments(&curve, &rework, r).unwrap();
            prop_assert!(ai.m2 >= ai.mean * ai.mean * (1.0 - 1e-12));
            let manual = ManualRoute::new(tau, c2).unwrap();
            let mix = mixed_moments(&manual, &ai, x).unwrap();
            prop_assert!(mix.m2 >= mix.mean * mix.mean * (1.0 - 1e-12));
        }

        #[test]
        fn mixed_moments_are_affine(
            x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0,
            tau in 0.1f64..3.0, c2 in 0.0f64..2.0, mean in 0.1f64..3.0, c2a in 0.0f64..3.0,
        ) {
            let manual = ManualRoute::new(tau, c2).unwrap();
            let ai = RouteMoments::from_mean_c2(mean, c2a).unwrap();
            let a = mixed_moments(&manual, &ai, x1).unwrap();
            let b = mixed_moments(&manual, &ai, x2).unwrap();
            let mid = mixed_moments(&manual, &ai, 0.5 * (x1 + x2)).unwrap();
            prop_assert!((mid.mean - 0.5 * (a.mean + b.mean)).abs() <= 1e-12 * mid.mean.max(1.0));
            prop_assert!((mid.m2 - 0.5 * (a.m2 + b.m2)).abs() <= 1e-12 * mid.m2.max(1.0));
        }
    }
}
