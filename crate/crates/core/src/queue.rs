//! Single-server mean waiting times.
//!
//! Service requirements arrive in attention-hours; the server supplies
//! `capacity` attention-hours per calendar hour, so a task occupies it for
//! `S = T / capacity` calendar hours. Every time in [`WaitResult`] is in
//! calendar hours.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::service::RouteMoments;

/// Utilizations at or above `1 - STABILITY_MARGIN` are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueInputs {
    pub lambda: f64,
    pub capacity: f64,
    pub service: RouteMoments,
    /// Squared CV of interarrival times; 1 for Poisson arrivals.
    pub c2_a: f64,
}

impl QueueInputs {
    pub fn new(lambda: f64, capacity: f64, service: RouteMoments) -> Result<Self> {
        Self::with_arrival_c2(lambda, capacity, service, 1.0)
    }

    pub fn with_arrival_c2(lambda: f64, capacity: f64, service: RouteMoments, c2_a: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("capacity", capacity)?;
        ensure_non_negative("c2_a", c2_a)?;
        Ok(Self {
            lambda,
            capacity,
            service,
            c2_a,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitMethod {
    /// Exact for Poisson arrivals.
    PollaczekKhinchine,
    /// Heavy-traffic approximation for general arrivals.
    Kingman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitResult {
    pub rho: f64,
    pub wq: f64,
    pub total_sojourn: f64,
    pub method: WaitMethod,
    pub approximate: bool,
}

pub fn utilization(q: &QueueInputs) -> f64 {
    q.lambda * q.service.mean / q.capacity
}

pub fn is_stable(rho: f64) -> bool {
    rho < 1.0 - STABILITY_MARGIN
}

fn check_stable(q: &QueueInputs) -> Result<f64> {
    let rho = utilization(q);
    if is_stable(rho) {
        Ok(rho)
    } else {
        Err(Error::Unstable { rho, route: None })
    }
}

/// Pollaczek–Khinchine mean wait `lambda m2 / (2 C (C - lambda mean))`.
pub fn wq_pk(q: &QueueInputs) -> Result<WaitResult> {
    let rho = check_stable(q)?;
    let c = q.capacity;
    let wq = q.lambda * q.service.m2 / (2.0 * c * (c - q.lambda * q.service.mean));
    Ok(WaitResult {
        rho,
        wq,
        total_sojourn: wq + q.service.mean / c,
        method: WaitMethod::PollaczekKhinchine,
        approximate: false,
    })
}

/// Factorized form `rho/(1-rho) * (c2_a + c2_s)/2 * mean/C`.
pub(crate) fn factorized_wait(rho: f64, c2_a: f64, service: &RouteMoments, capacity: f64) -> f64 {
    if service.mean == 0.0 {
        return 0.0;
    }
    rho / (1.0 - rho) * (c2_a + service.c2()) / 2.0 * service.mean / capacity
}

/// Kingman's G/G/1 approximation. With `c2_a == 1` this returns the
/// Pollaczek–Khinchine result unchanged.
pub fn wq_kingman(q: &QueueInputs) -> Result<WaitResult> {
    if q.c2_a == 1.0 {
        return wq_pk(q).map(|w| WaitResult {
            method: WaitMethod::Kingman,
            approximate: true,
            ..w
        });
    }
    let rho = check_stable(q)?;
    let wq = factorized_wait(rho, q.c2_a, &q.service, q.capacity);
    Ok(WaitResult {
        rho,
        wq,
        total_sojourn: wq + q.service.mean / q.capacity,
        method: WaitMethod::Kingman,
        approximate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn inputs(lambda: f64, mean: f64, m2: f64) -> QueueInputs {
        QueueInputs::new(lambda, 1.0, RouteMoments::new(mean, m2).unwrap()).unwrap()
    }

    #[test]
    fn utilization_examples() {
        assert_relative_eq!(utilization(&inputs(0.75, 0.671, 0.995)), 0.50325, max_relative = 1e-12);
        assert_eq!(utilization(&inputs(1.0, 1.0, 1.0)), 1.0);
        assert_relative_eq!(utilization(&inputs(1.2, 1.0, 1.0)), 1.2);
    }

    #[test]
    fn pk_examples() {
        let w = wq_pk(&inputs(0.75, 0.671, 0.995)).unwrap();
        assert!((w.wq - 0.751).abs() < 0.0005, "{}", w.wq);
        // M/M/1: rho/(mu - lambda) = 0.5/0.5
        assert_relative_eq!(wq_pk(&inputs(0.5, 1.0, 2.0)).unwrap().wq, 1.0, max_relative = 1e-15);
        let w = wq_pk(&inputs(0.5, 0.85, 1.625625)).unwrap();
        assert_relative_eq!(w.wq, 0.706_793_478_260_869_6, max_relative = 1e-12);
        assert_relative_eq!(w.total_sojourn, w.wq + 0.85);
        assert!(!w.approximate);
    }

    #[test]
    fn instability_carries_rho() {
        match wq_pk(&inputs(1.2, 1.0, 1.0)) {
            Err(Error::Unstable { rho, .. }) => assert_relative_eq!(rho, 1.2),
            other => panic!("expected instability, got {other:?}"),
        }
        assert!(wq_pk(&inputs(1.0, 1.0, 1.0)).is_err());
        assert!(wq_kingman(&inputs(1.0 - 1e-10, 1.0, 1.0)).is_err());
    }

    #[test]
    fn kingman_examples() {
        let q = inputs(0.5, 0.85, 1.625625);
        let pk = wq_pk(&q).unwrap();
        let k = wq_kingman(&q).unwrap();
        assert_eq!(pk.wq.to_bits(), k.wq.to_bits());
        assert!(k.approximate);

        let det = QueueInputs::with_arrival_c2(0.9, 1.0, RouteMoments::new(1.0, 1.0).unwrap(), 0.0).unwrap();
        assert_eq!(wq_kingman(&det).unwrap().wq, 0.0);

        let bursty = QueueInputs { c2_a: 2.0, ..q };
        // (0.425/0.575) * (3.25/2) * 0.85
        assert_relative_eq!(wq_kingman(&bursty).unwrap().wq, 1.020_923_913_043_478, max_relative = 1e-12);
    }

    #[test]
    fn divergence_near_boundary() {
        let mut prev = 0.0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let w = wq_pk(&inputs(1.0 - eps, 1.0, 1.5)).unwrap().wq;
            assert!(w > prev);
            prev = w;
        }
        assert!(prev > 1e5);
    }

    proptest! {
        #[test]
        fn kingman_formula_reduces_to_pk(
            rho in 0.01f64..0.99, mean in 0.05f64..5.0, c2 in 0.0f64..5.0, cap in 0.1f64..10.0,
        ) {
            let service = RouteMoments::from_mean_c2(mean, c2).unwrap();
            let lambda = rho * cap / mean;
            let q = QueueInputs::new(lambda, cap, service).unwrap();
            let pk = wq_pk(&q).unwrap();
            let raw = factorized_wait(utilization(&q), 1.0, &service, cap);
            prop_assert!((pk.wq - raw).abs() <= 1e-12 * pk.wq.max(f64::MIN_POSITIVE));
            prop_assert_eq!(wq_kingman(&q).unwrap().wq.to_bits(), pk.wq.to_bits());
        }

        #[test]
        fn time_rescaling_scales_wait(
            rho in 0.01f64..0.95, mean in 0.05f64..5.0, c2 in 0.0f64..5.0, scale in 0.1f64..10.0,
        ) {
            // Measuring attention in units `scale` times smaller multiplies
            // requirements by `scale`; capacity in attention-units per
            // calendar hour scales alike and calendar waits are unchanged.
            // Rescaling calendar time instead divides rates and scales waits.
            let base = QueueInputs::new(rho / mean, 1.0, RouteMoments::from_mean_c2(mean, c2).unwrap()).unwrap();
            let w0 = wq_pk(&base).unwrap().wq;
            let slowed = QueueInputs::new(base.lambda / scale, base.capacity / scale, base.service).unwrap();
            let w1 = wq_pk(&slowed).unwrap().wq;
            prop_assert!((w1 - scale * w0).abs() <= 1e-10 * (scale * w0).max(1e-300));
            let rescaled = QueueInputs::new(
                base.lambda,
                base.capacity * scale,
                RouteMoments::new(mean * scale, base.service.m2 * scale * scale).unwrap(),
            ).unwrap();
            let w2 = wq_pk(&rescaled).unwrap().wq;
            prop_assert!((w2 - w0).abs() <= 1e-10 * w0.max(1e-300));
        }
    }
}
