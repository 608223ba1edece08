//! Discrete-event simulation of the single-server FIFO queue.
//!
//! Tasks arrive by a renewal process, are routed manual/AI with probability
//! `1 - x` / `x`, and occupy the server for `T / capacity` calendar hours.
//! In [`ReworkMode::Folded`] rework is part of the original service interval,
//! matching the analytic moments. In [`ReworkMode::Feedback`] an escaped
//! error instead rejoins the tail of the queue as a separate job; waits are
//! then measured on the first pass only.
//!
//! Output analysis uses batch means over the post-warm-up customers.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{ensure_positive, ensure_unit, Error, Result};
use crate::queue::is_stable;
use crate::service::{mixed_moments, AiRouteSampler, ErrorCurve, ManualRoute, MomentMatchedGamma, ReworkModel, RouteMoments};
use crate::verification::{policy_profile, review_effort_for_risk, SignalEnvironment};

/// How the AI route chooses its review effort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AiRoute {
    /// Every AI draft gets the same review `review` (attention-hours).
    FixedReview {
        curve: ErrorCurve,
        rework: ReworkModel,
        review: f64,
    },
    /// Review follows the signal-dependent policy at congestion cost `theta`.
    Policy {
        env: SignalEnvironment,
        rework: ReworkModel,
        theta: f64,
    },
}

impl AiRoute {
    pub fn moments(&self) -> Result<RouteMoments> {
        match self {
            AiRoute::FixedReview { curve, rework, review } => crate::service::ai_route_moments(curve, rework, *review),
            AiRoute::Policy { env, rework, theta } => crate::verification::policy_route_moments(env, *theta, rework),
        }
    }

    /// Probability that an AI-routed draft's error escapes review.
    pub fn escape_probability(&self) -> Result<f64> {
        match self {
            AiRoute::FixedReview { curve, review, .. } => crate::service::residual_error(curve, *review),
            AiRoute::Policy { env, rework, theta } => Ok(policy_profile(env, *theta, rework)?.escape_probability),
        }
    }

    pub fn rework(&self) -> &ReworkModel {
        match self {
            AiRoute::FixedReview { rework, .. } | AiRoute::Policy { rework, .. } => rework,
        }
    }
}

/// The queueing scenario being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub lambda: f64,
    pub capacity: f64,
    /// Fraction of tasks routed to AI.
    pub x: f64,
    pub manual: ManualRoute,
    pub ai: AiRoute,
}

impl Workload {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lambda", self.lambda)?;
        ensure_positive("capacity", self.capacity)?;
        ensure_unit("x", self.x)
    }

    pub fn service_moments(&self) -> Result<RouteMoments> {
        mixed_moments(&self.manual, &self.ai.moments()?, self.x)
    }

    pub fn utilization(&self) -> Result<f64> {
        Ok(self.lambda * self.service_moments()?.mean / self.capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson,
    /// Gamma interarrivals with mean `1 / lambda` and squared CV `c2_a`.
    Renewal { c2_a: f64 },
}

impl ArrivalProcess {
    pub fn from_c2(c2_a: f64) -> Self {
        if c2_a == 1.0 {
            ArrivalProcess::Poisson
        } else {
            ArrivalProcess::Renewal { c2_a }
        }
    }

    pub fn c2_a(&self) -> f64 {
        match self {
            ArrivalProcess::Poisson => 1.0,
            ArrivalProcess::Renewal { c2_a } => *c2_a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReworkMode {
    Folded,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub workload: Workload,
    pub arrivals: ArrivalProcess,
    pub n_arrivals: usize,
    pub warmup_fraction: f64,
    pub n_batches: usize,
    pub seed: u64,
    pub rework_mode: ReworkMode,
}

impl SimConfig {
    pub const DEFAULT_ARRIVALS: usize = 1_000_000;
    pub const DEFAULT_WARMUP: f64 = 0.2;
    pub const DEFAULT_BATCHES: usize = 32;

    pub fn new(workload: Workload, seed: u64) -> Self {
        Self {
            workload,
            arrivals: ArrivalProcess::Poisson,
            n_arrivals: Self::DEFAULT_ARRIVALS,
            warmup_fraction: Self::DEFAULT_WARMUP,
            n_batches: Self::DEFAULT_BATCHES,
            seed,
            rework_mode: ReworkMode::Folded,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        if self.n_batches < 2 {
            return Err(Error::domain("n_batches", "at least 2 batches are needed for a confidence interval"));
        }
        if self.n_arrivals < self.n_batches * 100 {
            return Err(Error::domain(
                "n_arrivals",
                format!("must be >= 100 * n_batches = {}, got {}", self.n_batches * 100, self.n_arrivals),
            ));
        }
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return Err(Error::domain("warmup_fraction", format!("must lie in [0, 0.5], got {}", self.warmup_fraction)));
        }
        if let ArrivalProcess::Renewal { c2_a } = self.arrivals {
            crate::error::ensure_non_negative("c2_a", c2_a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    /// Mean queue wait (calendar hours), first pass in feedback mode.
    pub wq_mean: f64,
    pub wq_half_width_95: f64,
    pub wq_half_width_99: f64,
    pub batch_means: Vec<f64>,
    /// Busy time over the arrival horizon.
    pub rho_hat: f64,
    pub rho_se: f64,
    /// Analytic utilization of the configured workload.
    pub rho_analytic: f64,
    pub unstable: bool,
    /// Per-task attention requirement, rework included.
    pub service_mean: f64,
    pub service_m2: f64,
    pub service_c2: f64,
    pub ai_tasks: u64,
    pub escaped: u64,
    pub escape_rate: f64,
    pub escape_se: f64,
    pub quantiles: WaitQuantiles,
    /// Arrival to final departure across passes; feedback mode only.
    pub sojourn_mean: Option<f64>,
    pub horizon: f64,
    pub n_arrivals: usize,
    pub replications: usize,
    pub seed: u64,
}

const STREAM_INTERARRIVAL: u64 = 0;
const STREAM_ROUTE: u64 = 1;
const STREAM_MANUAL: u64 = 2;
const STREAM_ESCAPE: u64 = 3;
const STREAM_REWORK: u64 = 4;
const STREAM_SIGNAL: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

enum Interarrival {
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Fixed(f64),
}

impl Interarrival {
    fn new(process: ArrivalProcess, lambda: f64) -> Result<Self> {
        let bad = |e: String| Error::domain("arrivals", e);
        Ok(match process {
            ArrivalProcess::Poisson => Interarrival::Exp(Exp::new(lambda).map_err(|e| bad(e.to_string()))?),
            ArrivalProcess::Renewal { c2_a } if c2_a == 0.0 => Interarrival::Fixed(1.0 / lambda),
            ArrivalProcess::Renewal { c2_a } => {
                Interarrival::Gamma(Gamma::new(1.0 / c2_a, c2_a / lambda).map_err(|e| bad(e.to_string()))?)
            }
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Interarrival::Exp(d) => d.sample(rng),
            Interarrival::Gamma(d) => d.sample(rng),
            Interarrival::Fixed(v) => *v,
        }
    }
}

enum AiSampler {
    Fixed(AiRouteSampler),
    Policy {
        env: SignalEnvironment,
        theta: f64,
        signal: Beta<f64>,
        rework: MomentMatchedGamma,
    },
}

/// One sampled task: first-pass attention, and the rework that follows
/// when an error escaped.
struct TaskDraw {
    first: f64,
    rework: Option<f64>,
    ai: bool,
}

struct Streams {
    interarrival: ChaCha8Rng,
    route: ChaCha8Rng,
    manual: ChaCha8Rng,
    escape: ChaCha8Rng,
    rework: ChaCha8Rng,
    signal: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            interarrival: stream(seed, STREAM_INTERARRIVAL),
            route: stream(seed, STREAM_ROUTE),
            manual: stream(seed, STREAM_MANUAL),
            escape: stream(seed, STREAM_ESCAPE),
            rework: stream(seed, STREAM_REWORK),
            signal: stream(seed, STREAM_SIGNAL),
        }
    }
}

struct TaskSampler {
    x: f64,
    manual: MomentMatchedGamma,
    ai: AiSampler,
}

impl TaskSampler {
    fn new(workload: &Workload) -> Result<Self> {
        let ai = match &workload.ai {
            AiRoute::FixedReview { curve, rework, review } => AiSampler::Fixed(AiRouteSampler::new(curve, rework, *review)?),
            AiRoute::Policy { env, rework, theta } => AiSampler::Policy {
                env: *env,
                theta: *theta,
                signal: Beta::new(env.density.alpha, env.density.beta)
                    .map_err(|e| Error::domain("density", e.to_string()))?,
                rework: MomentMatchedGamma::rework(rework)?,
            },
        };
        Ok(Self {
            x: workload.x,
            manual: MomentMatchedGamma::manual(&workload.manual)?,
            ai,
        })
    }

    fn draw(&self, s: &mut Streams) -> Result<TaskDraw> {
        if s.route.random::<f64>() < self.x {
            self.draw_ai(s)
        } else {
            Ok(self.draw_manual(s))
        }
    }

    fn draw_manual(&self, s: &mut Streams) -> TaskDraw {
        TaskDraw {
            first: self.manual.sample(&mut s.manual),
            rework: None,
            ai: false,
        }
    }

    fn draw_ai(&self, s: &mut Streams) -> Result<TaskDraw> {
        match &self.ai {
            AiSampler::Fixed(sampler) => Ok(TaskDraw {
                first: sampler.review(),
                rework: sampler.sample_rework(&mut s.escape, &mut s.rework),
                ai: true,
            }),
            AiSampler::Policy { env, theta, signal, rework } => {
                let sig = signal.sample(&mut s.signal);
                let pi = env.risk_map.eval(sig);
                let r = review_effort_for_risk(env, *theta, pi)?;
                let escape = pi * (-env.kappa * r).exp();
                let escaped = s.escape.random::<f64>() < escape;
                Ok(TaskDraw {
                    first: r,
                    rework: escaped.then(|| rework.sample(&mut s.rework)),
                    ai: true,
                })
            }
        }
    }
}

/// Independent service-time samples from each route, in attention-hours.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSamples {
    pub manual: Vec<f64>,
    pub ai: Vec<f64>,
    /// Number of AI draws whose error escaped review.
    pub escaped: u64,
}

/// Draws `n` manual and `n` AI service requirements with the simulator's
/// samplers, ignoring the routing share.
pub fn sample_routes(workload: &Workload, n: usize, seed: u64) -> Result<RouteSamples> {
    let sampler = TaskSampler::new(workload)?;
    let mut streams = Streams::new(seed);
    let manual = (0..n).map(|_| sampler.draw_manual(&mut streams).first).collect();
    let mut escaped = 0;
    let mut ai = Vec::with_capacity(n);
    for _ in 0..n {
        let d = sampler.draw_ai(&mut streams)?;
        escaped += u64::from(d.rework.is_some());
        ai.push(d.first + d.rework.unwrap_or(0.0));
    }
    Ok(RouteSamples { manual, ai, escaped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: Time,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    customer: usize,
    enqueued: f64,
    service: f64,
    first_pass: bool,
    followup: Option<f64>,
}

/// Runs one replication.
pub fn run(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    let w = &config.workload;
    let rho_analytic = w.utilization()?;
    let n = config.n_arrivals;
    let feedback = config.rework_mode == ReworkMode::Feedback;

    let sampler = TaskSampler::new(w)?;
    let interarrival = Interarrival::new(config.arrivals, w.lambda)?;
    let mut streams = Streams::new(config.seed);

    let mut waits = vec![0.0f64; n];
    let mut arrivals = if feedback { vec![0.0f64; n] } else { Vec::new() };
    let mut completions = if feedback { vec![0.0f64; n] } else { Vec::new() };

    let mut sum_t = 0.0;
    let mut sum_t2 = 0.0;
    let mut ai_tasks = 0u64;
    let mut escaped = 0u64;

    let mut events = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |events: &mut BinaryHeap<Reverse<Event>>, time: f64, kind: EventKind| {
        events.push(Reverse(Event { time: Time(time), seq, kind }));
        seq += 1;
    };

    let mut queue: VecDeque<Job> = VecDeque::new();
    let mut in_service: Option<(Job, f64)> = None;
    let mut busy_completed = 0.0;
    let mut horizon = 0.0;
    let mut busy_at_horizon = 0.0;
    let mut next_customer = 0usize;

    push(&mut events, interarrival.sample(&mut streams.interarrival), EventKind::Arrival);

    while let Some(Reverse(ev)) = events.pop() {
        let now = ev.time.0;
        match ev.kind {
            EventKind::Arrival => {
                let customer = next_customer;
                next_customer += 1;
                let task = sampler.draw(&mut streams)?;
                let total = task.first + task.rework.unwrap_or(0.0);
                sum_t += total;
                sum_t2 += total * total;
                if task.ai {
                    ai_tasks += 1;
                    if task.rework.is_some() {
                        escaped += 1;
                    }
                }
                let job = if feedback {
                    arrivals[customer] = now;
                    Job {
                        customer,
                        enqueued: now,
                        service: task.first / w.capacity,
                        first_pass: true,
                        followup: task.rework.map(|r| r / w.capacity),
                    }
                } else {
                    Job {
                        customer,
                        enqueued: now,
                        service: total / w.capacity,
                        first_pass: true,
                        followup: None,
                    }
                };
                queue.push_back(job);
                if next_customer < n {
                    push(&mut events, now + interarrival.sample(&mut streams.interarrival), EventKind::Arrival);
                } else {
                    horizon = now;
                    busy_at_horizon = busy_completed + in_service.map_or(0.0, |(_, start)| now - start);
                }
            }
            EventKind::Departure => {
                let (job, start) = in_service.take().expect("departure without a job in service");
                busy_completed += now - start;
                match job.followup {
                    Some(rework) => queue.push_back(Job {
                        customer: job.customer,
                        enqueued: now,
                        service: rework,
                        first_pass: false,
                        followup: None,
                    }),
                    None if feedback => completions[job.customer] = now,
                    None => {}
                }
            }
        }
        if in_service.is_none() {
            if let Some(job) = queue.pop_front() {
                if job.first_pass {
                    waits[job.customer] = now - job.enqueued;
                }
                in_service = Some((job, now));
                push(&mut events, now + job.service, EventKind::Departure);
            }
        }
    }

    let nf = n as f64;
    let service_mean = sum_t / nf;
    let service_m2 = sum_t2 / nf;
    let service_c2 = if service_mean > 0.0 {
        service_m2 / (service_mean * service_mean) - 1.0
    } else {
        0.0
    };
    let rho_hat = if horizon > 0.0 { busy_at_horizon / horizon } else { 0.0 };
    let rho_se = rho_hat * ((service_c2.max(0.0) + config.arrivals.c2_a()) / nf).sqrt();
    let escape_rate = if ai_tasks > 0 { escaped as f64 / ai_tasks as f64 } else { 0.0 };
    let escape_se = if ai_tasks > 0 {
        (escape_rate * (1.0 - escape_rate) / ai_tasks as f64).sqrt()
    } else {
        0.0
    };

    let warm = (nf * config.warmup_fraction).floor() as usize;
    let steady = &waits[warm..];
    let (wq_mean, batch_means, hw95, hw99) = batch_means(steady, config.n_batches);
    let quantiles = quantiles(steady);
    let sojourn_mean = feedback.then(|| {
        let k = (n - warm) as f64;
        (warm..n).map(|i| completions[i] - arrivals[i]).sum::<f64>() / k
    });

    Ok(SimStats {
        wq_mean,
        wq_half_width_95: hw95,
        wq_half_width_99: hw99,
        batch_means,
        rho_hat,
        rho_se,
        rho_analytic,
        unstable: !is_stable(rho_analytic),
        service_mean,
        service_m2,
        service_c2,
        ai_tasks,
        escaped,
        escape_rate,
        escape_se,
        quantiles,
        sojourn_mean,
        horizon,
        n_arrivals: n,
        replications: 1,
        seed: config.seed,
    })
}

/// Two-sided Student-t half-width of a mean of `n` values with sample
/// standard deviation `sd`.
pub fn t_half_width(sd: f64, n: usize, confidence: f64) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.5 + 0.5 * confidence);
    t * sd / (n as f64).sqrt()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn batch_means(values: &[f64], batches: usize) -> (f64, Vec<f64>, f64, f64) {
    let size = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (mean, sd) = mean_sd(&means);
    (mean, means, t_half_width(sd, batches, 0.95), t_half_width(sd, batches, 0.99))
}

fn quantiles(values: &[f64]) -> WaitQuantiles {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    WaitQuantiles {
        p50: q(0.5),
        p90: q(0.9),
        p99: q(0.99),
    }
}

/// Seed for replication `index`; replication 0 uses the base seed.
pub fn replication_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs `n_reps` independent replications and pools them.
///
/// With more than one replication the confidence interval is taken across
/// replication means, `batch_means` holds those means, and the service and
/// escape estimates are pooled over all tasks.
pub fn replicate(config: &SimConfig, n_reps: usize) -> Result<SimStats> {
    if n_reps == 0 {
        return Err(Error::domain("reps", "must be >= 1"));
    }
    if n_reps == 1 {
        return run(config);
    }
    let runs = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            run(&SimConfig {
                seed: replication_seed(config.seed, i),
                ..*config
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let k = n_reps as f64;
    let means: Vec<f64> = runs.iter().map(|r| r.wq_mean).collect();
    let (wq_mean, sd) = mean_sd(&means);
    let avg = |f: fn(&SimStats) -> f64| runs.iter().map(f).sum::<f64>() / k;
    let service_mean = avg(|r| r.service_mean);
    let service_m2 = avg(|r| r.service_m2);
    let ai_tasks: u64 = runs.iter().map(|r| r.ai_tasks).sum();
    let escaped: u64 = runs.iter().map(|r| r.escaped).sum();
    let escape_rate = if ai_tasks > 0 { escaped as f64 / ai_tasks as f64 } else { 0.0 };
    let (rho_hat, rho_sd) = mean_sd(&runs.iter().map(|r| r.rho_hat).collect::<Vec<_>>());
    let sojourn_mean = runs[0].sojourn_mean.map(|_| avg(|r| r.sojourn_mean.unwrap_or(0.0)));

    Ok(SimStats {
        wq_mean,
        wq_half_width_95: t_half_width(sd, n_reps, 0.95),
        wq_half_width_99: t_half_width(sd, n_reps, 0.99),
        batch_means: means,
        rho_hat,
        rho_se: rho_sd / k.sqrt(),
        rho_analytic: runs[0].rho_analytic,
        unstable: runs[0].unstable,
        service_mean,
        service_m2,
        service_c2: if service_mean > 0.0 {
            service_m2 / (service_mean * service_mean) - 1.0
        } else {
            0.0
        },
        ai_tasks,
        escaped,
        escape_rate,
        escape_se: if ai_tasks > 0 {
            (escape_rate * (1.0 - escape_rate) / ai_tasks as f64).sqrt()
        } else {
            0.0
        },
        quantiles: WaitQuantiles {
            p50: avg(|r| r.quantiles.p50),
            p90: avg(|r| r.quantiles.p90),
            p99: avg(|r| r.quantiles.p99),
        },
        sojourn_mean,
        horizon: avg(|r| r.horizon),
        n_arrivals: config.n_arrivals,
        replications: n_reps,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm1(lambda: f64) -> Workload {
        Workload {
            lambda,
            capacity: 1.0,
            x: 0.0,
            manual: ManualRoute::new(1.0, 1.0).unwrap(),
            ai: AiRoute::FixedReview {
                curve: ErrorCurve::new(0.1, 0.1, 1.0).unwrap(),
                rework: ReworkModel::new(1.0, 2.0).unwrap(),
                review: 0.5,
            },
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(mm1(0.5), 1);
        c.n_arrivals = 1000;
        assert!(c.validate().is_err());
        let mut c = SimConfig::new(mm1(0.5), 1);
        c.warmup_fraction = 0.6;
        assert!(c.validate().is_err());
    }

    #[test]
    fn light_traffic_deterministic_service_has_no_wait() {
        let mut w = mm1(1e-4);
        w.manual = ManualRoute::new(1.0, 0.0).unwrap();
        let mut c = SimConfig::new(w, 3);
        c.n_arrivals = 20_000;
        let s = run(&c).unwrap();
        assert!(s.wq_mean < 1e-3, "{}", s.wq_mean);
        assert_eq!(s.service_c2, 0.0);
    }

    #[test]
    fn mm1_matches_closed_form() {
        let mut c = SimConfig::new(mm1(0.5), 42);
        c.n_arrivals = 400_000;
        let s = run(&c).unwrap();
        assert!((s.wq_mean - 1.0).abs() < s.wq_half_width_99, "{} ± {}", s.wq_mean, s.wq_half_width_99);
        assert!(s.wq_half_width_95 > 0.0);
        assert!(s.quantiles.p50 <= s.quantiles.p90 && s.quantiles.p90 <= s.quantiles.p99);
        assert!((s.rho_hat - 0.5).abs() < 3.0 * s.rho_se);
    }

    #[test]
    fn replicate_one_equals_run() {
        let mut c = SimConfig::new(mm1(0.6), 9);
        c.n_arrivals = 10_000;
        assert_eq!(run(&c).unwrap(), replicate(&c, 1).unwrap());
        assert!(replicate(&c, 0).is_err());
        let a = replicate(&c, 3).unwrap();
        let b = replicate(&c, 3).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.replications, 3);
    }

    #[test]
    fn overload_is_flagged() {
        let mut c = SimConfig::new(mm1(1.2), 5);
        c.n_arrivals = 10_000;
        let s = run(&c).unwrap();
        assert!(s.unstable);
        assert!(s.wq_mean > 10.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let q = quantiles(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(q.p50, 2.0);
        assert!((q.p90 - 3.6).abs() < 1e-12);
    }
}
