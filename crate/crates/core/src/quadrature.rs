//! Composite Gauss–Legendre quadrature.
//!
//! Nodes come from Newton iteration on the three-term Legendre recurrence,
//! started from Tricomi's asymptotic guess. A panel of order `n` integrates
//! polynomials of degree `2n - 1` exactly.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let k = i as f64 + 1.0;
            let mut x = (PI * (k - 0.25) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates a vector-valued function over `[a, b]`.
    pub fn integrate<const N: usize, F>(&self, a: f64, b: f64, mut f: F) -> [f64; N]
    where
        F: FnMut(f64) -> [f64; N],
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            for (a, v) in acc.iter_mut().zip(v) {
                *a += w * v;
            }
        }
        acc.map(|a| a * half)
    }
}

/// `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GRADING_RATIO: f64 = 0.2;
const GRADING_LEVELS: i32 = 16;

/// Sub-intervals of `[from, to]` (either orientation) shrinking geometrically
/// towards `to`, listed from `from` inwards. Each pair is ordered
/// `(nearer from, nearer to)`.
fn graded_panels(from: f64, to: f64) -> Vec<(f64, f64)> {
    let span = to - from;
    let mut cuts: Vec<f64> = (0..=GRADING_LEVELS)
        .map(|k| to - span * GRADING_RATIO.powi(k))
        .collect();
    cuts.push(to);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Equal-width panels of a fixed Gauss–Legendre rule, with a lower-order
/// embedded rule for an error estimate.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    panels: usize,
    fine: GaussLegendre,
    coarse: GaussLegendre,
}

/// Integral together with its embedded-rule error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

impl CompositeRule {
    pub const PANEL_ORDER: usize = 32;

    /// Rule with `nodes` total fine nodes per integration piece, rounded up
    /// to whole panels of [`Self::PANEL_ORDER`].
    pub fn with_nodes(nodes: usize) -> Self {
        let panels = nodes.div_ceil(Self::PANEL_ORDER).max(1);
        Self {
            panels,
            fine: GaussLegendre::new(Self::PANEL_ORDER),
            coarse: GaussLegendre::new(Self::PANEL_ORDER / 2),
        }
    }

    pub fn nodes_per_piece(&self) -> usize {
        self.panels * self.fine.order()
    }

    pub fn integrate<const N: usize, F>(&self, a: f64, b: f64, f: F) -> Estimate<N>
    where
        F: FnMut(f64) -> [f64; N],
    {
        self.integrate_graded(a, b, false, false, f)
    }

    /// Like [`Self::integrate`], with the first and/or last panel replaced by
    /// a geometric cascade towards the endpoint. This restores fast
    /// convergence for algebraic endpoint behaviour such as `(1 - s)^0.7`.
    pub fn integrate_graded<const N: usize, F>(&self, a: f64, b: f64, grade_lo: bool, grade_hi: bool, mut f: F) -> Estimate<N>
    where
        F: FnMut(f64) -> [f64; N],
    {
        let mut value = [0.0; N];
        let mut error = 0.0;
        if b <= a {
            return Estimate { value, error };
        }
        let mut panel = |lo: f64, hi: f64| {
            let fine = self.fine.integrate(lo, hi, &mut f);
            let coarse = self.coarse.integrate(lo, hi, &mut f);
            for i in 0..N {
                value[i] += fine[i];
                error += (fine[i] - coarse[i]).abs();
            }
        };
        let width = (b - a) / self.panels as f64;
        for p in 0..self.panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == self.panels { b } else { lo + width };
            let at_lo = grade_lo && p == 0;
            let at_hi = grade_hi && p + 1 == self.panels;
            if at_lo && at_hi {
                let mid = 0.5 * (lo + hi);
                for (x0, x1) in graded_panels(mid, lo) {
                    panel(x1, x0);
                }
                for (x0, x1) in graded_panels(mid, hi) {
                    panel(x0, x1);
                }
            } else if at_lo {
                for (x0, x1) in graded_panels(hi, lo) {
                    panel(x1, x0);
                }
            } else if at_hi {
                for (x0, x1) in graded_panels(lo, hi) {
                    panel(x0, x1);
                }
            } else {
                panel(lo, hi);
            }
        }
        Estimate { value, error }
    }

    /// Integrates over `[a, b]` split at the interior `breaks`, failing when
    /// the error estimate exceeds `tolerance * max(1, |value|)`.
    pub fn integrate_pieces<const N: usize, F>(&self, a: f64, b: f64, breaks: &[f64], tolerance: f64, mut f: F) -> Result<[f64; N]>
    where
        F: FnMut(f64) -> [f64; N],
    {
        let mut points = vec![a];
        points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        points.push(b);
        let mut value = [0.0; N];
        let mut error = 0.0;
        let last = points.len() - 2;
        for (i, w) in points.windows(2).enumerate() {
            let est = self.integrate_graded(w[0], w[1], i == 0, i == last, &mut f);
            error += est.error;
            for (v, e) in value.iter_mut().zip(est.value) {
                *v += e;
            }
        }
        let scale = value.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !(error <= tolerance * scale) {
            return Err(Error::Quadrature { estimate: error });
        }
        Ok(value)
    }
}
