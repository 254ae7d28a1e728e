//! Gauss–Legendre rules on the reference interval [-1, 1].

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 16;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1],
/// nodes in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Legendre polynomial P_n and its derivative at `t`, by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_POINTS).contains(&n) {
        return Err(Error::UnsupportedOrder { n });
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // roots come in symmetric pairs; solve for the positive half by Newton
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        if n % 2 == 1 && i == n / 2 {
            t = 0.0;
        }
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}
