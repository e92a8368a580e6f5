//! Gauss-Legendre quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ocp_model::OcpProblem;
use crate::transcription::TranscribedNlp;

/// A `Q`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadRule {
    pub order: usize,
    pub ref_nodes: Vec<f64>,
    pub ref_weights: Vec<f64>,
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
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
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Roots of `P_order` by Newton iteration from the Tricomi-type initial guesses
/// `cos(pi (k + 3/4) / (order + 1/2))`, with weights `2 / ((1 - x²) P'(x)²)`.
///
/// # Panics
/// If `order == 0`.
pub fn gauss_legendre(order: usize) -> QuadRule {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // k-th largest root; mirror for symmetry
        nodes[n - 1 - k] = x;
        nodes[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadRule {
        order,
        ref_nodes: nodes,
        ref_weights: weights,
    }
}

impl QuadRule {
    /// Nodes and weights mapped onto `[t_lo, t_hi]`.
    pub fn scaled_points(&self, t_lo: f64, t_hi: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (t_hi - t_lo);
        let mid = 0.5 * (t_hi + t_lo);
        let nodes = self
            .ref_nodes
            .iter()
            .map(|&x| mid + x * half)
            .collect();
        let weights = self.ref_weights.iter().map(|&w| w * half).collect();
        (nodes, weights)
    }

    /// Interval weights carrying the residual normalization `1 / (horizon * n_f)`.
    pub fn residual_weights(&self, t_lo: f64, t_hi: f64, horizon: f64, n_f: usize) -> Vec<f64> {
        let scale = 1.0 / (horizon * n_f as f64);
        self.scaled_points(t_lo, t_hi)
            .1
            .into_iter()
            .map(|w| w * scale)
            .collect()
    }

    pub fn integrate(&self, t_lo: f64, t_hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = self.scaled_points(t_lo, t_hi);
        nodes.iter().zip(&weights).map(|(&t, w)| w * f(t)).sum()
    }
}

pub fn scaled_points(rule: &QuadRule, t_lo: f64, t_hi: f64) -> (Vec<f64>, Vec<f64>) {
    rule.scaled_points(t_lo, t_hi)
}

pub fn residual_weights(rule: &QuadRule, t_lo: f64, t_hi: f64, horizon: f64, n_f: usize) -> Vec<f64> {
    rule.residual_weights(t_lo, t_hi, horizon, n_f)
}

/// `|I_lo - I_hi|`: the residual integral at `z` under the transcription's own
/// rule against a recomputation with `rule_hi`.
pub fn quad_error_estimate<P: OcpProblem>(
    nlp: &TranscribedNlp<'_, P>,
    z: &[f64],
    rule_hi: &QuadRule,
) -> f64 {
    let lo = nlp.integrated_residual(z);
    let hi = nlp.with_rule(rule_hi).integrated_residual(z);
    (lo - hi).abs()
}
