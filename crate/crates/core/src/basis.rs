//! Barycentric Lagrange interpolation on Chebyshev type-2 (extrema) supports.
//!
//! Supports include both interval endpoints for degree >= 1, so the first and
//! last nodal values of adjacent intervals can share storage.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nlp::Scalar;

/// `cos(pi (degree - k) / degree)` for `k = 0..=degree`, ascending; `[0]` for
/// degree zero.
pub fn chebyshev2_nodes(degree: usize) -> Vec<f64> {
    if degree == 0 {
        return vec![0.0];
    }
    let d = degree as f64;
    (0..=degree)
        .map(|k| {
            let x = (PI * (degree - k) as f64 / d).cos();
            // snap the symmetric center exactly
            if 2 * k == degree {
                0.0
            } else {
                x
            }
        })
        .collect()
}

/// Product-formula barycentric weights `1 / prod_{k != j} (x_j - x_k)`.
pub fn barycentric_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    let mut w = vec![1.0; nodes.len()];
    for (j, &xj) in nodes.iter().enumerate() {
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                let diff = xj - xk;
                if diff == 0.0 {
                    return Err(Error::SingularBasis(j.min(k), j.max(k)));
                }
                w[j] /= diff;
            }
        }
    }
    Ok(w)
}

/// Lagrange basis of one degree on the reference interval `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalBasis {
    pub degree: usize,
    pub ref_nodes: Vec<f64>,
    pub bary_weights: Vec<f64>,
}

impl IntervalBasis {
    pub fn chebyshev2(degree: usize) -> Self {
        let ref_nodes = chebyshev2_nodes(degree);
        let bary_weights = barycentric_weights(&ref_nodes).expect("chebyshev nodes are distinct");
        IntervalBasis {
            degree,
            ref_nodes,
            bary_weights,
        }
    }

    /// Builds a basis on arbitrary distinct reference nodes.
    pub fn from_nodes(ref_nodes: Vec<f64>) -> Result<Self> {
        let bary_weights = barycentric_weights(&ref_nodes)?;
        Ok(IntervalBasis {
            degree: ref_nodes.len() - 1,
            ref_nodes,
            bary_weights,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.ref_nodes.len()
    }

    /// Values of all Lagrange cardinal functions at reference point `xi`.
    pub fn lagrange_row(&self, xi: f64) -> Vec<f64> {
        if let Some(j) = self.ref_nodes.iter().position(|&x| x == xi) {
            let mut row = vec![0.0; self.n_nodes()];
            row[j] = 1.0;
            return row;
        }
        let terms: Vec<f64> = self
            .ref_nodes
            .iter()
            .zip(&self.bary_weights)
            .map(|(x, w)| w / (xi - x))
            .collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }

    /// Derivatives (with respect to the reference coordinate) of all cardinal
    /// functions at `xi`.
    pub fn derivative_row(&self, xi: f64) -> Vec<f64> {
        let n = self.n_nodes();
        if let Some(i) = self.ref_nodes.iter().position(|&x| x == xi) {
            return self.differentiation_row(i);
        }
        // l_j'(x) = l_j(x) * (sum_k w_k/(x-x_k)^2 / sum_k w_k/(x-x_k) - 1/(x - x_j))
        let l = self.lagrange_row(xi);
        let s1: f64 = self
            .ref_nodes
            .iter()
            .zip(&self.bary_weights)
            .map(|(x, w)| w / (xi - x))
            .sum();
        let s2: f64 = self
            .ref_nodes
            .iter()
            .zip(&self.bary_weights)
            .map(|(x, w)| w / ((xi - x) * (xi - x)))
            .sum();
        (0..n)
            .map(|j| l[j] * (s2 / s1 - 1.0 / (xi - self.ref_nodes[j])))
            .collect()
    }

    /// Row `i` of the reference differentiation matrix.
    fn differentiation_row(&self, i: usize) -> Vec<f64> {
        let n = self.n_nodes();
        let mut row = vec![0.0; n];
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                let d = (self.bary_weights[j] / self.bary_weights[i])
                    / (self.ref_nodes[i] - self.ref_nodes[j]);
                row[j] = d;
                diag -= d;
            }
        }
        row[i] = diag;
        row
    }

    /// Support times mapped into `[t_lo, t_hi]`.
    pub fn support_times(&self, t_lo: f64, t_hi: f64) -> Vec<f64> {
        self.ref_nodes
            .iter()
            .map(|&xi| map_to_interval(xi, t_lo, t_hi))
            .collect()
    }
}

/// Affine map from `[-1, 1]` into `[t_lo, t_hi]`; endpoints map exactly.
pub fn map_to_interval(xi: f64, t_lo: f64, t_hi: f64) -> f64 {
    if xi == -1.0 {
        t_lo
    } else if xi == 1.0 {
        t_hi
    } else {
        t_lo + 0.5 * (xi + 1.0) * (t_hi - t_lo)
    }
}

fn mapped_support<S: Scalar>(xi: f64, t_lo: &S, t_hi: &S) -> S {
    if xi == -1.0 {
        t_lo.clone()
    } else if xi == 1.0 {
        t_hi.clone()
    } else {
        t_lo.clone() + (t_hi.clone() - t_lo.clone()) * (0.5 * (xi + 1.0))
    }
}

fn combine<S: Scalar>(coeffs: &[S], nodal_values: &[Vec<S>]) -> Vec<S> {
    let m = nodal_values.first().map_or(0, Vec::len);
    (0..m)
        .map(|c| {
            coeffs
                .iter()
                .zip(nodal_values)
                .fold(S::zero(), |acc, (l, v)| acc + l.clone() * v[c].clone())
        })
        .collect()
}

/// Value of the interpolant through `nodal_values` (one row per support,
/// mapped into `[t_lo, t_hi]`) at time `t`, by the second barycentric form.
/// At a support node the stored value is returned exactly.
pub fn eval_interp<S: Scalar>(
    basis: &IntervalBasis,
    nodal_values: &[Vec<S>],
    t_lo: &S,
    t_hi: &S,
    t: &S,
) -> Vec<S> {
    let taus: Vec<S> = basis
        .ref_nodes
        .iter()
        .map(|&xi| mapped_support(xi, t_lo, t_hi))
        .collect();
    if let Some(j) = taus.iter().position(|tau| tau.value() == t.value()) {
        // value is exact; the first-order term carries derivatives through t
        let slope = eval_interp_deriv(basis, nodal_values, t_lo, t_hi, t);
        let dt = t.clone() - taus[j].clone();
        return nodal_values[j]
            .iter()
            .zip(slope)
            .map(|(v, d)| v.clone() + d * dt.clone())
            .collect();
    }
    let terms: Vec<S> = taus
        .iter()
        .zip(&basis.bary_weights)
        .map(|(tau, &w)| S::from_f64(w) / (t.clone() - tau.clone()))
        .collect();
    let denom = terms.iter().fold(S::zero(), |a, b| a + b.clone());
    let coeffs: Vec<S> = terms.into_iter().map(|c| c / denom.clone()).collect();
    combine(&coeffs, nodal_values)
}

/// Time derivative of the interpolant at `t`, including the `2 / (t_hi - t_lo)`
/// chain-rule factor of the affine map.
pub fn eval_interp_deriv<S: Scalar>(
    basis: &IntervalBasis,
    nodal_values: &[Vec<S>],
    t_lo: &S,
    t_hi: &S,
    t: &S,
) -> Vec<S> {
    let h = t_hi.clone() - t_lo.clone();
    let scale = S::from_f64(2.0) / h.clone();
    let on_node = basis
        .ref_nodes
        .iter()
        .position(|&xi| map_to_interval(xi, t_lo.value(), t_hi.value()) == t.value());
    let row: Vec<S> = match on_node {
        Some(i) => basis
            .differentiation_row(i)
            .into_iter()
            .map(S::from_f64)
            .collect(),
        None => {
            // derivative of the barycentric form with xi carried as a scalar
            let xi = (t.clone() * 2.0 - t_lo.clone() - t_hi.clone()) / h.clone();
            let terms: Vec<S> = basis
                .ref_nodes
                .iter()
                .zip(&basis.bary_weights)
                .map(|(&x, &w)| S::from_f64(w) / (xi.clone() - x))
                .collect();
            let s1 = terms.iter().fold(S::zero(), |a, b| a + b.clone());
            let s2 = basis
                .ref_nodes
                .iter()
                .zip(&basis.bary_weights)
                .fold(S::zero(), |a, (&x, &w)| a + S::from_f64(w) / (xi.clone() - x).square());
            terms
                .iter()
                .zip(&basis.ref_nodes)
                .map(|(term, &x)| {
                    let l = term.clone() / s1.clone();
                    l * (s2.clone() / s1.clone() - S::from_f64(1.0) / (xi.clone() - x))
                })
                .collect()
        }
    };
    combine(&row, nodal_values)
        .into_iter()
        .map(|d| d * scale.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    /// Lagrange cardinal function evaluated by the direct product formula.
    fn direct_lagrange(nodes: &[f64], j: usize, x: f64) -> f64 {
        nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
            .product()
    }

    #[test]
    fn chebyshev_nodes_small_degrees() {
        assert_eq!(chebyshev2_nodes(0), vec![0.0]);
        assert_eq!(chebyshev2_nodes(1), vec![-1.0, 1.0]);
        assert_eq!(chebyshev2_nodes(2), vec![-1.0, 0.0, 1.0]);
        let n4 = chebyshev2_nodes(4);
        let h = 0.5f64.sqrt();
        for (a, b) in n4.iter().zip([-1.0, -h, 0.0, h, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn chebyshev_weights_match_closed_form_up_to_scale() {
        // closed form for type-2 points: (-1)^j * delta_j, delta = 1/2 at ends
        for d in 1..12 {
            let nodes = chebyshev2_nodes(d);
            let w = barycentric_weights(&nodes).unwrap();
            let closed: Vec<f64> = (0..=d)
                .map(|j| {
                    let s = if (d - j) % 2 == 0 { 1.0 } else { -1.0 };
                    if j == 0 || j == d {
                        0.5 * s
                    } else {
                        s
                    }
                })
                .collect();
            let ratio = w[0] / closed[0];
            for j in 0..=d {
                assert!(close(w[j], ratio * closed[j], 1e-10), "degree {d} j {j}");
            }
        }
    }

    #[test]
    fn product_formula_weights() {
        let w = barycentric_weights(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(w, vec![0.5, -1.0, 0.5]);
        assert_eq!(barycentric_weights(&[-1.0, 1.0]).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(barycentric_weights(&[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn duplicate_nodes_are_singular() {
        assert!(matches!(
            barycentric_weights(&[0.0, 0.5, 0.5]),
            Err(Error::SingularBasis(1, 2))
        ));
    }

    #[test]
    fn linear_interpolation() {
        let b = IntervalBasis::chebyshev2(1);
        let v = vec![vec![0.0], vec![10.0]];
        assert!(close(eval_interp(&b, &v, &0.0, &1.0, &0.25)[0], 2.5, 1e-15));
        for t in [0.0, 0.3, 1.7, 2.0] {
            assert!(close(eval_interp_deriv(&b, &v, &0.0, &2.0, &t)[0], 5.0, 1e-14));
        }
    }

    #[test]
    fn node_values_are_exact() {
        let b = IntervalBasis::chebyshev2(4);
        let taus = b.support_times(1.0, 3.7);
        let v: Vec<Vec<f64>> = (0..5).map(|j| vec![(j as f64).sin() * 3.1]).collect();
        for (j, tau) in taus.iter().enumerate() {
            assert_eq!(eval_interp(&b, &v, &1.0, &3.7, tau)[0], v[j][0]);
        }
    }

    #[test]
    fn quadratic_reproduction() {
        let b = IntervalBasis::chebyshev2(2);
        let taus = b.support_times(0.0, 2.0);
        let v: Vec<Vec<f64>> = taus.iter().map(|t| vec![t * t]).collect();
        assert!(close(eval_interp(&b, &v, &0.0, &2.0, &1.3)[0], 1.69, 1e-14));
        assert!(close(eval_interp_deriv(&b, &v, &0.0, &2.0, &0.7)[0], 1.4, 1e-13));
    }

    #[test]
    fn constant_has_zero_derivative() {
        let b = IntervalBasis::chebyshev2(3);
        let v = vec![vec![4.2]; 4];
        for t in [-2.0, -1.5, 0.1, 1.0] {
            assert!(eval_interp_deriv(&b, &v, &-2.0, &1.0, &t)[0].abs() < 1e-13);
        }
    }

    #[test]
    fn rows_match_direct_product_formula() {
        for d in 0..8 {
            let b = IntervalBasis::chebyshev2(d);
            for &xi in &[-0.93, -0.2, 0.0, 0.41, 0.999] {
                let row = b.lagrange_row(xi);
                for j in 0..=d {
                    assert!(close(row[j], direct_lagrange(&b.ref_nodes, j, xi), 1e-12));
                }
            }
        }
    }

    #[test]
    fn weight_scaling_leaves_values_unchanged() {
        let b = IntervalBasis::chebyshev2(3);
        let mut scaled = b.clone();
        for w in &mut scaled.bary_weights {
            *w *= -7.5;
        }
        let v: Vec<Vec<f64>> = vec![vec![1.0], vec![-2.0], vec![0.5], vec![3.0]];
        for t in [0.1, 0.77, 1.9] {
            let a = eval_interp(&b, &v, &0.0, &2.0, &t)[0];
            let c = eval_interp(&scaled, &v, &0.0, &2.0, &t)[0];
            assert!(close(a, c, 1e-14));
        }
    }

    proptest! {
        #[test]
        fn polynomial_reproduction(
            degree in 1usize..8,
            coeffs in proptest::collection::vec(-3.0..3.0f64, 8),
            lo in -5.0..5.0f64,
            len in 0.1..4.0f64,
            ts in proptest::collection::vec(0.0..1.0f64, 100),
        ) {
            let b = IntervalBasis::chebyshev2(degree);
            let hi = lo + len;
            let q = |t: f64| coeffs[..=degree].iter().rev().fold(0.0, |acc, c| acc * t + c);
            let v: Vec<Vec<f64>> = b.support_times(lo, hi).iter().map(|&t| vec![q(t)]).collect();
            // relative to the largest nodal value, which bounds the interpolant's conditioning
            let vmax = v.iter().fold(1.0f64, |m, r| m.max(r[0].abs()));
            for s in ts {
                let t = lo + s * len;
                let got = eval_interp(&b, &v, &lo, &hi, &t)[0];
                prop_assert!((got - q(t)).abs() <= 1e-12 * vmax,
                    "degree {} t {} got {} want {}", degree, t, got, q(t));
            }
        }

        #[test]
        fn derivative_matches_finite_differences(
            degree in 1usize..6,
            vals in proptest::collection::vec(-2.0..2.0f64, 6),
            s in 0.05..0.95f64,
        ) {
            let b = IntervalBasis::chebyshev2(degree);
            let v: Vec<Vec<f64>> = vals[..=degree].iter().map(|&x| vec![x]).collect();
            let (lo, hi) = (0.5, 2.5);
            let t = lo + s * (hi - lo);
            let h = 1e-6;
            let fd = (eval_interp(&b, &v, &lo, &hi, &(t + h))[0] - eval_interp(&b, &v, &lo, &hi, &(t - h))[0]) / (2.0 * h);
            let d = eval_interp_deriv(&b, &v, &lo, &hi, &t)[0];
            prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "fd {} d {}", fd, d);
        }

        #[test]
        fn affine_invariance(degree in 1usize..6, vals in proptest::collection::vec(-2.0..2.0f64, 6), s in 0.0..1.0f64) {
            let b = IntervalBasis::chebyshev2(degree);
            let v: Vec<Vec<f64>> = vals[..=degree].iter().map(|&x| vec![x]).collect();
            let (lo, hi) = (3.0, 7.5);
            let t = lo + s * (hi - lo);
            let xi = -1.0 + 2.0 * s;
            let a = eval_interp(&b, &v, &lo, &hi, &t)[0];
            let r = eval_interp(&b, &v, &-1.0, &1.0, &xi)[0];
            prop_assert!((a - r).abs() < 1e-12);
        }
    }
}
