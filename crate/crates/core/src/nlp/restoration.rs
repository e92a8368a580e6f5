//! Feasibility restoration problem for the interior-point method.
//!
//! Over the reduced (free, scaled) variables `x` of the original problem:
//!
//! ```text
//! min  rho (sum p_e + sum n_e + sum p_i) + zeta/2 |D (x - x_r)|^2
//! s.t. h(x) - p_e + n_e = 0,   g(x) - p_i <= 0,   p, n >= 0
//! ```
//!
//! with the original variable bounds kept as bounds on `x`.

use std::sync::Mutex;

use nalgebra::DMatrix;

use super::ipm::{Derivs, Reduced};
use super::NlpModel;
use crate::error::Result;

pub(super) const RHO: f64 = 1000.0;

pub(super) struct RestorationModel<'a, 'b> {
    red: &'b Reduced<'a>,
    x_ref: Vec<f64>,
    /// Squared proximity weights `zeta * d_k^2`.
    prox: Vec<f64>,
    n: usize,
    m_e: usize,
    m_g: usize,
    cache: Mutex<Option<(Vec<f64>, Derivs)>>,
}

impl<'a, 'b> RestorationModel<'a, 'b> {
    pub(super) fn new(red: &'b Reduced<'a>, x_ref: Vec<f64>, zeta: f64) -> Self {
        let prox = x_ref.iter().map(|v| zeta * (1.0 / v.abs().max(1.0)).powi(2)).collect();
        RestorationModel {
            n: red.n(),
            m_e: red.model.n_eq(),
            m_g: red.n_model_ineq,
            red,
            x_ref,
            prox,
            cache: Mutex::new(None),
        }
    }

    pub(super) fn n_x(&self) -> usize {
        self.n
    }

    /// Starting point with the elastic variables chosen so that every row
    /// holds with margin `margin`.
    pub(super) fn start(&self, margin: f64) -> Vec<f64> {
        let pt = self.red.point(&self.x_ref);
        let mut v = self.x_ref.clone();
        v.extend(pt.ce.iter().map(|&c| c.max(0.0) + margin));
        v.extend(pt.ce.iter().map(|&c| (-c).max(0.0) + margin));
        v.extend(pt.ci[..self.m_g].iter().map(|&c| c.max(0.0) + margin));
        v
    }

    /// Bounds: the original bounds on `x`, nonnegativity on the elastics.
    pub(super) fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let total = self.n_vars();
        let mut lo = vec![f64::NEG_INFINITY; total];
        let mut hi = vec![f64::INFINITY; total];
        for &(k, sign, b) in &self.red.bound_rows {
            if sign < 0.0 {
                lo[k] = b;
            } else {
                hi[k] = b;
            }
        }
        for v in lo.iter_mut().skip(self.n) {
            *v = 0.0;
        }
        (lo, hi)
    }

    fn with_derivs<T>(&self, x: &[f64], f: impl FnOnce(&Derivs) -> T) -> Result<T> {
        let mut cache = self.cache.lock().expect("restoration cache");
        let hit = matches!(cache.as_ref(), Some((cx, _)) if cx.as_slice() == x);
        if !hit {
            *cache = Some((x.to_vec(), self.red.derivs(x)?));
        }
        Ok(f(&cache.as_ref().expect("cached").1))
    }
}

impl NlpModel for RestorationModel<'_, '_> {
    fn n_vars(&self) -> usize {
        self.n + 2 * self.m_e + self.m_g
    }

    fn n_eq(&self) -> usize {
        self.m_e
    }

    fn n_ineq(&self) -> usize {
        self.m_g
    }

    fn objective(&self, v: &[f64]) -> f64 {
        let elastic: f64 = v[self.n..].iter().sum();
        let prox: f64 = (0..self.n)
            .map(|k| self.prox[k] * (v[k] - self.x_ref[k]).powi(2))
            .sum();
        RHO * elastic + 0.5 * prox
    }

    fn eq_constraints(&self, v: &[f64]) -> Vec<f64> {
        let pt = self.red.point(&v[..self.n]);
        let (p, nn) = (&v[self.n..self.n + self.m_e], &v[self.n + self.m_e..self.n + 2 * self.m_e]);
        (0..self.m_e).map(|r| pt.ce[r] - p[r] + nn[r]).collect()
    }

    fn ineq_constraints(&self, v: &[f64]) -> Vec<f64> {
        let pt = self.red.point(&v[..self.n]);
        let p = &v[self.n + 2 * self.m_e..];
        (0..self.m_g).map(|r| pt.ci[r] - p[r]).collect()
    }

    fn objective_gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut g: Vec<f64> = (0..self.n).map(|k| self.prox[k] * (v[k] - self.x_ref[k])).collect();
        g.extend(std::iter::repeat_n(RHO, 2 * self.m_e + self.m_g));
        Ok(g)
    }

    fn eq_jacobian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let (n, m_e) = (self.n, self.m_e);
        let mut j = DMatrix::zeros(m_e, self.n_vars());
        self.with_derivs(&v[..n], |d| j.view_mut((0, 0), (m_e, n)).copy_from(&d.je))?;
        for r in 0..m_e {
            j[(r, n + r)] = -1.0;
            j[(r, n + m_e + r)] = 1.0;
        }
        Ok(j)
    }

    fn ineq_jacobian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let (n, m_g) = (self.n, self.m_g);
        let mut j = DMatrix::zeros(m_g, self.n_vars());
        self.with_derivs(&v[..n], |d| j.view_mut((0, 0), (m_g, n)).copy_from(&d.ji.rows(0, m_g)))?;
        for r in 0..m_g {
            j[(r, n + 2 * self.m_e + r)] = -1.0;
        }
        Ok(j)
    }

    fn lagrangian_hessian(&self, v: &[f64], obj_factor: f64, eq_mult: &[f64], ineq_mult: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut lam = ineq_mult.to_vec();
        lam.extend(std::iter::repeat_n(0.0, self.red.m_i() - self.m_g));
        let hx = self.red.hessian(&v[..n], 0.0, eq_mult, &lam)?;
        let mut h = DMatrix::zeros(self.n_vars(), self.n_vars());
        h.view_mut((0, 0), (n, n)).copy_from(&hx);
        for k in 0..n {
            h[(k, k)] += obj_factor * self.prox[k];
        }
        Ok(h)
    }
}
