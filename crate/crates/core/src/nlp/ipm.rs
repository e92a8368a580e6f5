//! Primal-dual interior-point method with a filter line search.
//!
//! Inequalities `g(z) <= 0` get slacks `s > 0` with `g(z) + s = 0`; finite
//! bounds on free variables are turned into extra linear rows. Variables with
//! `lower == upper` are removed from the iteration. The barrier parameter is
//! decreased monotonically once the barrier subproblem is solved to
//! `KAPPA_EPS * mu`. Newton steps solve the reduced KKT system
//!
//! ```text
//! [ W + Jg' S^-1 L Jg + dw I   Ja' ] [dx]   [r1]
//! [ Ja                        -D   ] [dy] = [r2]
//! ```
//!
//! where `Ja` stacks the equality rows and the inequality rows with large
//! `S^-1 L` (those are left out of the condensed `Jg` term). The matrix is
//! factorized by symmetric indefinite LBL' and the regularization `dw` is
//! escalated until the inertia is `(n, m_a, 0)`. Trial points are accepted when
//! they improve either the constraint violation or the barrier objective
//! against a filter of earlier pairs, with up to four second-order corrections
//! when the full step increases the violation.

use std::fs::File;
use std::io::{BufWriter, Write};

use faer::linalg::solvers::{Lblt, Solve};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use super::bfgs::Bfgs;
use super::restoration::RestorationModel;
use super::{
    constraint_violation, HessianMode, IterationRecord, NlpModel, NlpResult, NlpSpec, NlpStatus,
    SolverOptions,
};

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
const DELTA_W_INIT: f64 = 1e-4;
const DELTA_W_MAX: f64 = 1e40;
const SIGMA_KEEP: f64 = 1.0;
const DELTA_W_MIN: f64 = 1e-20;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const DELTA: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const ETA_PHI: f64 = 1e-4;
const ALPHA_MIN: f64 = 1e-14;
const ACCEPTABLE_ITER: usize = 15;
const THETA_MAX_FACTOR: f64 = 1e4;
const RESTORED_SLACK: f64 = 1e-2;
const RESTORATION_DECREASE: f64 = 0.9;
const RESTORATION_MAX_ITER: usize = 500;
const MAX_SOC: usize = 4;
const SOC_KAPPA: f64 = 0.99;

/// Reduced view of the model over free variables, with scaling applied.
pub(super) struct Reduced<'a> {
    pub(super) model: &'a dyn NlpModel,
    free: Vec<usize>,
    base: Vec<f64>,
    /// (free position, +1 for upper / -1 for lower, bound value)
    pub(super) bound_rows: Vec<(usize, f64, f64)>,
    row_scale: Vec<f64>,
    /// Free variable `k` is `col_scale[k] * x[k]` in model units.
    col_scale: Vec<f64>,
    obj_scale: f64,
    pub(super) n_model_ineq: usize,
}

pub(super) struct Point {
    f: f64,
    pub(super) ce: Vec<f64>,
    /// Scaled model rows, then the bound rows.
    pub(super) ci: Vec<f64>,
}

pub(super) struct Derivs {
    grad: DVector<f64>,
    pub(super) je: DMatrix<f64>,
    pub(super) ji: DMatrix<f64>,
}

impl<'a> Reduced<'a> {
    pub(super) fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            z[i] = x[k] * self.col_scale[k];
        }
        z
    }

    pub(super) fn n(&self) -> usize {
        self.free.len()
    }

    pub(super) fn m_i(&self) -> usize {
        self.n_model_ineq + self.bound_rows.len()
    }

    pub(super) fn point(&self, x: &[f64]) -> Point {
        let z = self.full(x);
        let mut ci: Vec<f64> = self
            .model
            .ineq_constraints(&z)
            .into_iter()
            .zip(&self.row_scale)
            .map(|(g, d)| g * d)
            .collect();
        for &(k, sign, b) in &self.bound_rows {
            ci.push(sign * (x[k] - b));
        }
        Point {
            f: self.obj_scale * self.model.objective(&z),
            ce: self.model.eq_constraints(&z),
            ci,
        }
    }

    pub(super) fn derivs(&self, x: &[f64]) -> crate::error::Result<Derivs> {
        let z = self.full(x);
        let n = self.n();
        let g = self.model.objective_gradient(&z)?;
        let grad = DVector::from_iterator(
            n,
            self.free.iter().zip(&self.col_scale).map(|(&i, d)| self.obj_scale * g[i] * d),
        );
        let je_full = self.model.eq_jacobian(&z)?;
        let je = DMatrix::from_fn(je_full.nrows(), n, |r, c| je_full[(r, self.free[c])] * self.col_scale[c]);
        let ji_full = self.model.ineq_jacobian(&z)?;
        let mut ji = DMatrix::zeros(self.m_i(), n);
        for r in 0..self.n_model_ineq {
            for c in 0..n {
                ji[(r, c)] = self.row_scale[r] * ji_full[(r, self.free[c])] * self.col_scale[c];
            }
        }
        for (k, &(col, sign, _)) in self.bound_rows.iter().enumerate() {
            ji[(self.n_model_ineq + k, col)] = sign;
        }
        Ok(Derivs { grad, je, ji })
    }

    /// Hessian of `obj_factor * f + y'h + lam'g` in reduced, scaled units.
    pub(super) fn hessian(&self, x: &[f64], obj_factor: f64, y: &[f64], lam: &[f64]) -> crate::error::Result<DMatrix<f64>> {
        let z = self.full(x);
        let model_mult: Vec<f64> = lam[..self.n_model_ineq]
            .iter()
            .zip(&self.row_scale)
            .map(|(l, d)| l * d)
            .collect();
        let h = self.model.lagrangian_hessian(&z, obj_factor * self.obj_scale, y, &model_mult)?;
        let n = self.n();
        Ok(DMatrix::from_fn(n, n, |r, c| {
            h[(self.free[r], self.free[c])] * self.col_scale[r] * self.col_scale[c]
        }))
    }

    fn lagrangian_gradient(&self, d: &Derivs, y: &[f64], lam: &[f64]) -> DVector<f64> {
        &d.grad + d.je.tr_mul(&DVector::from_column_slice(y)) + d.ji.tr_mul(&DVector::from_column_slice(lam))
    }
}

/// Factorized KKT system for one iteration.
///
/// Inequality rows with a small barrier weight `sigma` are condensed into the
/// primal block; equality rows and the remaining inequality rows are kept in
/// the augmented block with diagonal `-delta_c` or `-1 / sigma`.
struct KktFactor {
    lblt: Lblt<f64>,
    n: usize,
    m_e: usize,
    /// Inequality rows kept in the augmented block.
    kept: Vec<usize>,
    ji: DMatrix<f64>,
    sigma: DVector<f64>,
    /// `sigma` with the kept rows zeroed.
    sigma_soft: DVector<f64>,
    delta_w: f64,
}

struct Step {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dlam: DVector<f64>,
    ds: DVector<f64>,
}

impl KktFactor {
    /// Solves for the Newton step given the residual blocks.
    fn step(
        &self,
        r_d: &DVector<f64>,
        r_e: &DVector<f64>,
        r_i: &DVector<f64>,
        r_c: &DVector<f64>,
        s: &DVector<f64>,
        lam: &DVector<f64>,
    ) -> Step {
        let (n, m_e) = (self.n, self.m_e);
        let t = DVector::from_iterator(
            r_i.len(),
            (0..r_i.len()).map(|j| {
                if self.sigma_soft[j] == 0.0 {
                    0.0
                } else {
                    self.sigma_soft[j] * r_i[j] - r_c[j] / s[j]
                }
            }),
        );
        let r1 = -r_d - self.ji.tr_mul(&t);
        let dim = n + m_e + self.kept.len();
        let mut rhs = Mat::<f64>::zeros(dim, 1);
        for i in 0..n {
            rhs[(i, 0)] = r1[i];
        }
        for r in 0..m_e {
            rhs[(n + r, 0)] = -r_e[r];
        }
        for (k, &j) in self.kept.iter().enumerate() {
            rhs[(n + m_e + k, 0)] = -r_i[j] + r_c[j] / lam[j];
        }
        let sol = self.lblt.solve(&rhs);
        let dx = DVector::from_iterator(n, (0..n).map(|i| sol[(i, 0)]));
        let dy = DVector::from_iterator(m_e, (0..m_e).map(|r| sol[(n + r, 0)]));
        let mut dlam = self.sigma.component_mul(&(&self.ji * &dx + r_i)) - r_c.component_div(s);
        for (k, &j) in self.kept.iter().enumerate() {
            dlam[j] = sol[(n + m_e + k, 0)];
        }
        let ds = -(r_c + s.component_mul(&dlam)).component_div(lam);
        Step { dx, dy, dlam, ds }
    }
}

/// Numbers of positive, negative and zero eigenvalues of the factorized
/// matrix. Pivots are classified by sign alone: legitimately tiny pivots such
/// as `-1 / sigma` for strongly active rows must not count as zero.
fn inertia(f: &Lblt<f64>, dim: usize) -> (usize, usize, usize) {
    let d = f.B_diag();
    let e = f.B_subdiag();
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    let mut i = 0;
    while i < dim {
        if i + 1 < dim && e[i] != 0.0 {
            let det = d[i] * d[i + 1] - e[i] * e[i];
            if !det.is_finite() || det == 0.0 {
                zero += 2;
            } else if det < 0.0 {
                pos += 1;
                neg += 1;
            } else if d[i] > 0.0 {
                pos += 2;
            } else {
                neg += 2;
            }
            i += 2;
        } else {
            if !d[i].is_finite() || d[i] == 0.0 {
                zero += 1;
            } else if d[i] > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
    }
    (pos, neg, zero)
}

fn factorize(
    h: &DMatrix<f64>,
    je: &DMatrix<f64>,
    ji: &DMatrix<f64>,
    sigma: &DVector<f64>,
    delta_last: f64,
    mu: f64,
) -> Option<KktFactor> {
    let n = h.nrows();
    let m_e = je.nrows();
    let kept: Vec<usize> = (0..sigma.len()).filter(|&j| sigma[j] > SIGMA_KEEP).collect();
    let mut sigma_soft = sigma.clone();
    for &j in &kept {
        sigma_soft[j] = 0.0;
    }
    let m_a = m_e + kept.len();
    let dim = n + m_a;

    let mut primal = h.clone();
    let mut scaled = ji.clone();
    for (r, &sg) in sigma_soft.iter().enumerate() {
        scaled.row_mut(r).scale_mut(sg);
    }
    primal += ji.tr_mul(&scaled);

    let mut k = Mat::<f64>::zeros(dim, dim);
    for j in 0..n {
        for i in j..n {
            k[(i, j)] = primal[(i, j)];
        }
    }
    for r in 0..m_e {
        for c in 0..n {
            k[(n + r, c)] = je[(r, c)];
        }
    }
    for (q, &j) in kept.iter().enumerate() {
        for c in 0..n {
            k[(n + m_e + q, c)] = ji[(j, c)];
        }
        k[(n + m_e + q, n + m_e + q)] = -1.0 / sigma[j];
    }

    let mut delta_w = 0.0;
    let mut delta_c = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += delta_w;
        }
        for r in 0..m_a {
            m[(n + r, n + r)] -= delta_c;
        }
        let f = m.lblt(Side::Lower);
        let (pos, neg, zero) = inertia(&f, dim);
        if pos == n && neg == m_a && zero == 0 {
            return Some(KktFactor {
                lblt: f,
                n,
                m_e,
                kept,
                ji: ji.clone(),
                sigma: sigma.clone(),
                sigma_soft,
                delta_w,
            });
        }
        // too few negative pivots: the constraint block is (numerically) singular
        if (zero > 0 || neg < m_a) && delta_c == 0.0 && m_a > 0 {
            delta_c = 1e-8 * mu.powf(0.25);
            continue;
        }
        delta_w = if delta_w == 0.0 {
            if delta_last > 0.0 {
                (delta_last / 3.0).max(DELTA_W_MIN)
            } else {
                DELTA_W_INIT
            }
        } else if delta_last == 0.0 && delta_w == DELTA_W_INIT {
            delta_w * 100.0
        } else {
            delta_w * 8.0
        };
        if delta_w > DELTA_W_MAX {
            return None;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Solves the NLP from `spec.z0`.
pub fn solve(spec: &NlpSpec<'_>, opts: &SolverOptions) -> NlpResult {
    solve_with_observer(spec, opts, &mut |_, _| {})
}

/// Like [`solve`], calling `observer(iteration, z)` on every accepted iterate
/// (including the starting point as iteration 0).
pub fn solve_with_observer(
    spec: &NlpSpec<'_>,
    opts: &SolverOptions,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> NlpResult {
    run(
        spec,
        opts,
        &mut |k, z| {
            observer(k, z);
            false
        },
        true,
    )
}

/// The interior-point iteration. `observer` returning `true` stops the run
/// after that iterate (status `MaxIter`).
fn run(
    spec: &NlpSpec<'_>,
    opts: &SolverOptions,
    observer: &mut dyn FnMut(usize, &[f64]) -> bool,
    allow_restoration: bool,
) -> NlpResult {
    let model = spec.model;
    let n_full = model.n_vars();
    let mut base = spec.z0.clone();
    let mut free = Vec::new();
    for i in 0..n_full {
        let (lo, hi) = (spec.lower[i], spec.upper[i]);
        if lo == hi {
            base[i] = lo;
        } else {
            free.push(i);
        }
    }
    let mut x: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let mut bound_rows = Vec::new();
    for (k, &i) in free.iter().enumerate() {
        let (lo, hi) = (spec.lower[i], spec.upper[i]);
        if lo.is_finite() {
            bound_rows.push((k, -1.0, lo));
        }
        if hi.is_finite() {
            bound_rows.push((k, 1.0, hi));
        }
        // push strictly inside finite bounds
        let push = opts.bound_push * (hi - lo).clamp(0.0, 1.0);
        if lo.is_finite() && hi.is_finite() {
            let p = push.min(0.5 * (hi - lo));
            x[k] = x[k].clamp(lo + p, hi - p);
        } else if lo.is_finite() {
            x[k] = x[k].max(lo + opts.bound_push * lo.abs().max(1.0));
        } else if hi.is_finite() {
            x[k] = x[k].min(hi - opts.bound_push * hi.abs().max(1.0));
        }
    }
    let col_scale: Vec<f64> = match &spec.var_scaling {
        Some(d) => free.iter().map(|&i| d[i]).collect(),
        None => vec![1.0; free.len()],
    };
    for (k, d) in col_scale.iter().enumerate() {
        x[k] /= d;
    }
    for row in bound_rows.iter_mut() {
        row.2 /= col_scale[row.0];
    }
    let n_model_ineq = model.n_ineq();
    let row_scale = spec
        .ineq_scaling
        .clone()
        .unwrap_or_else(|| vec![1.0; n_model_ineq]);
    let mut red = Reduced {
        model,
        free,
        base,
        bound_rows,
        row_scale,
        col_scale,
        obj_scale: 1.0,
        n_model_ineq,
    };
    let n = red.n();
    let m_e = model.n_eq();
    let m_i = red.m_i();

    let mut log = opts
        .log_path
        .as_ref()
        .and_then(|p| File::create(p).ok().map(BufWriter::new));

    let finish = |red: &Reduced, x: &[f64], y: &[f64], lam: &[f64], status, iterations, trace| {
        let z = red.full(x);
        let eq = model.eq_constraints(&z);
        let ineq = model.ineq_constraints(&z);
        NlpResult {
            objective: model.objective(&z),
            violation: constraint_violation(&eq, &ineq),
            eq_mult: y.iter().map(|v| v / red.obj_scale).collect(),
            ineq_mult: lam[..red.n_model_ineq]
                .iter()
                .zip(&red.row_scale)
                .map(|(l, d)| l * d / red.obj_scale)
                .collect(),
            z,
            iterations,
            status,
            trace,
        }
    };

    // gradient-based objective scaling
    let mut derivs = match red.derivs(&x) {
        Ok(d) => d,
        Err(_) => {
            return finish(&red, &x, &vec![0.0; m_e], &vec![0.0; m_i], NlpStatus::NumericalFailure, 0, Vec::new())
        }
    };
    let gmax = derivs.grad.amax();
    if gmax > opts.max_gradient {
        red.obj_scale = opts.max_gradient / gmax;
        derivs.grad *= red.obj_scale;
    }

    let mut mu = opts.mu_init;
    let mu_min = opts.tol / 10.0;
    let mut pt = red.point(&x);
    let mut s = DVector::from_iterator(
        m_i,
        pt.ci.iter().map(|&c| (-c).max(opts.bound_push * c.abs().max(1.0))),
    );
    let mut lam = DVector::from_iterator(m_i, s.iter().map(|&si| mu / si));
    let mut y = DVector::<f64>::zeros(m_e);
    let mut delta_last = 0.0;
    let mut bfgs = match opts.hessian {
        HessianMode::Bfgs => Some(Bfgs::new(n)),
        HessianMode::Exact => None,
    };
    let mut trace = Vec::new();
    if observer(0, &red.full(&x)) {
        return finish(&red, &x, y.as_slice(), lam.as_slice(), NlpStatus::MaxIter, 0, trace);
    }

    let theta0 = theta_of(&pt, &s);
    let theta_max = THETA_MAX_FACTOR * theta0.max(1.0);
    let theta_min = 1e-4 * theta0.max(1.0);
    let mut filter: Vec<(f64, f64)> = Vec::new();

    let mut status = NlpStatus::MaxIter;
    let mut iter = 0;
    let mut acceptable_run = 0;
    while iter < opts.max_iter {
        let y_sl = y.as_slice().to_vec();
        let lam_sl = lam.as_slice().to_vec();
        let grad_l = red.lagrangian_gradient(&derivs, &y_sl, &lam_sl);
        let r_i = DVector::from_iterator(m_i, pt.ci.iter().zip(s.iter()).map(|(c, s)| c + s));
        let r_e = DVector::from_column_slice(&pt.ce);

        let s_d = ((l1(&y_sl) + l1(&lam_sl)) / ((m_e + m_i).max(1) as f64)).max(S_MAX) / S_MAX;
        let s_c = (l1(&lam_sl) / (m_i.max(1) as f64)).max(S_MAX) / S_MAX;
        let dual_err = grad_l.amax() / s_d;
        let primal_err = inf_norm(&pt.ce).max(r_i.amax());
        let compl_err = |mu: f64| -> f64 {
            s.iter().zip(lam.iter()).fold(0.0_f64, |m, (a, b)| m.max((a * b - mu).abs())) / s_c
        };
        let orig_violation = inf_norm(&pt.ce).max(pt.ci.iter().fold(0.0, |m, &c| m.max(c)));
        if dual_err <= opts.tol * (1.0 + pt.f.abs())
            && orig_violation <= opts.tol
            && primal_err <= opts.tol.max(1e-3 * opts.tol.sqrt())
            && compl_err(0.0) <= opts.tol
        {
            status = NlpStatus::Converged;
            break;
        }
        let acceptable = opts.acceptable_tol.is_some_and(|acc| {
            dual_err <= acc * (1.0 + pt.f.abs()) && orig_violation <= opts.tol && compl_err(0.0) <= acc
        });
        acceptable_run = if acceptable { acceptable_run + 1 } else { 0 };
        if acceptable_run >= ACCEPTABLE_ITER {
            status = NlpStatus::Acceptable;
            break;
        }
        while mu > mu_min && dual_err.max(primal_err).max(compl_err(mu)) <= KAPPA_EPS * mu {
            mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
            filter.clear();
        }
        let tau = TAU_MIN.max(1.0 - mu);

        let w = match &bfgs {
            Some(b) => b.matrix().clone(),
            None => match red.hessian(&x, 1.0, &y_sl, &lam_sl) {
                Ok(w) => w,
                Err(_) => {
                    status = NlpStatus::NumericalFailure;
                    break;
                }
            },
        };
        let sigma = lam.component_div(&s);
        let r_c = DVector::from_iterator(m_i, s.iter().zip(lam.iter()).map(|(a, b)| a * b - mu));

        let mut accepted = false;
        let mut extra_reg = 0.0;
        for _attempt in 0..4 {
            let mut w_reg = w.clone();
            for i in 0..n {
                w_reg[(i, i)] += extra_reg;
            }
            let Some(kkt) = factorize(&w_reg, &derivs.je, &derivs.ji, &sigma, delta_last, mu) else {
                break;
            };
            let delta_w = kkt.delta_w + extra_reg;
            let step = kkt.step(&grad_l, &r_e, &r_i, &r_c, &s, &lam);

            // fraction to boundary
            let alpha_max = max_step(&s, &step.ds, tau);
            let alpha_dual = max_step(&lam, &step.dlam, tau);

            let theta = l1(&pt.ce) + l1(r_i.as_slice());
            let dphi = derivs.grad.dot(&step.dx)
                - mu * step.ds.iter().zip(s.iter()).map(|(d, s)| d / s).sum::<f64>();
            let phi0 = barrier_obj(&pt, &s, mu);

            let tiny = step
                .dx
                .iter()
                .zip(&x)
                .all(|(d, xi)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + xi.abs()))
                && step.ds.iter().zip(s.iter()).all(|(d, si)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + si));

            let switching = |alpha: f64| dphi < 0.0 && alpha * (-dphi).powf(S_PHI) > DELTA * theta.powf(S_THETA);
            // acceptance of a trial pair against the current point; returns
            // whether the filter should be augmented
            let acceptable = |theta_t: f64, phi_t: f64, alpha: f64, filter: &[(f64, f64)]| -> Option<bool> {
                if !phi_t.is_finite() || theta_t > theta_max {
                    return None;
                }
                let slack = 10.0 * f64::EPSILON * phi0.abs();
                if filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf) {
                    return None;
                }
                if theta <= theta_min && switching(alpha) {
                    return (phi_t <= phi0 + ETA_PHI * alpha * dphi + slack).then_some(false);
                }
                let sufficient = theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi0 - GAMMA_PHI * theta + slack;
                if !sufficient {
                    return None;
                }
                let armijo = switching(alpha) && phi_t <= phi0 + ETA_PHI * alpha * dphi + slack;
                Some(!armijo)
            };

            let mut alpha = alpha_max;
            #[allow(clippy::type_complexity)]
            let mut found: Option<(Vec<f64>, DVector<f64>, Point, f64, f64, bool)> = None;
            let mut first = true;
            loop {
                let xt: Vec<f64> = x.iter().zip(step.dx.iter()).map(|(a, d)| a + alpha * d).collect();
                let st = &s + &step.ds * alpha;
                let pt_t = red.point(&xt);
                let theta_t = theta_of(&pt_t, &st);
                let phi_t = barrier_obj(&pt_t, &st, mu);
                if tiny {
                    found = Some((xt, st, pt_t, alpha, phi_t, false));
                    break;
                }
                if let Some(aug) = acceptable(theta_t, phi_t, alpha, &filter) {
                    found = Some((xt, st, pt_t, alpha, phi_t, aug));
                    break;
                }
                if first && theta_t >= theta {
                    // second-order corrections on the constraint residuals
                    let mut ce_soc: DVector<f64> = DVector::from_iterator(
                        m_e,
                        pt.ce.iter().zip(&pt_t.ce).map(|(a, b)| alpha * a + b),
                    );
                    let mut ci_soc: DVector<f64> = DVector::from_iterator(
                        m_i,
                        r_i.iter().zip(pt_t.ci.iter().zip(st.iter())).map(|(a, (c, si))| alpha * a + c + si),
                    );
                    let mut theta_prev = theta_t;
                    for _ in 0..MAX_SOC {
                        let soc = kkt.step(&grad_l, &ce_soc, &ci_soc, &r_c, &s, &lam);
                        let a_soc = max_step(&s, &soc.ds, tau);
                        let xs: Vec<f64> = x.iter().zip(soc.dx.iter()).map(|(a, d)| a + a_soc * d).collect();
                        let ss = &s + &soc.ds * a_soc;
                        let pt_s = red.point(&xs);
                        let theta_s = theta_of(&pt_s, &ss);
                        let phi_s = barrier_obj(&pt_s, &ss, mu);
                        if let Some(aug) = acceptable(theta_s, phi_s, alpha, &filter) {
                            found = Some((xs, ss, pt_s, a_soc, phi_s, aug));
                            break;
                        }
                        if theta_s > SOC_KAPPA * theta_prev {
                            break;
                        }
                        theta_prev = theta_s;
                        ce_soc = ce_soc * a_soc + DVector::from_column_slice(&pt_s.ce);
                        ci_soc = ci_soc * a_soc
                            + DVector::from_iterator(m_i, pt_s.ci.iter().zip(ss.iter()).map(|(c, si)| c + si));
                    }
                    if found.is_some() {
                        break;
                    }
                }
                first = false;
                alpha *= 0.5;
                if alpha < ALPHA_MIN {
                    break;
                }
            }
            let Some((xt, st, pt_t, alpha, phi_t, augment)) = found else {
                extra_reg = if extra_reg == 0.0 { delta_w.max(1e-4) * 100.0 } else { extra_reg * 100.0 };
                continue;
            };
            delta_last = kkt.delta_w;
            if augment {
                filter.push(((1.0 - GAMMA_THETA) * theta, phi0 - GAMMA_PHI * theta));
            }

            let x_old = x.clone();
            let grad_old = bfgs.as_ref().map(|_| grad_l.clone());
            x = xt;
            s = st;
            pt = pt_t;
            y += &step.dy * alpha;
            lam += &step.dlam * alpha_dual;
            for j in 0..m_i {
                let lo = mu / (KAPPA_SIGMA * s[j]);
                let hi = KAPPA_SIGMA * mu / s[j];
                lam[j] = lam[j].clamp(lo, hi);
            }
            derivs = match red.derivs(&x) {
                Ok(d) => d,
                Err(_) => {
                    status = NlpStatus::NumericalFailure;
                    iter += 1;
                    return finish(&red, &x, y.as_slice(), lam.as_slice(), status, iter, trace);
                }
            };
            if let (Some(b), Some(g_old)) = (bfgs.as_mut(), grad_old) {
                // gradient change of the Lagrangian at the new multipliers
                let y_sl = y.as_slice().to_vec();
                let lam_sl = lam.as_slice().to_vec();
                let g_new = red.lagrangian_gradient(&derivs, &y_sl, &lam_sl);
                let old_d = red.derivs(&x_old).ok();
                let g_old_new_mult = old_d
                    .map(|d| red.lagrangian_gradient(&d, &y_sl, &lam_sl))
                    .unwrap_or(g_old);
                let sv: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = (g_new - g_old_new_mult).iter().copied().collect();
                b.update(&sv, &yv);
            }
            iter += 1;
            let z_full = red.full(&x);
            let stop = observer(iter, &z_full);
            let rec = IterationRecord {
                iter,
                z_norm: z_full.iter().map(|v| v * v).sum::<f64>().sqrt(),
                objective: pt.f / red.obj_scale,
                violation: inf_norm(&pt.ce).max(pt.ci.iter().fold(0.0, |m, &c| m.max(c))),
                mu,
                step: alpha,
                regularization: delta_w,
                barrier_before: phi0,
                barrier_after: phi_t,
                dual_infeasibility: dual_err,
            };
            if let Some(w) = log.as_mut() {
                let _ = serde_json::to_writer(&mut *w, &rec);
                let _ = w.write_all(b"\n");
            }
            trace.push(rec);
            accepted = true;
            if stop {
                return finish(&red, &x, y.as_slice(), lam.as_slice(), NlpStatus::MaxIter, iter, trace);
            }
            break;
        }
        if !accepted {
            let theta = theta_of(&pt, &s);
            if allow_restoration && theta > opts.tol {
                filter.push(((1.0 - GAMMA_THETA) * theta, barrier_obj(&pt, &s, mu) - GAMMA_PHI * theta));
                if let Some((xr, inner)) = restore(&red, &x, mu, theta, &filter, opts) {
                    x = xr;
                    pt = red.point(&x);
                    s = restored_slacks(&pt, mu);
                    lam = DVector::from_iterator(m_i, s.iter().map(|&si| mu / si));
                    y = DVector::zeros(m_e);
                    delta_last = 0.0;
                    derivs = match red.derivs(&x) {
                        Ok(d) => d,
                        Err(_) => {
                            status = NlpStatus::NumericalFailure;
                            break;
                        }
                    };
                    if let Some(b) = bfgs.as_mut() {
                        *b = Bfgs::new(n);
                    }
                    iter += inner;
                    if observer(iter, &red.full(&x)) {
                        break;
                    }
                    continue;
                }
            }
            let theta = l1(&pt.ce) + l1(r_i.as_slice());
            status = if acceptable_run > 0 {
                NlpStatus::Acceptable
            } else if theta > opts.tol.sqrt() {
                NlpStatus::Infeasible
            } else {
                NlpStatus::NumericalFailure
            };
            break;
        }
    }
    if let Some(w) = log.as_mut() {
        let _ = w.flush();
    }
    finish(&red, &x, y.as_slice(), lam.as_slice(), status, iter, trace)
}

/// Slacks matching the constraint values, floored at `RESTORED_SLACK * mu`.
fn restored_slacks(p: &Point, mu: f64) -> DVector<f64> {
    DVector::from_iterator(p.ci.len(), p.ci.iter().map(|&c| (-c).max(RESTORED_SLACK * mu)))
}

/// Feasibility restoration from `x`: runs the interior-point method on the
/// elastic problem until the original violation drops below
/// `RESTORATION_DECREASE * theta_r` at a point acceptable to `filter`.
/// Returns the point and the number of inner iterations.
fn restore(
    red: &Reduced,
    x: &[f64],
    mu: f64,
    theta_r: f64,
    filter: &[(f64, f64)],
    opts: &SolverOptions,
) -> Option<(Vec<f64>, usize)> {
    let rm = RestorationModel::new(red, x.to_vec(), mu.sqrt());
    let pt = red.point(x);
    let c_max = inf_norm(&pt.ce).max(pt.ci.iter().fold(0.0, |m, &c| m.max(c)));
    let (lo, hi) = rm.bounds();
    let spec = NlpSpec::new(&rm, rm.start(mu)).with_bounds(lo, hi);
    let r_opts = SolverOptions {
        mu_init: mu.max(c_max),
        bound_push: opts.bound_push.min(1e-8),
        max_iter: RESTORATION_MAX_ITER.min(opts.max_iter),
        log_path: None,
        acceptable_tol: None,
        ..opts.clone()
    };
    let n = rm.n_x();
    let mut found = None;
    let result = run(
        &spec,
        &r_opts,
        &mut |_, v| {
            let xt = &v[..n];
            let pt = red.point(xt);
            let st = restored_slacks(&pt, mu);
            let theta_t = theta_of(&pt, &st);
            let phi_t = barrier_obj(&pt, &st, mu);
            let ok = phi_t.is_finite()
                && theta_t <= RESTORATION_DECREASE * theta_r
                && !filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf);
            if ok {
                found = Some(xt.to_vec());
            }
            ok
        },
        false,
    );
    found.map(|x| (x, result.iterations.max(1)))
}

fn barrier_obj(p: &Point, s: &DVector<f64>, mu: f64) -> f64 {
    p.f - mu * s.iter().map(|v| v.ln()).sum::<f64>()
}

fn theta_of(p: &Point, s: &DVector<f64>) -> f64 {
    l1(&p.ce) + p.ci.iter().zip(s.iter()).map(|(c, s)| (c + s).abs()).sum::<f64>()
}

/// Largest step in (0, 1] keeping `v + a dv >= (1 - tau) v`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>, tau: f64) -> f64 {
    v.iter().zip(dv.iter()).fold(1.0, |a, (&vi, &di)| {
        if di < 0.0 {
            a.min(-tau * vi / di)
        } else {
            a
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::{AdNlp, AdProblem, NlpValues, Scalar};
    use super::*;

    struct ActiveBound;
    impl AdProblem for ActiveBound {
        fn n_vars(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, z: &[S]) -> NlpValues<S> {
            NlpValues {
                objective: (z[0].clone() - 1.0).square(),
                eq: vec![],
                ineq: vec![-z[0].clone() + 2.0],
            }
        }
    }

    struct Projection;
    impl AdProblem for Projection {
        fn n_vars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, z: &[S]) -> NlpValues<S> {
            NlpValues {
                objective: z[0].square() + z[1].square(),
                eq: vec![z[0].clone() + z[1].clone() - 1.0],
                ineq: vec![],
            }
        }
    }

    struct Rosenbrock;
    impl AdProblem for Rosenbrock {
        fn n_vars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, z: &[S]) -> NlpValues<S> {
            let a = z[1].clone() - z[0].square();
            let b = -z[0].clone() + 1.0;
            NlpValues {
                objective: a.square() * 100.0 + b.square(),
                eq: vec![],
                ineq: vec![],
            }
        }
    }

    #[test]
    fn active_lower_bound() {
        let m = AdNlp::new(ActiveBound);
        let r = solve(&NlpSpec::new(&m, vec![0.0]), &SolverOptions::default());
        assert_eq!(r.status, NlpStatus::Converged, "{r:?}");
        assert!((r.z[0] - 2.0).abs() < 1e-8, "{}", r.z[0]);
        assert!((r.objective - 1.0).abs() < 1e-8);
        assert!((r.ineq_mult[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn equality_projection() {
        let m = AdNlp::new(Projection);
        let r = solve(&NlpSpec::new(&m, vec![3.0, -1.0]), &SolverOptions::default());
        assert_eq!(r.status, NlpStatus::Converged);
        assert!((r.z[0] - 0.5).abs() < 1e-9 && (r.z[1] - 0.5).abs() < 1e-9, "{:?}", r.z);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let m = AdNlp::new(Rosenbrock);
        let r = solve(&NlpSpec::new(&m, vec![-1.2, 1.0]), &SolverOptions::default());
        assert_eq!(r.status, NlpStatus::Converged);
        assert!((r.z[0] - 1.0).abs() < 1e-8 && (r.z[1] - 1.0).abs() < 1e-8, "{:?}", r.z);
    }

    #[test]
    fn rosenbrock_bfgs() {
        let m = AdNlp::new(Rosenbrock);
        let opts = SolverOptions {
            hessian: HessianMode::Bfgs,
            ..Default::default()
        };
        let r = solve(&NlpSpec::new(&m, vec![-1.2, 1.0]), &opts);
        assert_eq!(r.status, NlpStatus::Converged, "{:?}", r.iterations);
        assert!((r.z[0] - 1.0).abs() < 1e-6, "{:?}", r.z);
    }

    #[test]
    fn box_bounds_and_pins() {
        // min (x-3)^2 + (y+1)^2 with x <= 1 and y pinned at 0.5
        let m = AdNlp::new(Projection2);
        let spec = NlpSpec::new(&m, vec![0.0, 0.0])
            .with_bounds(vec![f64::NEG_INFINITY, 0.5], vec![1.0, 0.5]);
        let r = solve(&spec, &SolverOptions::default());
        assert_eq!(r.status, NlpStatus::Converged);
        assert!((r.z[0] - 1.0).abs() < 1e-8);
        assert_eq!(r.z[1], 0.5);
    }

    struct Projection2;
    impl AdProblem for Projection2 {
        fn n_vars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, z: &[S]) -> NlpValues<S> {
            NlpValues {
                objective: (z[0].clone() - 3.0).square() + (z[1].clone() + 1.0).square(),
                eq: vec![],
                ineq: vec![],
            }
        }
    }

    #[test]
    fn unconstrained_objective_is_monotone() {
        let m = AdNlp::new(Rosenbrock);
        let r = solve(&NlpSpec::new(&m, vec![-1.2, 1.0]), &SolverOptions::default());
        for rec in &r.trace {
            assert!(
                rec.barrier_after <= rec.barrier_before + 1e-12 * rec.barrier_before.abs().max(1.0),
                "{rec:?}"
            );
        }
    }
}
