//! Dense nonlinear programming: dual-number derivatives and a primal-dual
//! interior-point solver for
//!
//! ```text
//! min f(z)  s.t.  h(z) = 0,  g(z) <= 0,  lower <= z <= upper
//! ```
//!
//! Problems plug in through [`NlpModel`]. Small problems written once against
//! [`Scalar`] can use [`AdNlp`] to get all derivatives for free.

pub mod bfgs;
pub mod derivatives;
pub mod dual;
mod ipm;
mod restoration;

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
pub use derivatives::{gradient, hessian, jacobian};
pub use dual::{Dual, Dual1, Dual2, Scalar};
pub use ipm::{solve, solve_with_observer};

/// Evaluation interface consumed by the solver. Jacobians are `rows × n_vars`.
pub trait NlpModel: Sync {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;

    fn objective(&self, z: &[f64]) -> f64;
    fn eq_constraints(&self, z: &[f64]) -> Vec<f64>;
    fn ineq_constraints(&self, z: &[f64]) -> Vec<f64>;

    fn objective_gradient(&self, z: &[f64]) -> Result<Vec<f64>>;
    fn eq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>>;
    fn ineq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>>;

    /// Hessian of `obj_factor * f + eq_mult' h + ineq_mult' g`.
    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
    ) -> Result<DMatrix<f64>>;
}

/// Objective and constraint values of a problem written generically.
pub struct NlpValues<S> {
    pub objective: S,
    pub eq: Vec<S>,
    pub ineq: Vec<S>,
}

/// A problem defined by one generic evaluation routine.
pub trait AdProblem: Sync {
    fn n_vars(&self) -> usize;
    fn eval<S: Scalar>(&self, z: &[S]) -> NlpValues<S>;
}

/// Adapter giving an [`AdProblem`] dense dual-number derivatives.
pub struct AdNlp<P> {
    pub problem: P,
    n_eq: usize,
    n_ineq: usize,
}

impl<P: AdProblem> AdNlp<P> {
    pub fn new(problem: P) -> Self {
        let probe = problem.eval(&vec![0.0; problem.n_vars()]);
        AdNlp {
            n_eq: probe.eq.len(),
            n_ineq: probe.ineq.len(),
            problem,
        }
    }
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, n: usize) -> DMatrix<f64> {
    let m = rows.len();
    DMatrix::from_fn(m, n, |i, j| rows[i][j])
}

impl<P: AdProblem> NlpModel for AdNlp<P> {
    fn n_vars(&self) -> usize {
        self.problem.n_vars()
    }
    fn n_eq(&self) -> usize {
        self.n_eq
    }
    fn n_ineq(&self) -> usize {
        self.n_ineq
    }
    fn objective(&self, z: &[f64]) -> f64 {
        self.problem.eval(z).objective
    }
    fn eq_constraints(&self, z: &[f64]) -> Vec<f64> {
        self.problem.eval(z).eq
    }
    fn ineq_constraints(&self, z: &[f64]) -> Vec<f64> {
        self.problem.eval(z).ineq
    }
    fn objective_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        gradient(|d| self.problem.eval(d).objective, z)
    }
    fn eq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        Ok(rows_to_matrix(jacobian(|d| self.problem.eval(d).eq, z)?, z.len()))
    }
    fn ineq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        Ok(rows_to_matrix(jacobian(|d| self.problem.eval(d).ineq, z)?, z.len()))
    }
    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
    ) -> Result<DMatrix<f64>> {
        let n = z.len();
        let h = hessian(
            |d| {
                let v = self.problem.eval(d);
                let mut acc = v.objective * obj_factor;
                for (c, &m) in v.eq.into_iter().zip(eq_mult) {
                    acc = acc + c * m;
                }
                for (c, &m) in v.ineq.into_iter().zip(ineq_mult) {
                    acc = acc + c * m;
                }
                acc
            },
            z,
        )?;
        Ok(DMatrix::from_row_slice(n, n, &h))
    }
}

/// Hessian source for the Newton step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HessianMode {
    /// Exact Lagrangian Hessian from the model.
    #[default]
    Exact,
    /// Damped BFGS approximation built from gradient differences.
    Bfgs,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub hessian: HessianMode,
    /// Initial barrier parameter.
    pub mu_init: f64,
    /// Minimum distance of the starting point and slacks from their bounds,
    /// relative to `max(1, |bound|)`.
    pub bound_push: f64,
    /// Cap applied to the objective gradient by automatic scaling.
    pub max_gradient: f64,
    /// Looser relative optimality level: a feasible point meeting it for 15
    /// consecutive iterations, or at a line-search failure, ends the run
    /// with [`NlpStatus::Acceptable`]. `None` disables it.
    pub acceptable_tol: Option<f64>,
    /// JSON-lines iteration log.
    pub log_path: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 3000,
            hessian: HessianMode::Exact,
            mu_init: 0.1,
            bound_push: 1e-2,
            max_gradient: 100.0,
            acceptable_tol: None,
            log_path: None,
        }
    }
}

/// A problem instance handed to [`solve`].
pub struct NlpSpec<'a> {
    pub model: &'a dyn NlpModel,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub z0: Vec<f64>,
    /// Positive per-row factors applied to the inequality constraints inside
    /// the solver. `None` leaves rows unscaled.
    pub ineq_scaling: Option<Vec<f64>>,
    /// Positive per-variable units: the solver iterates on `z / var_scaling`.
    pub var_scaling: Option<Vec<f64>>,
}

impl<'a> NlpSpec<'a> {
    pub fn new(model: &'a dyn NlpModel, z0: Vec<f64>) -> Self {
        let n = model.n_vars();
        NlpSpec {
            model,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            z0,
            ineq_scaling: None,
            var_scaling: None,
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NlpStatus {
    Converged,
    /// Feasible, with optimality met only to a looser level.
    Acceptable,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

/// One accepted interior-point iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub z_norm: f64,
    pub objective: f64,
    pub violation: f64,
    pub mu: f64,
    pub step: f64,
    pub regularization: f64,
    pub barrier_before: f64,
    pub barrier_after: f64,
    /// Scaled dual infeasibility at the start of the iteration.
    pub dual_infeasibility: f64,
}

#[derive(Clone, Debug)]
pub struct NlpResult {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Infinity norm of `max(g, 0)` and `|h|`.
    pub violation: f64,
    pub eq_mult: Vec<f64>,
    pub ineq_mult: Vec<f64>,
    pub iterations: usize,
    pub status: NlpStatus,
    pub trace: Vec<IterationRecord>,
}

impl NlpResult {
    pub fn converged(&self) -> bool {
        matches!(self.status, NlpStatus::Converged | NlpStatus::Acceptable)
    }
}

/// Infinity-norm violation of `h = 0`, `g <= 0`.
pub fn constraint_violation(eq: &[f64], ineq: &[f64]) -> f64 {
    eq.iter()
        .map(|v| v.abs())
        .chain(ineq.iter().map(|v| v.max(0.0)))
        .fold(0.0, f64::max)
}

/// Hessian of the Lagrangian at `z` for the given multipliers.
pub fn lagrangian_hessian(
    model: &dyn NlpModel,
    z: &[f64],
    eq_mult: &[f64],
    ineq_mult: &[f64],
) -> Result<DMatrix<f64>> {
    model.lagrangian_hessian(z, 1.0, eq_mult, ineq_mult)
}
