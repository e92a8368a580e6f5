//! Continuous-time optimal control problems in Bolza form:
//!
//! ```text
//! min  mayer(x(t0), x(tf), t0, tf) + ∫ lagrange(x, u, t) dt
//! s.t. dynamics(ẋ, x, u, t) = 0
//!      path_ineq(ẋ, x, u, t) <= 0
//!      boundary_eq(x(t0), x(tf), t0, tf) = 0
//!      boundary_ineq(x(t0), x(tf), t0, tf) <= 0
//! ```
//!
//! The horizon `[t0, tf]` is fixed problem data.

use serde::{Deserialize, Serialize};

use crate::nlp::Scalar;

/// Dimension data of a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_f: usize,
    pub n_g: usize,
    pub n_e: usize,
    pub n_i: usize,
}

/// A Bolza problem. Every evaluator is generic over [`Scalar`] so that the
/// transcription can differentiate it with dual numbers; implementations must
/// be pure functions of their arguments.
pub trait OcpProblem: Sync + Send {
    fn dims(&self) -> Dims;
    fn t0(&self) -> f64;
    fn tf(&self) -> f64;

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], u: &[S], t: &S) -> Vec<S>;

    fn path_ineq<S: Scalar>(&self, _xdot: &[S], _x: &[S], _u: &[S], _t: &S) -> Vec<S> {
        Vec::new()
    }

    fn boundary_eq<S: Scalar>(&self, _x0: &[S], _xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        Vec::new()
    }

    fn boundary_ineq<S: Scalar>(&self, _x0: &[S], _xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        Vec::new()
    }

    fn mayer<S: Scalar>(&self, _x0: &[S], _xf: &[S], _t0: &S, _tf: &S) -> S {
        S::zero()
    }

    fn lagrange<S: Scalar>(&self, _x: &[S], _u: &[S], _t: &S) -> S {
        S::zero()
    }

    /// Guess for the boundary states `(x(t0), x(tf))`, used to build the
    /// first-round initial trajectory by linear interpolation.
    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// A dimension mismatch found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub function: String,
    pub expected: usize,
    pub actual: usize,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "`{}` returned {} values, expected {}",
            self.function, self.actual, self.expected
        )
    }
}

/// Probes every evaluator at zero vectors and `t0` and reports output lengths
/// that disagree with [`OcpProblem::dims`]. A non-increasing horizon is
/// reported as a `horizon` diagnostic with expected 1 and actual 0.
pub fn validate<P: OcpProblem>(problem: &P) -> Vec<Diagnostic> {
    let d = problem.dims();
    let x = vec![0.0; d.n_x];
    let u = vec![0.0; d.n_u];
    let t0 = problem.t0();
    let tf = problem.tf();
    let mut out = Vec::new();
    let mut check = |name: &str, expected: usize, actual: usize| {
        if expected != actual {
            out.push(Diagnostic {
                function: name.to_string(),
                expected,
                actual,
            });
        }
    };
    check("dynamics", d.n_f, problem.dynamics(&x, &x, &u, &t0).len());
    check("path_ineq", d.n_g, problem.path_ineq(&x, &x, &u, &t0).len());
    check("boundary_eq", d.n_e, problem.boundary_eq(&x, &x, &t0, &tf).len());
    check("boundary_ineq", d.n_i, problem.boundary_ineq(&x, &x, &t0, &tf).len());
    if !(tf > t0) {
        check("horizon", 1, 0);
    }
    out
}

/// Double integrator `p̈ = u` with `|u| <= u_max`, driving `(p, ṗ)` from
/// `(0, 1)` to rest at the origin while minimizing `∫ p²`. The optimal
/// control chatters before reaching the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Fuller {
    pub horizon: f64,
    pub u_max: f64,
}

impl Default for Fuller {
    fn default() -> Self {
        Fuller {
            horizon: 300.0,
            u_max: 0.01,
        }
    }
}

pub fn fuller_problem() -> Fuller {
    Fuller::default()
}

impl OcpProblem for Fuller {
    fn dims(&self) -> Dims {
        Dims {
            n_x: 2,
            n_u: 1,
            n_f: 2,
            n_g: 2,
            n_e: 4,
            n_i: 0,
        }
    }

    fn t0(&self) -> f64 {
        0.0
    }

    fn tf(&self) -> f64 {
        self.horizon
    }

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], u: &[S], _t: &S) -> Vec<S> {
        vec![
            xdot[0].clone() - x[1].clone(),
            xdot[1].clone() - u[0].clone(),
        ]
    }

    fn path_ineq<S: Scalar>(&self, _xdot: &[S], _x: &[S], u: &[S], _t: &S) -> Vec<S> {
        vec![u[0].clone() - self.u_max, -u[0].clone() - self.u_max]
    }

    fn boundary_eq<S: Scalar>(&self, x0: &[S], xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        vec![x0[0].clone(), x0[1].clone() - 1.0, xf[0].clone(), xf[1].clone()]
    }

    fn lagrange<S: Scalar>(&self, x: &[S], _u: &[S], _t: &S) -> S {
        x[0].square()
    }

    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![0.0, 1.0], vec![0.0, 0.0]))
    }
}
