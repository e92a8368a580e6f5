//! Built-in benchmark problems, addressable by name.
//!
//! | name | problem | oracle |
//! |------|---------|--------|
//! | `fuller` | chattering double integrator, `T = 300` | none |
//! | `exp_growth` | `ẋ = x`, `x(0) = 1` on `[0, 1]` | `e^t` |
//! | `double_integrator_energy` | `ẍ = u`, `min ∫ u²`, rest-to-rest on `[0, 1]` | cubic |
//! | `periodic_growth` | `ẋ = cos(t) x`, `x(0) = 1` on `[0, 2π]` | `e^{sin t}` |

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nlp::Scalar;
use crate::ocp_model::{Dims, Fuller, OcpProblem};

/// `ẋ = x`, `x(t0) = 1`, no inputs and no cost.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpGrowth {
    pub t0: f64,
    pub tf: f64,
}

impl Default for ExpGrowth {
    fn default() -> Self {
        ExpGrowth { t0: 0.0, tf: 1.0 }
    }
}

impl ExpGrowth {
    pub fn oracle(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![(t - self.t0).exp()], Vec::new())
    }
}

impl OcpProblem for ExpGrowth {
    fn dims(&self) -> Dims {
        Dims { n_x: 1, n_u: 0, n_f: 1, n_g: 0, n_e: 1, n_i: 0 }
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn tf(&self) -> f64 {
        self.tf
    }

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], _u: &[S], _t: &S) -> Vec<S> {
        vec![xdot[0].clone() - x[0].clone()]
    }

    fn boundary_eq<S: Scalar>(&self, x0: &[S], _xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        vec![x0[0].clone() - 1.0]
    }

    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![1.0], vec![(self.tf - self.t0).exp()]))
    }
}

/// `ẍ = u` from `(x0, v0)` to `(xf, vf)` minimizing `∫ u²`. States are
/// `(x, ẋ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleIntegratorEnergy {
    pub tf: f64,
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Default for DoubleIntegratorEnergy {
    fn default() -> Self {
        DoubleIntegratorEnergy {
            tf: 1.0,
            start: [0.0, 0.0],
            end: [1.0, 0.0],
        }
    }
}

impl DoubleIntegratorEnergy {
    /// Coefficients `c` of the optimal position `Σ c_k t^k`. Stationarity
    /// makes `u` affine, so the position is the cubic matching the four
    /// boundary values.
    pub fn coefficients(&self) -> [f64; 4] {
        let t = self.tf;
        let m = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            1.0, t, t * t, t * t * t,
            0.0, 1.0, 2.0 * t, 3.0 * t * t,
        );
        let rhs = Vector4::new(self.start[0], self.start[1], self.end[0], self.end[1]);
        let c = m.lu().solve(&rhs).expect("positive horizon gives a regular system");
        [c[0], c[1], c[2], c[3]]
    }

    pub fn oracle(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.coefficients();
        let x = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        let v = c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]);
        let u = 2.0 * c[2] + 6.0 * t * c[3];
        (vec![x, v], vec![u])
    }

    /// `∫ u²` of the oracle, integrated exactly.
    pub fn optimal_cost(&self) -> f64 {
        let c = self.coefficients();
        let (a, b) = (2.0 * c[2], 6.0 * c[3]);
        let t = self.tf;
        a * a * t + a * b * t * t + b * b * t * t * t / 3.0
    }
}

impl OcpProblem for DoubleIntegratorEnergy {
    fn dims(&self) -> Dims {
        Dims { n_x: 2, n_u: 1, n_f: 2, n_g: 0, n_e: 4, n_i: 0 }
    }

    fn t0(&self) -> f64 {
        0.0
    }

    fn tf(&self) -> f64 {
        self.tf
    }

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], u: &[S], _t: &S) -> Vec<S> {
        vec![xdot[0].clone() - x[1].clone(), xdot[1].clone() - u[0].clone()]
    }

    fn boundary_eq<S: Scalar>(&self, x0: &[S], xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        vec![
            x0[0].clone() - self.start[0],
            x0[1].clone() - self.start[1],
            xf[0].clone() - self.end[0],
            xf[1].clone() - self.end[1],
        ]
    }

    fn lagrange<S: Scalar>(&self, _x: &[S], u: &[S], _t: &S) -> S {
        u[0].square()
    }

    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.start.to_vec(), self.end.to_vec()))
    }
}

/// `ẋ = cos(t) x`, `x(0) = 1`: smooth but not polynomial in `t`, so the
/// quadrature error does not vanish at low order.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrowth {
    pub tf: f64,
}

impl Default for PeriodicGrowth {
    fn default() -> Self {
        PeriodicGrowth { tf: 2.0 * std::f64::consts::PI }
    }
}

impl PeriodicGrowth {
    pub fn oracle(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![t.sin().exp()], Vec::new())
    }
}

impl OcpProblem for PeriodicGrowth {
    fn dims(&self) -> Dims {
        Dims { n_x: 1, n_u: 0, n_f: 1, n_g: 0, n_e: 1, n_i: 0 }
    }

    fn t0(&self) -> f64 {
        0.0
    }

    fn tf(&self) -> f64 {
        self.tf
    }

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], _u: &[S], t: &S) -> Vec<S> {
        vec![xdot[0].clone() - t.cos() * x[0].clone()]
    }

    fn boundary_eq<S: Scalar>(&self, x0: &[S], _xf: &[S], _t0: &S, _tf: &S) -> Vec<S> {
        vec![x0[0].clone() - 1.0]
    }

    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![1.0], vec![self.tf.sin().exp()]))
    }
}

/// Any registry problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Fuller(Fuller),
    ExpGrowth(ExpGrowth),
    DoubleIntegratorEnergy(DoubleIntegratorEnergy),
    PeriodicGrowth(PeriodicGrowth),
}

macro_rules! delegate {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Fuller($p) => $e,
            Problem::ExpGrowth($p) => $e,
            Problem::DoubleIntegratorEnergy($p) => $e,
            Problem::PeriodicGrowth($p) => $e,
        }
    };
}

impl OcpProblem for Problem {
    fn dims(&self) -> Dims {
        delegate!(self, p => p.dims())
    }

    fn t0(&self) -> f64 {
        delegate!(self, p => p.t0())
    }

    fn tf(&self) -> f64 {
        delegate!(self, p => p.tf())
    }

    fn dynamics<S: Scalar>(&self, xdot: &[S], x: &[S], u: &[S], t: &S) -> Vec<S> {
        delegate!(self, p => p.dynamics(xdot, x, u, t))
    }

    fn path_ineq<S: Scalar>(&self, xdot: &[S], x: &[S], u: &[S], t: &S) -> Vec<S> {
        delegate!(self, p => p.path_ineq(xdot, x, u, t))
    }

    fn boundary_eq<S: Scalar>(&self, x0: &[S], xf: &[S], t0: &S, tf: &S) -> Vec<S> {
        delegate!(self, p => p.boundary_eq(x0, xf, t0, tf))
    }

    fn boundary_ineq<S: Scalar>(&self, x0: &[S], xf: &[S], t0: &S, tf: &S) -> Vec<S> {
        delegate!(self, p => p.boundary_ineq(x0, xf, t0, tf))
    }

    fn mayer<S: Scalar>(&self, x0: &[S], xf: &[S], t0: &S, tf: &S) -> S {
        delegate!(self, p => p.mayer(x0, xf, t0, tf))
    }

    fn lagrange<S: Scalar>(&self, x: &[S], u: &[S], t: &S) -> S {
        delegate!(self, p => p.lagrange(x, u, t))
    }

    fn boundary_guess(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        delegate!(self, p => p.boundary_guess())
    }
}

impl Problem {
    /// Analytic `(x(t), u(t))`, when known.
    pub fn oracle(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Problem::Fuller(_) => None,
            Problem::ExpGrowth(p) => Some(p.oracle(t)),
            Problem::DoubleIntegratorEnergy(p) => Some(p.oracle(t)),
            Problem::PeriodicGrowth(p) => Some(p.oracle(t)),
        }
    }

    pub fn has_oracle(&self) -> bool {
        !matches!(self, Problem::Fuller(_))
    }

    /// Time derivative of the oracle state.
    pub fn oracle_rate(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            Problem::Fuller(_) => None,
            Problem::ExpGrowth(p) => Some(p.oracle(t).0),
            Problem::DoubleIntegratorEnergy(p) => {
                let (x, u) = p.oracle(t);
                Some(vec![x[1], u[0]])
            }
            Problem::PeriodicGrowth(p) => Some(vec![t.cos() * p.oracle(t).0[0]]),
        }
    }
}

/// A cost value together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceCost {
    pub value: f64,
    pub provenance: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub problem: Problem,
    pub reference_cost: Option<ReferenceCost>,
}

impl BenchmarkEntry {
    pub fn oracle(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.problem.oracle(t)
    }
}

/// Fuller cost from `cargo run --release --example fuller_reference fixed`.
pub const FULLER_REFERENCE_COST: f64 = 268198.647322149;
const FULLER_PROVENANCE: &str = "self-solve: residual then cost solve, fixed mesh, N=120, a=2, b=1, Q=3, \
    eps_tol=1e-12, NLP tol 1e-10 (residual eps_r 9.64e-13, cost phase converged in 893 iterations)";

pub fn registry() -> Vec<BenchmarkEntry> {
    let di = DoubleIntegratorEnergy::default();
    vec![
        BenchmarkEntry {
            name: "fuller",
            description: "p'' = u, |u| <= 0.01, (p, p')(0) = (0, 1), (p, p')(300) = 0, min ∫ p²",
            problem: Problem::Fuller(Fuller::default()),
            reference_cost: Some(ReferenceCost {
                value: FULLER_REFERENCE_COST,
                provenance: FULLER_PROVENANCE,
            }),
        },
        BenchmarkEntry {
            name: "exp_growth",
            description: "x' = x, x(0) = 1 on [0, 1]",
            problem: Problem::ExpGrowth(ExpGrowth::default()),
            reference_cost: Some(ReferenceCost {
                value: 0.0,
                provenance: "no cost term",
            }),
        },
        BenchmarkEntry {
            name: "double_integrator_energy",
            description: "x'' = u, min ∫ u², (x, x')(0) = (0, 0), (x, x')(1) = (1, 0)",
            reference_cost: Some(ReferenceCost {
                value: di.optimal_cost(),
                provenance: "analytic minimum-energy cubic",
            }),
            problem: Problem::DoubleIntegratorEnergy(di),
        },
        BenchmarkEntry {
            name: "periodic_growth",
            description: "x' = cos(t) x, x(0) = 1 on [0, 2π]",
            problem: Problem::PeriodicGrowth(PeriodicGrowth::default()),
            reference_cost: Some(ReferenceCost {
                value: 0.0,
                provenance: "no cost term",
            }),
        },
    ]
}

pub fn lookup(name: &str) -> Result<BenchmarkEntry> {
    registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|e| e.name).collect()
}
