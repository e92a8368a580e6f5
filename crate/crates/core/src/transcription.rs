//! The finite-dimensional problems solved on a mesh.
//!
//! Both phases share the variables and constraint blocks. The residual phase
//! minimizes the scaled integrated residual; the cost phase minimizes the Bolza
//! cost with the residual as a single budget inequality.
//!
//! Quadrature points and supports are fixed in reference coordinates, so the
//! interpolation rows are precomputed once and every interval term is a
//! polynomial expression in its nodal values and its two node times.
//! Derivatives are taken per interval with dual numbers seeded only on the
//! interval's own variables and scattered into the dense matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::IntervalBasis;
use crate::error::{Error, Result};
use crate::mesh::{FlexMesh, Layout};
use crate::nlp::{Dual, Dual1, Dual2, NlpModel, NlpSpec, Scalar};
use crate::ocp_model::{Dims, OcpProblem};
use crate::quadrature::QuadRule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    ResidualMin,
    CostMin { eps_tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MeshMode {
    /// Interior node times are variables bounded by the interval-length limits.
    #[default]
    Flexible,
    /// Every node time is pinned to the uniform mesh.
    Fixed,
}

/// Where path inequalities are imposed inside each interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PathPoints {
    /// Input supports (state supports for problems without inputs).
    #[default]
    InputSupports,
    /// Union of the state and input supports.
    Union,
}

/// Interpolation rows at one reference point.
#[derive(Clone, Debug)]
struct PointRows {
    xi: f64,
    state: Vec<f64>,
    state_deriv: Vec<f64>,
    input: Vec<f64>,
}

impl PointRows {
    fn new(xi: f64, sb: &IntervalBasis, ib: &IntervalBasis) -> Self {
        PointRows {
            xi,
            state: sb.lagrange_row(xi),
            state_deriv: sb.derivative_row(xi),
            input: ib.lagrange_row(xi),
        }
    }
}

/// Counts of the inequality blocks, in row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowCounts {
    pub path: usize,
    pub boundary_ineq: usize,
    pub interval: usize,
    pub budget: usize,
}

impl RowCounts {
    pub fn total(&self) -> usize {
        self.path + self.boundary_ineq + self.interval + self.budget
    }
}

/// Objective, constraints and derivatives of one phase on one mesh.
pub struct TranscribedNlp<'a, P: OcpProblem> {
    problem: &'a P,
    mesh: FlexMesh,
    rule: QuadRule,
    phase: Phase,
    mode: MeshMode,
    dims: Dims,
    layout: Layout,
    horizon: f64,
    quad: Vec<(PointRows, f64)>,
    path_points: Vec<PointRows>,
    /// Local-to-global index maps, one per interval.
    elements: Vec<Vec<usize>>,
    /// `[x(t0), x(tf), t0, tf]` global indices.
    boundary: Vec<usize>,
}

struct IntervalTerms<S> {
    residual: S,
    cost: S,
    path: Vec<S>,
}

pub fn build_residual_nlp<'a, P: OcpProblem>(
    problem: &'a P,
    mesh: &FlexMesh,
    rule: &QuadRule,
) -> TranscribedNlp<'a, P> {
    TranscribedNlp::new(problem, mesh, rule, Phase::ResidualMin, MeshMode::Flexible)
}

pub fn build_cost_nlp<'a, P: OcpProblem>(
    problem: &'a P,
    mesh: &FlexMesh,
    rule: &QuadRule,
    eps_tol: f64,
) -> TranscribedNlp<'a, P> {
    TranscribedNlp::new(problem, mesh, rule, Phase::CostMin { eps_tol }, MeshMode::Flexible)
}

/// Scaled integrated residual of `z` on `mesh` under `rule`.
pub fn integrated_residual<P: OcpProblem>(
    problem: &P,
    mesh: &FlexMesh,
    rule: &QuadRule,
    z: &[f64],
) -> f64 {
    build_residual_nlp(problem, mesh, rule).integrated_residual(z)
}

impl<'a, P: OcpProblem> TranscribedNlp<'a, P> {
    pub fn new(problem: &'a P, mesh: &FlexMesh, rule: &QuadRule, phase: Phase, mode: MeshMode) -> Self {
        Self::with_path_points(problem, mesh, rule, phase, mode, PathPoints::default())
    }

    pub fn with_path_points(
        problem: &'a P,
        mesh: &FlexMesh,
        rule: &QuadRule,
        phase: Phase,
        mode: MeshMode,
        path_points: PathPoints,
    ) -> Self {
        let dims = problem.dims();
        let layout = mesh.layout(dims.n_x, dims.n_u);
        let sb = mesh.state_basis();
        let ib = mesh.input_basis();
        let quad = rule
            .ref_nodes
            .iter()
            .zip(&rule.ref_weights)
            .map(|(&xi, &w)| (PointRows::new(xi, &sb, &ib), w))
            .collect();
        let mut xis: Vec<f64> = if dims.n_u > 0 { ib.ref_nodes.clone() } else { sb.ref_nodes.clone() };
        if path_points == PathPoints::Union {
            xis.extend(sb.ref_nodes.iter().chain(&ib.ref_nodes));
            xis.sort_by(f64::total_cmp);
            xis.dedup();
        }
        let path_points = xis.into_iter().map(|xi| PointRows::new(xi, &sb, &ib)).collect();
        let elements = (0..mesh.n_intervals())
            .map(|i| {
                let mut g = Vec::new();
                for j in 0..=mesh.state_degree {
                    let o = layout.state_offset(i, j);
                    g.extend(o..o + dims.n_x);
                }
                for j in 0..=mesh.input_degree {
                    let o = layout.input_offset(i, j);
                    g.extend(o..o + dims.n_u);
                }
                g.push(layout.time_offset(i));
                g.push(layout.time_offset(i + 1));
                g
            })
            .collect();
        let n = mesh.n_intervals();
        let x0 = layout.state_offset(0, 0);
        let xf = layout.state_offset(n - 1, mesh.state_degree);
        let mut boundary: Vec<usize> = (x0..x0 + dims.n_x).chain(xf..xf + dims.n_x).collect();
        boundary.push(layout.time_offset(0));
        boundary.push(layout.time_offset(n));
        TranscribedNlp {
            problem,
            mesh: mesh.clone(),
            rule: rule.clone(),
            phase,
            mode,
            dims,
            layout,
            horizon: problem.tf() - problem.t0(),
            quad,
            path_points,
            elements,
            boundary,
        }
    }

    /// The same transcription with a different quadrature rule.
    pub fn with_rule(&self, rule: &QuadRule) -> TranscribedNlp<'a, P> {
        let mut t = Self::new(self.problem, &self.mesh, rule, self.phase, self.mode);
        t.path_points = self.path_points.clone();
        t
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn mode(&self) -> MeshMode {
        self.mode
    }

    pub fn mesh(&self) -> &FlexMesh {
        &self.mesh
    }

    pub fn rule(&self) -> &QuadRule {
        &self.rule
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn row_counts(&self) -> RowCounts {
        RowCounts {
            path: self.dims.n_g * self.path_points.len() * self.mesh.n_intervals(),
            boundary_ineq: self.dims.n_i,
            interval: match self.mode {
                MeshMode::Flexible => 2 * self.mesh.n_intervals(),
                MeshMode::Fixed => 0,
            },
            budget: match self.phase {
                Phase::ResidualMin => 0,
                Phase::CostMin { .. } => 1,
            },
        }
    }

    /// Variable bounds: `t_0` and `t_N` pinned, and every node in fixed mode.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.len();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let last = self.mesh.n_intervals();
        for k in 0..=last {
            if k == 0 || k == last || self.mode == MeshMode::Fixed {
                let o = self.layout.time_offset(k);
                lo[o] = self.mesh.nodes[k];
                hi[o] = self.mesh.nodes[k];
            }
        }
        (lo, hi)
    }

    /// Row factors bringing the interval rows and the budget row to unit scale.
    pub fn ineq_scaling(&self) -> Vec<f64> {
        let c = self.row_counts();
        let mut s = vec![1.0; c.path + c.boundary_ineq];
        s.extend(std::iter::repeat_n(1.0 / self.mesh.nominal_length(), c.interval));
        if let Phase::CostMin { eps_tol } = self.phase {
            s.push(1.0 / eps_tol);
        }
        s
    }

    /// Solver input with bounds and row scaling filled in.
    pub fn nlp_spec(&self, z0: Vec<f64>) -> NlpSpec<'_> {
        let (lo, hi) = self.bounds();
        let mut spec = NlpSpec::new(self, z0).with_bounds(lo, hi);
        spec.ineq_scaling = Some(self.ineq_scaling());
        spec.var_scaling = Some(self.var_scaling());
        spec
    }

    /// Node times are iterated in units of the nominal interval length.
    pub fn var_scaling(&self) -> Vec<f64> {
        let mut d = vec![1.0; self.layout.len()];
        let h = self.mesh.nominal_length();
        for i in 0..=self.layout.n_intervals {
            d[self.layout.time_offset(i)] = h;
        }
        d
    }

    fn local<S: Clone>(&self, globals: &[usize], z: &[S]) -> Vec<S> {
        globals.iter().map(|&g| z[g].clone()).collect()
    }

    fn interval_terms<S: Scalar>(&self, loc: &[S], want_cost: bool, want_path: bool) -> IntervalTerms<S> {
        let Dims { n_x, n_u, .. } = self.dims;
        let a = self.mesh.state_degree;
        let b = self.mesh.input_degree;
        let s_nodes = &loc[..(a + 1) * n_x];
        let c_nodes = &loc[(a + 1) * n_x..(a + 1) * n_x + (b + 1) * n_u];
        let t_lo = loc[loc.len() - 2].clone();
        let t_hi = loc[loc.len() - 1].clone();
        let h = t_hi.clone() - t_lo.clone();
        let dscale = S::from_f64(2.0) / h.clone();
        let combine = |row: &[f64], nodes: &[S], width: usize| -> Vec<S> {
            (0..width)
                .map(|c| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, &r)| r != 0.0)
                        .fold(S::zero(), |acc, (j, &r)| acc + nodes[j * width + c].clone() * r)
                })
                .collect()
        };
        let at = |p: &PointRows| {
            let x = combine(&p.state, s_nodes, n_x);
            let xdot: Vec<S> = combine(&p.state_deriv, s_nodes, n_x)
                .into_iter()
                .map(|v| v * dscale.clone())
                .collect();
            let u = combine(&p.input, c_nodes, n_u);
            let t = t_lo.clone() + h.clone() * (0.5 * (p.xi + 1.0));
            (x, xdot, u, t)
        };
        let mut residual = S::zero();
        let mut cost = S::zero();
        for (p, w) in &self.quad {
            let (x, xdot, u, t) = at(p);
            let f = self.problem.dynamics(&xdot, &x, &u, &t);
            let sq = f.iter().fold(S::zero(), |acc, v| acc + v.square());
            residual = residual + sq * (0.5 * w);
            if want_cost {
                cost = cost + self.problem.lagrange(&x, &u, &t) * (0.5 * w);
            }
        }
        // 0.5 w h is the mapped weight; the residual carries 1 / (H n_f)
        let residual = residual * h.clone() / (self.horizon * self.dims.n_f as f64);
        let cost = cost * h.clone();
        let path = if want_path && self.dims.n_g > 0 {
            self.path_points
                .iter()
                .flat_map(|p| {
                    let (x, xdot, u, t) = at(p);
                    self.problem.path_ineq(&xdot, &x, &u, &t)
                })
                .collect()
        } else {
            Vec::new()
        };
        IntervalTerms { residual, cost, path }
    }

    /// `(mayer, boundary_eq, boundary_ineq)` from `[x0, xf, t0, tf]`.
    fn boundary_terms<S: Scalar>(&self, loc: &[S]) -> (S, Vec<S>, Vec<S>) {
        let n_x = self.dims.n_x;
        let (x0, rest) = loc.split_at(n_x);
        let (xf, times) = rest.split_at(n_x);
        let p = self.problem;
        (
            p.mayer(x0, xf, &times[0], &times[1]),
            p.boundary_eq(x0, xf, &times[0], &times[1]),
            p.boundary_ineq(x0, xf, &times[0], &times[1]),
        )
    }

    /// Scaled integrated residual at `z`.
    pub fn integrated_residual(&self, z: &[f64]) -> f64 {
        self.elements
            .iter()
            .map(|g| self.interval_terms(&self.local(g, z), false, false).residual)
            .sum()
    }

    /// Mayer term plus the quadrature of the Lagrange term.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let lagrange: f64 = self
            .elements
            .iter()
            .map(|g| self.interval_terms(&self.local(g, z), true, false).cost)
            .sum();
        self.boundary_terms(&self.local(&self.boundary, z)).0 + lagrange
    }

    /// Per-interval residual contributions.
    pub fn interval_residuals(&self, z: &[f64]) -> Vec<f64> {
        self.elements
            .iter()
            .map(|g| self.interval_terms(&self.local(g, z), false, false).residual)
            .collect()
    }

    fn interval_rows(&self, z: &[f64]) -> Vec<f64> {
        if self.mode == MeshMode::Fixed {
            return Vec::new();
        }
        let (lower, upper) = self.mesh.length_bounds();
        (0..self.mesh.n_intervals())
            .flat_map(|i| {
                let len = z[self.layout.time_offset(i + 1)] - z[self.layout.time_offset(i)];
                [lower - len, len - upper]
            })
            .collect()
    }

    fn first_order_interval(&self, i: usize, z: &[f64], want_cost: bool, want_path: bool) -> IntervalTerms<Dual1> {
        let g = &self.elements[i];
        let loc: Vec<Dual1> = g
            .iter()
            .enumerate()
            .map(|(k, &gi)| Dual::variable(z[gi], k, g.len()))
            .collect();
        self.interval_terms(&loc, want_cost, want_path)
    }

    fn first_order_boundary(&self, z: &[f64]) -> (Dual1, Vec<Dual1>, Vec<Dual1>) {
        let g = &self.boundary;
        let loc: Vec<Dual1> = g
            .iter()
            .enumerate()
            .map(|(k, &gi)| Dual::variable(z[gi], k, g.len()))
            .collect();
        self.boundary_terms(&loc)
    }

    fn scatter(&self, globals: &[usize], d: &Dual1, out: &mut [f64]) {
        for (k, p) in d.partials.iter().enumerate() {
            out[globals[k]] += p;
        }
    }

    fn scatter_row(&self, globals: &[usize], d: &Dual1, m: &mut DMatrix<f64>, row: usize) {
        for (k, p) in d.partials.iter().enumerate() {
            m[(row, globals[k])] += p;
        }
    }

    fn check_finite(values: &[f64]) -> Result<()> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFiniteDerivative(k)),
            None => Ok(()),
        }
    }

    fn residual_gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for i in 0..self.elements.len() {
            let t = self.first_order_interval(i, z, false, false);
            self.scatter(&self.elements[i], &t.residual, &mut out);
        }
        out
    }

    fn hessian_block(globals: &[usize], f: &Dual2, h: &mut DMatrix<f64>) {
        for (r, row) in f.partials.iter().enumerate() {
            for (c, v) in row.partials.iter().enumerate() {
                h[(globals[r], globals[c])] += v;
            }
        }
    }

    fn seed2(globals: &[usize], z: &[f64]) -> Vec<Dual2> {
        let w = globals.len();
        globals
            .iter()
            .enumerate()
            .map(|(k, &g)| Dual::variable(Dual::variable(z[g], k, w), k, w))
            .collect()
    }
}

impl<P: OcpProblem> NlpModel for TranscribedNlp<'_, P> {
    fn n_vars(&self) -> usize {
        self.layout.len()
    }

    fn n_eq(&self) -> usize {
        self.dims.n_e
    }

    fn n_ineq(&self) -> usize {
        self.row_counts().total()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        match self.phase {
            Phase::ResidualMin => self.integrated_residual(z),
            Phase::CostMin { .. } => self.cost(z),
        }
    }

    fn eq_constraints(&self, z: &[f64]) -> Vec<f64> {
        self.boundary_terms(&self.local(&self.boundary, z)).1
    }

    fn ineq_constraints(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .elements
            .iter()
            .flat_map(|g| self.interval_terms(&self.local(g, z), false, true).path)
            .collect();
        out.extend(self.boundary_terms(&self.local(&self.boundary, z)).2);
        out.extend(self.interval_rows(z));
        if let Phase::CostMin { eps_tol } = self.phase {
            out.push(self.integrated_residual(z) - eps_tol);
        }
        out
    }

    fn objective_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let out = match self.phase {
            Phase::ResidualMin => self.residual_gradient(z),
            Phase::CostMin { .. } => {
                let mut out = vec![0.0; z.len()];
                for i in 0..self.elements.len() {
                    let t = self.first_order_interval(i, z, true, false);
                    self.scatter(&self.elements[i], &t.cost, &mut out);
                }
                let (mayer, _, _) = self.first_order_boundary(z);
                self.scatter(&self.boundary, &mayer, &mut out);
                out
            }
        };
        Self::check_finite(&out)?;
        Ok(out)
    }

    fn eq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dims.n_e, z.len());
        let (_, eq, _) = self.first_order_boundary(z);
        for (r, d) in eq.iter().enumerate() {
            self.scatter_row(&self.boundary, d, &mut m, r);
        }
        Self::check_finite(m.as_slice())?;
        Ok(m)
    }

    fn ineq_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let counts = self.row_counts();
        let mut m = DMatrix::zeros(counts.total(), z.len());
        let mut row = 0;
        if self.dims.n_g > 0 {
            for i in 0..self.elements.len() {
                let t = self.first_order_interval(i, z, false, true);
                for d in &t.path {
                    self.scatter_row(&self.elements[i], d, &mut m, row);
                    row += 1;
                }
            }
        }
        let (_, _, bi) = self.first_order_boundary(z);
        for d in &bi {
            self.scatter_row(&self.boundary, d, &mut m, row);
            row += 1;
        }
        if self.mode == MeshMode::Flexible {
            for i in 0..self.mesh.n_intervals() {
                let (lo, hi) = (self.layout.time_offset(i), self.layout.time_offset(i + 1));
                m[(row, lo)] = 1.0;
                m[(row, hi)] = -1.0;
                m[(row + 1, lo)] = -1.0;
                m[(row + 1, hi)] = 1.0;
                row += 2;
            }
        }
        if counts.budget == 1 {
            let g = self.residual_gradient(z);
            for (c, v) in g.into_iter().enumerate() {
                m[(row, c)] = v;
            }
        }
        Self::check_finite(m.as_slice())?;
        Ok(m)
    }

    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
    ) -> Result<DMatrix<f64>> {
        let n = z.len();
        let counts = self.row_counts();
        let mut h = DMatrix::zeros(n, n);
        let (residual_weight, cost_weight) = match self.phase {
            Phase::ResidualMin => (obj_factor, 0.0),
            Phase::CostMin { .. } => (ineq_mult[counts.total() - 1], obj_factor),
        };
        let n_path_per = self.dims.n_g * self.path_points.len();
        for (i, g) in self.elements.iter().enumerate() {
            let mults = &ineq_mult[i * n_path_per..(i + 1) * n_path_per];
            let want_path = mults.iter().any(|&m| m != 0.0);
            let want_cost = cost_weight != 0.0;
            if residual_weight == 0.0 && !want_cost && !want_path {
                continue;
            }
            let loc = Self::seed2(g, z);
            let t = self.interval_terms(&loc, want_cost, want_path);
            let mut acc = t.residual * residual_weight;
            if want_cost {
                acc = acc + t.cost * cost_weight;
            }
            for (p, &m) in t.path.into_iter().zip(mults) {
                if m != 0.0 {
                    acc = acc + p * m;
                }
            }
            Self::hessian_block(g, &acc, &mut h);
        }
        let bi_mults = &ineq_mult[counts.path..counts.path + counts.boundary_ineq];
        let loc = Self::seed2(&self.boundary, z);
        let (mayer, eq, bi) = self.boundary_terms(&loc);
        let mut acc = mayer * cost_weight;
        for (c, &m) in eq.into_iter().zip(eq_mult) {
            acc = acc + c * m;
        }
        for (c, &m) in bi.into_iter().zip(bi_mults) {
            acc = acc + c * m;
        }
        Self::hessian_block(&self.boundary, &acc, &mut h);
        // symmetrize against rounding in the nested partials
        let h = (&h + h.transpose()) * 0.5;
        Self::check_finite(h.as_slice())?;
        Ok(h)
    }
}
