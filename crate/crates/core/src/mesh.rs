//! Time mesh and decision-vector layout.
//!
//! The flat vector interleaves states, inputs and node times per interval:
//!
//! ```text
//! (s_0^0, t_0, s_0^1 .. s_0^{a-1}, c_0^0 .. c_0^b, s_0^a, t_1, s_1^1, .., s_{N-1}^a, t_N)
//! ```
//!
//! The last state of interval `i` is stored once and doubles as the first
//! state of interval `i + 1`, so state continuity holds by construction.
//! Inputs are stored per interval and may jump at mesh nodes.

use serde::{Deserialize, Serialize};

use crate::basis::{eval_interp, IntervalBasis};
use crate::error::{Error, Result};

/// Mesh nodes plus the per-interval polynomial degrees and the interval-length
/// flexibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlexMesh {
    pub nodes: Vec<f64>,
    pub state_degree: usize,
    pub input_degree: usize,
    pub flexibility: f64,
}

pub fn uniform_mesh(
    t0: f64,
    tf: f64,
    n_intervals: usize,
    state_degree: usize,
    input_degree: usize,
    flexibility: f64,
) -> Result<FlexMesh> {
    if !(tf > t0) {
        return Err(Error::Config(format!("horizon [{t0}, {tf}] is empty")));
    }
    if n_intervals == 0 {
        return Err(Error::Config("number of intervals must be positive".into()));
    }
    if state_degree == 0 {
        return Err(Error::Config("state degree must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&flexibility) {
        return Err(Error::Config(format!(
            "flexibility {flexibility} outside [0, 1)"
        )));
    }
    let h = (tf - t0) / n_intervals as f64;
    let mut nodes: Vec<f64> = (0..=n_intervals).map(|i| t0 + i as f64 * h).collect();
    nodes[n_intervals] = tf;
    Ok(FlexMesh {
        nodes,
        state_degree,
        input_degree,
        flexibility,
    })
}

/// Two-sided bound `lower <= t_{i+1} - t_i <= upper` on one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalBound {
    pub interval: usize,
    pub lower: f64,
    pub upper: f64,
}

impl FlexMesh {
    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn tf(&self) -> f64 {
        self.nodes[self.n_intervals()]
    }

    /// Uniform interval length `(tf - t0) / N`.
    pub fn nominal_length(&self) -> f64 {
        (self.tf() - self.t0()) / self.n_intervals() as f64
    }

    /// `((1 - flex) h, (1 + flex) h)` with `h` the nominal length.
    pub fn length_bounds(&self) -> (f64, f64) {
        let h = self.nominal_length();
        ((1.0 - self.flexibility) * h, (1.0 + self.flexibility) * h)
    }

    pub fn layout(&self, n_x: usize, n_u: usize) -> Layout {
        Layout {
            n_intervals: self.n_intervals(),
            n_x,
            n_u,
            state_degree: self.state_degree,
            input_degree: self.input_degree,
        }
    }

    pub fn state_basis(&self) -> IntervalBasis {
        IntervalBasis::chebyshev2(self.state_degree)
    }

    pub fn input_basis(&self) -> IntervalBasis {
        IntervalBasis::chebyshev2(self.input_degree)
    }

    /// Same degrees and flexibility, `n_intervals` uniform intervals.
    pub fn refined(&self, n_intervals: usize) -> Result<FlexMesh> {
        uniform_mesh(
            self.t0(),
            self.tf(),
            n_intervals,
            self.state_degree,
            self.input_degree,
            self.flexibility,
        )
    }
}

/// Length bounds for all `N` intervals, including the first.
pub fn interval_bound_constraints(mesh: &FlexMesh) -> Vec<IntervalBound> {
    let (lower, upper) = mesh.length_bounds();
    (0..mesh.n_intervals())
        .map(|interval| IntervalBound {
            interval,
            lower,
            upper,
        })
        .collect()
}

pub fn vector_length(mesh: &FlexMesh, n_x: usize, n_u: usize) -> usize {
    mesh.layout(n_x, n_u).len()
}

/// Offsets into the flat decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_intervals: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub state_degree: usize,
    pub input_degree: usize,
}

impl Layout {
    /// Entries owned by one interval: `a N_x + (b + 1) N_u + 1`.
    pub fn period(&self) -> usize {
        self.state_degree * self.n_x + (self.input_degree + 1) * self.n_u + 1
    }

    pub fn len(&self) -> usize {
        self.n_intervals * self.period() + self.n_x + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn base(&self, interval: usize) -> usize {
        self.n_x + 1 + interval * self.period()
    }

    /// Offset of `s_i^j`, `j in 0..=a`. `s_i^0` resolves to `s_{i-1}^a`.
    pub fn state_offset(&self, interval: usize, j: usize) -> usize {
        let a = self.state_degree;
        debug_assert!(j <= a && interval < self.n_intervals);
        if j == 0 {
            if interval == 0 {
                0
            } else {
                self.state_offset(interval - 1, a)
            }
        } else if j < a {
            self.base(interval) + (j - 1) * self.n_x
        } else {
            self.base(interval) + (a - 1) * self.n_x + (self.input_degree + 1) * self.n_u
        }
    }

    /// Offset of `c_i^j`, `j in 0..=b`.
    pub fn input_offset(&self, interval: usize, j: usize) -> usize {
        debug_assert!(j <= self.input_degree && interval < self.n_intervals);
        self.base(interval) + (self.state_degree - 1) * self.n_x + j * self.n_u
    }

    /// Offset of the node time `t_k`, `k in 0..=N`.
    pub fn time_offset(&self, node: usize) -> usize {
        debug_assert!(node <= self.n_intervals);
        if node == 0 {
            self.n_x
        } else {
            self.base(node - 1) + self.period() - 1
        }
    }

    /// All offsets the layout addresses, in layout order, with repetitions
    /// for shared states removed.
    pub fn distinct_offsets(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len() + self.n_x * self.n_intervals];
        let mut out = Vec::new();
        let mut push = |k: usize, out: &mut Vec<usize>| {
            if !seen[k] {
                seen[k] = true;
                out.push(k);
            }
        };
        for k in 0..=self.n_intervals {
            push(self.time_offset(k), &mut out);
        }
        for i in 0..self.n_intervals {
            for j in 0..=self.state_degree {
                let o = self.state_offset(i, j);
                for c in 0..self.n_x {
                    push(o + c, &mut out);
                }
            }
            for j in 0..=self.input_degree {
                let o = self.input_offset(i, j);
                for c in 0..self.n_u {
                    push(o + c, &mut out);
                }
            }
        }
        out
    }
}

/// Nodal data of a piecewise-polynomial trajectory.
///
/// `states[i][j]` is `s_i^j` and `inputs[i][j]` is `c_i^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub nodes: Vec<f64>,
    pub states: Vec<Vec<Vec<f64>>>,
    pub inputs: Vec<Vec<Vec<f64>>>,
}

/// Flat NLP variables together with their layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub data: Vec<f64>,
    pub layout: Layout,
}

pub fn pack(
    mesh: &FlexMesh,
    states: &[Vec<Vec<f64>>],
    inputs: &[Vec<Vec<f64>>],
) -> Result<DecisionVector> {
    let n = mesh.n_intervals();
    let n_x = states.first().and_then(|s| s.first()).map_or(0, Vec::len);
    let n_u = inputs.first().and_then(|s| s.first()).map_or(0, Vec::len);
    let layout = mesh.layout(n_x, n_u);
    if states.len() != n || inputs.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} intervals, got {} state and {} input blocks",
            states.len(),
            inputs.len()
        )));
    }
    for (i, (s, c)) in states.iter().zip(inputs).enumerate() {
        if s.len() != mesh.state_degree + 1 || s.iter().any(|v| v.len() != n_x) {
            return Err(Error::Dimension(format!("state block of interval {i}")));
        }
        if c.len() != mesh.input_degree + 1 || c.iter().any(|v| v.len() != n_u) {
            return Err(Error::Dimension(format!("input block of interval {i}")));
        }
    }
    for i in 0..n.saturating_sub(1) {
        if states[i][mesh.state_degree] != states[i + 1][0] {
            return Err(Error::InconsistentSharedState { interval: i });
        }
    }
    let mut data = vec![0.0; layout.len()];
    for (k, &t) in mesh.nodes.iter().enumerate() {
        data[layout.time_offset(k)] = t;
    }
    for i in 0..n {
        for (j, s) in states[i].iter().enumerate() {
            let o = layout.state_offset(i, j);
            data[o..o + n_x].copy_from_slice(s);
        }
        for (j, c) in inputs[i].iter().enumerate() {
            let o = layout.input_offset(i, j);
            data[o..o + n_u].copy_from_slice(c);
        }
    }
    Ok(DecisionVector { data, layout })
}

impl DecisionVector {
    pub fn from_data(data: Vec<f64>, layout: Layout) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "decision vector has {} entries, layout needs {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(DecisionVector { data, layout })
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.layout.n_intervals)
            .map(|k| self.data[self.layout.time_offset(k)])
            .collect()
    }

    pub fn state(&self, interval: usize, j: usize) -> &[f64] {
        let o = self.layout.state_offset(interval, j);
        &self.data[o..o + self.layout.n_x]
    }

    pub fn input(&self, interval: usize, j: usize) -> &[f64] {
        let o = self.layout.input_offset(interval, j);
        &self.data[o..o + self.layout.n_u]
    }

    /// Materializes per-interval nodal arrays. Fails if the node times do not
    /// increase strictly.
    pub fn unpack(&self) -> Result<Trajectory> {
        let l = &self.layout;
        let nodes = self.nodes();
        if let Some(k) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonIncreasingNodes(k + 1));
        }
        let states = (0..l.n_intervals)
            .map(|i| (0..=l.state_degree).map(|j| self.state(i, j).to_vec()).collect())
            .collect();
        let inputs = (0..l.n_intervals)
            .map(|i| (0..=l.input_degree).map(|j| self.input(i, j).to_vec()).collect())
            .collect();
        Ok(Trajectory {
            nodes,
            states,
            inputs,
        })
    }

    /// The mesh encoded by this vector, with the degrees and flexibility of `like`.
    pub fn mesh(&self, like: &FlexMesh) -> FlexMesh {
        FlexMesh {
            nodes: self.nodes(),
            ..like.clone()
        }
    }
}

/// Which neighbouring interval to use when `t` coincides with a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Index of the interval containing `t`, clamped to the mesh. At an interior
/// node, `side` picks the interval to the left or right of it.
pub fn locate(nodes: &[f64], t: f64, side: Side) -> usize {
    let n = nodes.len() - 1;
    let k = match side {
        // first node strictly greater than t, minus one
        Side::Right => nodes.partition_point(|&x| x <= t),
        // first node >= t, minus one
        Side::Left => nodes.partition_point(|&x| x < t),
    };
    k.saturating_sub(1).min(n - 1)
}

impl Trajectory {
    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    fn eval_on(&self, basis: &IntervalBasis, values: &[Vec<f64>], i: usize, t: f64) -> Vec<f64> {
        eval_interp(basis, values, &self.nodes[i], &self.nodes[i + 1], &t)
    }

    /// State interpolant evaluated from interval `i` (extrapolating if `t` lies outside it).
    pub fn state_on(&self, i: usize, t: f64) -> Vec<f64> {
        let basis = IntervalBasis::chebyshev2(self.states[i].len() - 1);
        self.eval_on(&basis, &self.states[i], i, t)
    }

    pub fn input_on(&self, i: usize, t: f64) -> Vec<f64> {
        let basis = IntervalBasis::chebyshev2(self.inputs[i].len() - 1);
        self.eval_on(&basis, &self.inputs[i], i, t)
    }

    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.state_on(locate(&self.nodes, t, Side::Right), t)
    }

    /// Input at `t`; at a mesh node the value of the interval starting there.
    pub fn input_at(&self, t: f64) -> Vec<f64> {
        self.input_at_side(t, Side::Right)
    }

    pub fn input_at_side(&self, t: f64, side: Side) -> Vec<f64> {
        self.input_on(locate(&self.nodes, t, side), t)
    }
}

/// Interpolates `z_old` (on its own, possibly moved, nodes) onto the supports
/// of `mesh_new`. New node times are uniform. Supports sitting on an old mesh
/// node read the old interval that overlaps the new interval's interior.
pub fn warm_start_expand(
    z_old: &DecisionVector,
    mesh_old: &FlexMesh,
    mesh_new: &FlexMesh,
) -> Result<DecisionVector> {
    let old = z_old.unpack()?;
    let l = &z_old.layout;
    let sb_new = mesh_new.state_basis();
    let ib_new = mesh_new.input_basis();
    let sb_old = IntervalBasis::chebyshev2(mesh_old.state_degree);
    let ib_old = IntervalBasis::chebyshev2(mesh_old.input_degree);
    let n = mesh_new.n_intervals();
    let mut states = Vec::with_capacity(n);
    let mut inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = (mesh_new.nodes[i], mesh_new.nodes[i + 1]);
        let mid = 0.5 * (lo + hi);
        let pick = |t: f64| {
            let side = if t <= mid { Side::Right } else { Side::Left };
            locate(&old.nodes, t, side)
        };
        let s: Vec<Vec<f64>> = sb_new
            .support_times(lo, hi)
            .into_iter()
            .map(|t| {
                let k = pick(t);
                eval_interp(&sb_old, &old.states[k], &old.nodes[k], &old.nodes[k + 1], &t)
            })
            .collect();
        let c: Vec<Vec<f64>> = ib_new
            .support_times(lo, hi)
            .into_iter()
            .map(|t| {
                let k = pick(t);
                eval_interp(&ib_old, &old.inputs[k], &old.nodes[k], &old.nodes[k + 1], &t)
            })
            .collect();
        states.push(s);
        inputs.push(c);
    }
    // adjacent new intervals may read the shared endpoint from different old
    // intervals; the old state is continuous, so keep the left reading
    for i in 1..n {
        let prev = states[i - 1][mesh_new.state_degree].clone();
        states[i][0] = prev;
    }
    let mut z = pack(mesh_new, &states, &inputs)?;
    // pack infers widths from the data, which is ambiguous for empty blocks
    z.layout = mesh_new.layout(l.n_x, l.n_u);
    Ok(z)
}

/// First-round guess: states linear between the boundary guesses, zero
/// inputs, uniform nodes.
pub fn linear_initial_guess(
    mesh: &FlexMesh,
    n_u: usize,
    x0: &[f64],
    xf: &[f64],
) -> DecisionVector {
    let n_x = x0.len();
    let layout = mesh.layout(n_x, n_u);
    let mut data = vec![0.0; layout.len()];
    let (t0, tf) = (mesh.t0(), mesh.tf());
    for (k, &t) in mesh.nodes.iter().enumerate() {
        data[layout.time_offset(k)] = t;
    }
    let sb = mesh.state_basis();
    for i in 0..mesh.n_intervals() {
        for (j, t) in sb
            .support_times(mesh.nodes[i], mesh.nodes[i + 1])
            .into_iter()
            .enumerate()
        {
            let w = (t - t0) / (tf - t0);
            let o = layout.state_offset(i, j);
            for c in 0..n_x {
                data[o + c] = (1.0 - w) * x0[c] + w * xf[c];
            }
        }
    }
    DecisionVector { data, layout }
}

/// Serialized solution: mesh, nodal arrays, and the flat vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub mesh: FlexMesh,
    pub n_x: usize,
    pub n_u: usize,
    pub trajectory: Trajectory,
    pub z: Vec<f64>,
}

impl SolutionDocument {
    pub fn new(z: &DecisionVector, mesh: &FlexMesh) -> Result<Self> {
        Ok(SolutionDocument {
            mesh: z.mesh(mesh),
            n_x: z.layout.n_x,
            n_u: z.layout.n_u,
            trajectory: z.unpack()?,
            z: z.data.clone(),
        })
    }

    pub fn decision_vector(&self) -> Result<DecisionVector> {
        DecisionVector::from_data(self.z.clone(), self.mesh.layout(self.n_x, self.n_u))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
