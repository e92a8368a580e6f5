//! Python module `flexocp`: registry problems, the refinement-loop solver,
//! the two parameter studies and a few numerical kernels.

#![allow(clippy::type_complexity)]

use flexocp::basis::chebyshev2_nodes as cheb_nodes;
use flexocp::cli::{parse_n_list as parse_list, sample_times, trajectory_csv};
use flexocp::driver::{self, NlpSettings, SolveReport, SolverConfig, Termination};
use flexocp::problems::{lookup, names, BenchmarkEntry};
use flexocp::quadrature::gauss_legendre as gl;
use flexocp::transcription::MeshMode;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: flexocp::Error) -> PyErr {
    match e {
        flexocp::Error::Config(_) | flexocp::Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        flexocp::Error::UnknownProblem(_) => PyKeyError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn entry(name: &str) -> PyResult<BenchmarkEntry> {
    lookup(name).map_err(to_py)
}

fn mode_name(m: MeshMode) -> &'static str {
    match m {
        MeshMode::Flexible => "flexible",
        MeshMode::Fixed => "fixed",
    }
}

/// Solver settings; defaults match the command line.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    #[pyo3(get, set)]
    n: usize,
    #[pyo3(get, set)]
    a: usize,
    #[pyo3(get, set)]
    b: usize,
    #[pyo3(get, set)]
    q: usize,
    #[pyo3(get, set)]
    flex: f64,
    #[pyo3(get, set)]
    eps_tol: f64,
    #[pyo3(get, set)]
    eps_quad_tol: Option<f64>,
    #[pyo3(get, set)]
    mesh: String,
    #[pyo3(get, set)]
    max_rounds: usize,
    #[pyo3(get, set)]
    nlp_tol: f64,
    #[pyo3(get, set)]
    nlp_max_iter: usize,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (n=5, a=2, b=1, q=3, flex=0.5, eps_tol=1e-8, eps_quad_tol=None, mesh="flexible".to_string(), max_rounds=8, nlp_tol=1e-10, nlp_max_iter=3000))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        a: usize,
        b: usize,
        q: usize,
        flex: f64,
        eps_tol: f64,
        eps_quad_tol: Option<f64>,
        mesh: String,
        max_rounds: usize,
        nlp_tol: f64,
        nlp_max_iter: usize,
    ) -> Self {
        PyConfig { n, a, b, q, flex, eps_tol, eps_quad_tol, mesh, max_rounds, nlp_tol, nlp_max_iter }
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n={}, a={}, b={}, q={}, flex={}, eps_tol={:e}, mesh='{}')",
            self.n, self.a, self.b, self.q, self.flex, self.eps_tol, self.mesh
        )
    }
}

impl PyConfig {
    fn solver_config(&self) -> PyResult<SolverConfig> {
        let mesh_mode = match self.mesh.as_str() {
            "flexible" => MeshMode::Flexible,
            "fixed" => MeshMode::Fixed,
            other => return Err(PyValueError::new_err(format!("mesh must be 'flexible' or 'fixed', got '{other}'"))),
        };
        let c = SolverConfig {
            eps_tol: self.eps_tol,
            eps_quad_tol: self.eps_quad_tol,
            n_intervals: self.n,
            state_degree: self.a,
            input_degree: self.b,
            quad_order: self.q,
            flexibility: self.flex,
            mesh_mode,
            max_rounds: self.max_rounds,
            nlp: NlpSettings {
                tol: self.nlp_tol,
                max_iter: self.nlp_max_iter,
                ..NlpSettings::default()
            },
            ..SolverConfig::default()
        };
        c.validate().map_err(to_py)?;
        Ok(c)
    }
}

fn resolve(config: Option<PyConfig>) -> PyResult<SolverConfig> {
    config.unwrap_or_else(|| PyConfig::new(5, 2, 1, 3, 0.5, 1e-8, None, "flexible".into(), 8, 1e-10, 3000)).solver_config()
}

/// Result of [`solve`].
#[pyclass(name = "Solution", frozen)]
pub struct PySolution {
    report: SolveReport,
}

#[pymethods]
impl PySolution {
    /// `"Success"` or `"ToleranceNotReached"`.
    #[getter]
    fn termination(&self) -> &'static str {
        match self.report.termination {
            Termination::Success => "Success",
            Termination::ToleranceNotReached => "ToleranceNotReached",
        }
    }

    #[getter]
    fn success(&self) -> bool {
        self.report.termination == Termination::Success
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.report.cost
    }

    #[getter]
    fn eps_r(&self) -> f64 {
        self.report.eps_r
    }

    #[getter]
    fn quad_order(&self) -> usize {
        self.report.quad_order
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.report.solution.trajectory.nodes.clone()
    }

    /// `(N, Q, eps_r, eps_q, action)` per refinement round.
    #[getter]
    fn rounds(&self) -> Vec<(usize, usize, f64, f64, String)> {
        self.report
            .rounds
            .iter()
            .map(|r| (r.n_intervals, r.quad_order, r.eps_r, r.eps_q, format!("{:?}", r.action)))
            .collect()
    }

    fn state(&self, t: f64) -> Vec<f64> {
        self.report.solution.trajectory.state_at(t)
    }

    fn input(&self, t: f64) -> Vec<f64> {
        self.report.solution.trajectory.input_at(t)
    }

    /// `(t, x, u, is_node)` at 1000 uniform times plus every mesh node.
    fn sample(&self) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) {
        let traj = &self.report.solution.trajectory;
        let pts = sample_times(&traj.nodes);
        let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let x = t.iter().map(|&s| traj.state_at(s)).collect();
        let u = if self.report.solution.n_u > 0 {
            t.iter().map(|&s| traj.input_at(s)).collect()
        } else {
            vec![Vec::new(); t.len()]
        };
        (t, x, u, pts.iter().map(|p| p.1).collect())
    }

    fn trajectory_csv(&self) -> String {
        let s = &self.report.solution;
        trajectory_csv(&s.trajectory, s.n_x, s.n_u)
    }

    fn to_json(&self) -> PyResult<String> {
        self.report.to_json().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(termination='{}', N={}, cost={}, eps_r={:e})",
            self.termination(),
            self.report.solution.trajectory.n_intervals(),
            self.report.cost,
            self.report.eps_r
        )
    }
}

/// Names of the built-in problems.
#[pyfunction]
fn problems() -> Vec<&'static str> {
    names()
}

/// Analytic `(x(t), u(t))` of a registry problem, or `None`.
#[pyfunction]
fn oracle(problem: &str, t: f64) -> PyResult<Option<(Vec<f64>, Vec<f64>)>> {
    Ok(entry(problem)?.oracle(t))
}

#[pyfunction]
fn reference_cost(problem: &str) -> PyResult<Option<f64>> {
    Ok(entry(problem)?.reference_cost.map(|r| r.value))
}

/// Residual-driven refinement followed by cost minimization.
#[pyfunction]
#[pyo3(signature = (problem, config=None))]
fn solve(py: Python<'_>, problem: &str, config: Option<PyConfig>) -> PyResult<PySolution> {
    let e = entry(problem)?;
    let c = resolve(config)?;
    let report = py.detach(|| driver::solve_ocp(&e.problem, &c)).map_err(to_py)?;
    Ok(PySolution { report })
}

/// Minimum residual per `N` for both mesh modes: `(rows, flexible_slope,
/// fixed_slope)` with rows `(mode, N, eps_r, status, iterations)`.
#[pyfunction]
#[pyo3(signature = (problem, n_list, config=None))]
fn convergence(
    py: Python<'_>,
    problem: &str,
    n_list: Vec<usize>,
    config: Option<PyConfig>,
) -> PyResult<(Vec<(&'static str, usize, f64, String, usize)>, Option<f64>, Option<f64>)> {
    let e = entry(problem)?;
    let c = resolve(config)?;
    let study = py.detach(|| driver::convergence_study(&e.problem, &c, &n_list)).map_err(to_py)?;
    let rows = study
        .rows
        .iter()
        .map(|r| (mode_name(r.mode), r.n_intervals, r.eps_r, format!("{:?}", r.status), r.iterations))
        .collect();
    Ok((rows, study.flexible_slope, study.fixed_slope))
}

/// Cost against residual tolerance: rows `(eps_tol, eps_r, cost, status, iterations)`.
#[pyfunction]
#[pyo3(signature = (problem, eps_list, config=None))]
fn pareto(
    py: Python<'_>,
    problem: &str,
    eps_list: Vec<f64>,
    config: Option<PyConfig>,
) -> PyResult<Vec<(f64, f64, f64, String, usize)>> {
    let e = entry(problem)?;
    let c = resolve(config)?;
    let sweep = py.detach(|| driver::pareto_sweep(&e.problem, &c, &eps_list)).map_err(to_py)?;
    Ok(sweep
        .points
        .iter()
        .map(|p| (p.eps_tol, p.eps_r, p.cost, format!("{:?}", p.status), p.iterations))
        .collect())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[pyfunction]
fn gauss_legendre(order: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(PyValueError::new_err("order must be positive"));
    }
    let r = gl(order);
    Ok((r.ref_nodes, r.ref_weights))
}

/// Chebyshev type-2 points on `[-1, 1]`, ascending.
#[pyfunction]
fn chebyshev2_nodes(degree: usize) -> Vec<f64> {
    cheb_nodes(degree)
}

/// Expands `"a:b"` by doubling from `a`, capped at `b`.
#[pyfunction]
fn parse_n_list(spec: &str) -> PyResult<Vec<usize>> {
    parse_list(spec).map(|l| l.0).map_err(PyValueError::new_err)
}

#[pymodule]
#[pyo3(name = "flexocp")]
pub fn flexocp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(problems, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(reference_cost, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(pareto, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev2_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(parse_n_list, m)?)?;
    Ok(())
}
