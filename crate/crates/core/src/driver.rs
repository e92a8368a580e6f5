//! Refinement loop, cost phase, and the two parameter studies.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{linear_initial_guess, uniform_mesh, warm_start_expand, DecisionVector, FlexMesh, SolutionDocument};
use crate::nlp::{solve_with_observer, HessianMode, NlpResult, NlpStatus, SolverOptions};
use crate::ocp_model::OcpProblem;
use crate::quadrature::{gauss_legendre, quad_error_estimate};
use crate::transcription::{MeshMode, Phase, TranscribedNlp};

/// Inner solver settings carried by [`SolverConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlpSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub hessian: HessianMode,
    pub mu_init: f64,
    /// Barrier start and bound push for the cost phase, which begins at a
    /// feasible residual solution.
    pub warm_mu_init: f64,
    pub warm_bound_push: f64,
    /// Acceptable optimality level of the cost phase.
    pub acceptable_tol: f64,
}

impl Default for NlpSettings {
    fn default() -> Self {
        NlpSettings {
            tol: 1e-10,
            max_iter: 3000,
            hessian: HessianMode::Exact,
            mu_init: 0.1,
            warm_mu_init: 1e-4,
            warm_bound_push: 1e-8,
            acceptable_tol: 1e-6,
        }
    }
}

impl NlpSettings {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            hessian: self.hessian,
            mu_init: self.mu_init,
            ..SolverOptions::default()
        }
    }

    fn warm_options(&self) -> SolverOptions {
        SolverOptions {
            mu_init: self.warm_mu_init,
            bound_push: self.warm_bound_push,
            acceptable_tol: Some(self.acceptable_tol),
            ..self.options()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps_tol: f64,
    /// Quadrature gate; `None` means `1e-2 * eps_tol`.
    pub eps_quad_tol: Option<f64>,
    pub n_intervals: usize,
    pub state_degree: usize,
    pub input_degree: usize,
    pub quad_order: usize,
    pub flexibility: f64,
    pub mesh_mode: MeshMode,
    pub n_growth: usize,
    pub q_growth: usize,
    /// Refinements (of either `N` or `Q`) allowed after the first solve.
    pub max_rounds: usize,
    pub nlp: NlpSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_tol: 1e-8,
            eps_quad_tol: None,
            n_intervals: 5,
            state_degree: 2,
            input_degree: 1,
            quad_order: 3,
            flexibility: 0.5,
            mesh_mode: MeshMode::Flexible,
            n_growth: 2,
            q_growth: 2,
            max_rounds: 8,
            nlp: NlpSettings::default(),
        }
    }
}

impl SolverConfig {
    pub fn quad_tol(&self) -> f64 {
        self.eps_quad_tol.unwrap_or(1e-2 * self.eps_tol)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.eps_tol > 0.0) {
            return bad("eps_tol must be positive");
        }
        if !(self.quad_tol() > 0.0) {
            return bad("eps_quad_tol must be positive");
        }
        if self.n_intervals == 0 {
            return bad("initial number of intervals must be at least 1");
        }
        if self.quad_order == 0 {
            return bad("quadrature order must be at least 1");
        }
        if self.state_degree == 0 {
            return bad("state degree must be at least 1");
        }
        if self.n_growth < 2 || self.q_growth < 2 {
            return bad("growth factors must be at least 2");
        }
        if !(0.0..1.0).contains(&self.flexibility) {
            return bad("flexibility must lie in [0, 1)");
        }
        Ok(())
    }

    fn initial_mesh<P: OcpProblem>(&self, problem: &P) -> Result<FlexMesh> {
        uniform_mesh(
            problem.t0(),
            problem.tf(),
            self.n_intervals,
            self.state_degree,
            self.input_degree,
            self.flexibility,
        )
    }
}

/// What a refinement round did after its solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundAction {
    IncreaseN,
    IncreaseQ,
    /// Tolerance met; the loop ends.
    Accept,
    /// Refinement budget used up.
    Stop,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub n_intervals: usize,
    pub quad_order: usize,
    /// Residual at the solution; recorded as the round's result only when the
    /// quadrature gate passed.
    pub eps_r: f64,
    pub eps_q: f64,
    pub quad_gate_passed: bool,
    pub status: NlpStatus,
    pub iterations: usize,
    /// Residual at the warm start and at the linear cold start on this mesh.
    pub warm_start_residual: f64,
    pub cold_start_residual: f64,
    pub action: RoundAction,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostPhaseRecord {
    pub eps_tol: f64,
    pub cost: f64,
    pub eps_r: f64,
    pub status: NlpStatus,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Success,
    ToleranceNotReached,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: SolverConfig,
    pub rounds: Vec<RoundRecord>,
    pub phase2: Option<CostPhaseRecord>,
    /// Cost of the returned solution.
    pub cost: f64,
    /// Residual of the returned solution at the working quadrature order.
    pub eps_r: f64,
    /// The same residual recomputed with twice the quadrature order.
    pub eps_r_check: f64,
    pub quad_order: usize,
    pub termination: Termination,
    pub solution: SolutionDocument,
}

impl SolveReport {
    pub fn decision_vector(&self) -> Result<DecisionVector> {
        self.solution.decision_vector()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of one residual solve on a given mesh.
pub struct ResidualSolve {
    pub result: NlpResult,
    pub z: DecisionVector,
    pub eps_q: f64,
    pub wall_time_s: f64,
}

/// Solves the residual problem on `mesh` from `z0`.
pub fn solve_residual<P: OcpProblem>(
    problem: &P,
    mesh: &FlexMesh,
    quad_order: usize,
    mode: MeshMode,
    z0: &DecisionVector,
    nlp: &NlpSettings,
) -> Result<ResidualSolve> {
    let start = Instant::now();
    let rule = gauss_legendre(quad_order);
    let t = TranscribedNlp::new(problem, mesh, &rule, Phase::ResidualMin, mode);
    let spec = t.nlp_spec(z0.data.clone());
    let result = solve_with_observer(&spec, &nlp.options(), &mut |_, _| {});
    let eps_q = quad_error_estimate(&t, &result.z, &gauss_legendre(2 * quad_order));
    let z = DecisionVector::from_data(result.z.clone(), t.layout())?;
    Ok(ResidualSolve {
        result,
        z,
        eps_q,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Solves the cost problem with residual budget `eps_tol` from `z0`.
pub fn solve_cost<P: OcpProblem>(
    problem: &P,
    mesh: &FlexMesh,
    quad_order: usize,
    mode: MeshMode,
    eps_tol: f64,
    z0: &DecisionVector,
    nlp: &NlpSettings,
) -> Result<(NlpResult, CostPhaseRecord)> {
    let start = Instant::now();
    let rule = gauss_legendre(quad_order);
    let t = TranscribedNlp::new(problem, mesh, &rule, Phase::CostMin { eps_tol }, mode);
    let spec = t.nlp_spec(z0.data.clone());
    let result = solve_with_observer(&spec, &nlp.warm_options(), &mut |_, _| {});
    let record = CostPhaseRecord {
        eps_tol,
        cost: t.cost(&result.z),
        eps_r: t.integrated_residual(&result.z),
        status: result.status,
        iterations: result.iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((result, record))
}

/// First-round guess: linear between the problem's boundary guesses (zeros
/// when it has none).
pub fn cold_start<P: OcpProblem>(problem: &P, mesh: &FlexMesh) -> DecisionVector {
    let d = problem.dims();
    let (x0, xf) = problem
        .boundary_guess()
        .unwrap_or_else(|| (vec![0.0; d.n_x], vec![0.0; d.n_x]));
    linear_initial_guess(mesh, d.n_u, &x0, &xf)
}

/// Residual-driven refinement followed by the cost phase.
///
/// Each round solves the residual problem. If the quadrature estimate passes
/// the gate, the residual is recorded and either the loop ends (tolerance met)
/// or `N` grows; otherwise `Q` grows. `N` is only increased when another round
/// follows, so the cost phase runs on the mesh that met the tolerance. If the
/// budget runs out, the best recorded round is returned without a cost phase.
pub fn solve_ocp<P: OcpProblem>(problem: &P, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let mut mesh = config.initial_mesh(problem)?;
    let mut q = config.quad_order;
    let mut z0 = cold_start(problem, &mesh);
    let mut rounds: Vec<RoundRecord> = Vec::new();
    // (residual, z, mesh, q) of the best gated round
    let mut best: Option<(f64, DecisionVector, FlexMesh, usize)> = None;
    let mut last: Option<(DecisionVector, FlexMesh, usize)>;
    let mut refinements = 0;
    let mut success = false;
    loop {
        let rule = gauss_legendre(q);
        let probe = TranscribedNlp::new(problem, &mesh, &rule, Phase::ResidualMin, config.mesh_mode);
        let warm_start_residual = probe.integrated_residual(&z0.data);
        let cold_start_residual = probe.integrated_residual(&cold_start(problem, &mesh).data);
        let sol = solve_residual(problem, &mesh, q, config.mesh_mode, &z0, &config.nlp)?;
        let eps_r = sol.result.objective;
        let gate = sol.eps_q <= config.quad_tol();
        if gate && best.as_ref().is_none_or(|b| eps_r < b.0) {
            best = Some((eps_r, sol.z.clone(), sol.z.mesh(&mesh), q));
        }
        let met = gate && eps_r <= config.eps_tol;
        let action = if met {
            RoundAction::Accept
        } else if refinements >= config.max_rounds {
            RoundAction::Stop
        } else if gate {
            RoundAction::IncreaseN
        } else {
            RoundAction::IncreaseQ
        };
        rounds.push(RoundRecord {
            round: rounds.len(),
            n_intervals: mesh.n_intervals(),
            quad_order: q,
            eps_r,
            eps_q: sol.eps_q,
            quad_gate_passed: gate,
            status: sol.result.status,
            iterations: sol.result.iterations,
            warm_start_residual,
            cold_start_residual,
            action,
            wall_time_s: sol.wall_time_s,
        });
        last = Some((sol.z.clone(), sol.z.mesh(&mesh), q));
        match action {
            RoundAction::Accept => {
                success = true;
                break;
            }
            RoundAction::Stop => break,
            RoundAction::IncreaseN => {
                let solved_mesh = sol.z.mesh(&mesh);
                let next = mesh.refined(mesh.n_intervals() * config.n_growth)?;
                z0 = warm_start_expand(&sol.z, &solved_mesh, &next)?;
                mesh = next;
            }
            RoundAction::IncreaseQ => {
                q *= config.q_growth;
                z0 = sol.z;
            }
        }
        refinements += 1;
    }

    if !success {
        let (z, solved_mesh, q) = match best {
            Some((_, z, m, q)) => (z, m, q),
            None => last.expect("at least one round ran"),
        };
        return finish(problem, config, rounds, None, z, solved_mesh, q, Termination::ToleranceNotReached);
    }

    let (z1, solved_mesh, q) = last.expect("accepted round");
    // the cost phase keeps the nominal uniform mesh for its length bounds
    let (result, record) = solve_cost(problem, &mesh, q, config.mesh_mode, config.eps_tol, &z1, &config.nlp)?;
    let z2 = DecisionVector::from_data(result.z, z1.layout)?;
    let usable = record.eps_r <= config.eps_tol && record.cost.is_finite();
    let (z, out_mesh) = if usable {
        let m = z2.mesh(&mesh);
        (z2, m)
    } else {
        (z1, solved_mesh)
    };
    let termination = if usable { Termination::Success } else { Termination::ToleranceNotReached };
    finish(problem, config, rounds, Some(record), z, out_mesh, q, termination)
}

#[allow(clippy::too_many_arguments)]
fn finish<P: OcpProblem>(
    problem: &P,
    config: &SolverConfig,
    rounds: Vec<RoundRecord>,
    phase2: Option<CostPhaseRecord>,
    z: DecisionVector,
    mesh: FlexMesh,
    q: usize,
    termination: Termination,
) -> Result<SolveReport> {
    let t = TranscribedNlp::new(problem, &mesh, &gauss_legendre(q), Phase::ResidualMin, config.mesh_mode);
    let eps_r = t.integrated_residual(&z.data);
    let eps_r_check = t.with_rule(&gauss_legendre(2 * q)).integrated_residual(&z.data);
    Ok(SolveReport {
        config: config.clone(),
        rounds,
        phase2,
        cost: t.cost(&z.data),
        eps_r,
        eps_r_check,
        quad_order: q,
        termination,
        solution: SolutionDocument::new(&z, &mesh)?,
    })
}

/// One cell of the convergence table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub mode: MeshMode,
    pub n_intervals: usize,
    pub eps_r: f64,
    pub status: NlpStatus,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted slope of `log eps_R` against `log(1/N)` per mode, over the
    /// points before any plateau.
    pub flexible_slope: Option<f64>,
    pub fixed_slope: Option<f64>,
}

impl ConvergenceStudy {
    pub fn values(&self, mode: MeshMode) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| (r.n_intervals, r.eps_r))
            .collect()
    }
}

/// Least-squares slope of `log eps` against `log(1/N)`, fitted over the
/// leading points up to the first step improving by less than 10%.
pub fn fit_slope(points: &[(usize, f64)]) -> Option<f64> {
    let mut used = points
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .copied()
        .collect::<Vec<_>>();
    if let Some(k) = used.windows(2).position(|w| w[1].1 > 0.9 * w[0].1) {
        used.truncate(k + 1);
    }
    if used.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = used.iter().map(|(n, _)| -(*n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, e)| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Minimum residual for each `N` and both mesh modes. Within a mode each
/// solve is warm-started from the previous `N`; failed cells are recorded
/// with their status and the sweep continues.
pub fn convergence_study<P: OcpProblem>(
    problem: &P,
    config: &SolverConfig,
    n_list: &[usize],
) -> Result<ConvergenceStudy> {
    config.validate()?;
    let mut rows = Vec::new();
    for mode in [MeshMode::Flexible, MeshMode::Fixed] {
        let mut prev: Option<(DecisionVector, FlexMesh)> = None;
        for &n in n_list {
            let mesh = uniform_mesh(
                problem.t0(),
                problem.tf(),
                n,
                config.state_degree,
                config.input_degree,
                config.flexibility,
            )?;
            let z0 = match &prev {
                Some((z, m)) => warm_start_expand(z, m, &mesh)?,
                None => cold_start(problem, &mesh),
            };
            let sol = solve_residual(problem, &mesh, config.quad_order, mode, &z0, &config.nlp)?;
            rows.push(ConvergenceRow {
                mode,
                n_intervals: n,
                eps_r: sol.result.objective,
                status: sol.result.status,
                iterations: sol.result.iterations,
            });
            let m = sol.z.mesh(&mesh);
            prev = Some((sol.z, m));
        }
    }
    let mut study = ConvergenceStudy {
        rows,
        flexible_slope: None,
        fixed_slope: None,
    };
    study.flexible_slope = fit_slope(&study.values(MeshMode::Flexible));
    study.fixed_slope = fit_slope(&study.values(MeshMode::Fixed));
    Ok(study)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub eps_tol: f64,
    pub eps_r: f64,
    pub cost: f64,
    pub status: NlpStatus,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParetoSweep {
    pub points: Vec<ParetoPoint>,
    /// Residual and cost of the residual-only solution (cost not optimized).
    pub residual_only: ParetoPoint,
}

/// Cost against residual tolerance on the fixed mesh size of `config`.
///
/// The residual problem is solved once; the cost problems then run from the
/// tightest tolerance to the loosest, each warm-started from the previous
/// point, which stays feasible as the budget only grows.
pub fn pareto_sweep<P: OcpProblem>(
    problem: &P,
    config: &SolverConfig,
    eps_list: &[f64],
) -> Result<ParetoSweep> {
    config.validate()?;
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("residual tolerances must be positive".into()));
    }
    let mesh = config.initial_mesh(problem)?;
    let q = config.quad_order;
    let sol = solve_residual(problem, &mesh, q, config.mesh_mode, &cold_start(problem, &mesh), &config.nlp)?;
    let t = TranscribedNlp::new(problem, &mesh, &gauss_legendre(q), Phase::ResidualMin, config.mesh_mode);
    let residual_only = ParetoPoint {
        eps_tol: sol.result.objective,
        eps_r: sol.result.objective,
        cost: t.cost(&sol.z.data),
        status: sol.result.status,
        iterations: sol.result.iterations,
    };
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&i, &j| eps_list[i].total_cmp(&eps_list[j]));
    let mut z = sol.z;
    let mut points: Vec<Option<ParetoPoint>> = vec![None; eps_list.len()];
    for i in order {
        let eps = eps_list[i];
        let (result, record) = solve_cost(problem, &mesh, q, config.mesh_mode, eps, &z, &config.nlp)?;
        if record.eps_r <= eps && record.cost.is_finite() {
            z = DecisionVector::from_data(result.z, z.layout)?;
        }
        points[i] = Some(ParetoPoint {
            eps_tol: eps,
            eps_r: record.eps_r,
            cost: record.cost,
            status: record.status,
            iterations: record.iterations,
        });
    }
    Ok(ParetoSweep {
        points: points.into_iter().map(|p| p.expect("every tolerance solved")).collect(),
        residual_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(usize, f64)> = [5usize, 10, 20, 40].iter().map(|&n| (n, 3.0 / (n * n) as f64)).collect();
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_ignores_plateau() {
        let pts = vec![(5, 1e-2), (10, 5e-3), (20, 2.5e-3), (40, 2.4e-3), (80, 2.39e-3)];
        assert!((fit_slope(&pts).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let c = SolverConfig { eps_tol: 0.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
        let c = SolverConfig { n_intervals: 0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
        assert_eq!(SolverConfig::default().quad_tol(), 1e-10);
    }
}
