mod common;

use flexocp::driver::{solve_ocp, SolverConfig, Termination};
use flexocp::problems::lookup;

#[test]
fn smooth_problems_match_their_oracles() {
    let c = common::oracle_equivalence();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn periodic_growth_converges_under_refinement() {
    let e = lookup("periodic_growth").unwrap();
    let config = SolverConfig { eps_tol: 1e-6, ..SolverConfig::default() };
    let report = solve_ocp(&e.problem, &config).unwrap();
    assert_eq!(report.termination, Termination::Success);
    assert!(common::oracle_error(&e.problem, &report) <= 1e-3);
    assert!(report.rounds.iter().any(|r| r.quad_order > 3), "expected the quadrature gate to fire");
}
