//! Regenerates the Fuller reference cost: residual solve then cost solve on
//! N=120 intervals, a=2, b=1, Q=3 at eps_tol=1e-12.
//!
//! Usage: `cargo run --release --example fuller_reference [fixed|flexible]`

use flexocp::driver::{cold_start, solve_cost, solve_residual, NlpSettings};
use flexocp::mesh::uniform_mesh;
use flexocp::ocp_model::fuller_problem;
use flexocp::transcription::MeshMode;

fn main() -> flexocp::Result<()> {
    let mode = match std::env::args().nth(1).as_deref() {
        Some("fixed") => MeshMode::Fixed,
        _ => MeshMode::Flexible,
    };
    let p = fuller_problem();
    let mesh = uniform_mesh(0.0, 300.0, 120, 2, 1, 0.5)?;
    let nlp = NlpSettings::default();
    let res = solve_residual(&p, &mesh, 3, mode, &cold_start(&p, &mesh), &nlp)?;
    println!("residual {:?} eps_r={:e} iterations={}", res.result.status, res.result.objective, res.result.iterations);
    let (_, rec) = solve_cost(&p, &mesh, 3, mode, 1e-12, &res.z, &nlp)?;
    println!("cost {:?} cost={:.9} eps_r={:e} iterations={}", rec.status, rec.cost, rec.eps_r, rec.iterations);
    Ok(())
}
