mod common;

#[test]
fn quadrature_gate_drives_q_and_residual_drives_n() {
    let c = common::loop_contract();
    assert!(c.passed, "{}", c.detail);
}
