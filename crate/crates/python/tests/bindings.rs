use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(flexocp_py::flexocp_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("flexocp", module).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            panic!("{e}");
        }
    });
}

#[test]
fn registry_and_kernels() {
    run(r#"
import math
assert "fuller" in flexocp.problems()
x, u = flexocp.oracle("exp_growth", 1.0)
assert abs(x[0] - math.e) < 1e-12
nodes, weights = flexocp.gauss_legendre(3)
assert abs(sum(weights) - 2.0) < 1e-14
assert flexocp.parse_n_list("5:60") == [5, 10, 20, 40, 60]
"#);
}

#[test]
fn solve_exp_growth() {
    run(r#"
import math
sol = flexocp.solve("exp_growth", flexocp.Config(eps_tol=1e-8))
assert sol.success and sol.eps_r <= 1e-8
assert abs(sol.state(1.0)[0] - math.e) < 1e-4
"#);
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
for bad, exc in [(lambda: flexocp.solve("nosuch"), KeyError),
                 (lambda: flexocp.solve("fuller", flexocp.Config(mesh="x")), ValueError),
                 (lambda: flexocp.solve("fuller", flexocp.Config(flex=1.5)), ValueError),
                 (lambda: flexocp.parse_n_list("9:3"), ValueError)]:
    try:
        bad()
    except exc:
        pass
    else:
        raise AssertionError("no error")
"#);
}
