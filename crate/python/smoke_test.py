"""Smoke test for the flexocp Python bindings."""

import json
import math

import flexocp


def main():
    names = flexocp.problems()
    assert "fuller" in names and "exp_growth" in names, names
    assert flexocp.reference_cost("fuller") > 0

    x, u = flexocp.oracle("exp_growth", 1.0)
    assert abs(x[0] - math.e) < 1e-12

    nodes, weights = flexocp.gauss_legendre(4)
    assert abs(sum(weights) - 2.0) < 1e-14
    assert abs(sum(w * t**6 for t, w in zip(nodes, weights)) - 2.0 / 7.0) < 1e-14
    cheb = flexocp.chebyshev2_nodes(2)
    assert max(abs(a - b) for a, b in zip(cheb, [-1.0, 0.0, 1.0])) < 1e-15
    assert flexocp.parse_n_list("5:60") == [5, 10, 20, 40, 60]

    sol = flexocp.solve("exp_growth", flexocp.Config(eps_tol=1e-10))
    assert sol.success, sol
    assert sol.eps_r <= 1e-10
    err = max(abs(sol.state(t)[0] - math.exp(t)) for t in [0.0, 0.25, 0.5, 0.75, 1.0])
    assert err < 1e-6, err
    t, xs, us, is_node = sol.sample()
    assert len(t) == len(xs) and sum(is_node) == len(sol.nodes)
    report = json.loads(sol.to_json())
    assert report["termination"] == "Success"
    assert sol.trajectory_csv().startswith("t,")

    cfg = flexocp.Config(n=40, eps_tol=1e-10, mesh="fixed")
    di = flexocp.solve("double_integrator_energy", cfg)
    assert abs(di.cost - 12.0) / 12.0 < 1e-2, di.cost

    sol = flexocp.solve("fuller", flexocp.Config(eps_tol=1e-8))
    assert sol.success
    assert max(abs(u[0]) for u in sol.sample()[2]) <= 0.01 + 1e-9
    print(sol)

    try:
        flexocp.solve("fuller", flexocp.Config(mesh="nope"))
    except ValueError:
        pass
    else:
        raise AssertionError("bad mesh accepted")
    try:
        flexocp.solve("nosuch")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown problem accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
