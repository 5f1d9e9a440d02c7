#!/usr/bin/env python3
"""Smoke test for the vofem_py extension module.

Build the module first:

    cargo build --release -p vofem-py

then run this script from the workspace root:

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile


def load_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", profile, name)
        for profile in ("release", "debug")
        for name in ("libvofem_py.so", "vofem_py.so", "libvofem_py.dylib")
    ]
    built = next((c for c in candidates if os.path.exists(c)), None)
    if built is None:
        sys.exit("vofem_py cdylib not found; run: cargo build --release -p vofem-py")
    stage = tempfile.mkdtemp(prefix="vofem-py-")
    shutil.copy(built, os.path.join(stage, "vofem_py.so"))
    sys.path.insert(0, stage)
    import vofem_py

    return vofem_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = load_module()

    # Order family: endpoints, midpoint, flat ends.
    vo = m.VarOrder.smooth_transition(0.6, 0.4)
    approx(vo.alpha(0.0), 0.6, 1e-14)
    approx(vo.alpha(1.0), 0.4, 1e-14)
    approx(vo.alpha(0.5), 0.5, 1e-13)
    approx(vo.alpha_prime(0.0), 0.0, 1e-13)
    approx(vo.alpha0, 0.6, 1e-14)
    approx(vo.alpha1, 0.4, 1e-14)

    try:
        m.VarOrder.smooth_transition(1.5, 0.4)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range order must raise ValueError")

    # Assumption checks: pass for the family, fail for alpha > 1.
    k = m.Kinetic.constant(1.0)
    report = m.check_assumptions(vo, k, 1.0, 64)
    assert report["passed"] and not report["violations"]
    report = m.check_assumptions(m.VarOrder.constant(1.1), k, 1.0, 32)
    assert not report["passed"]

    # Graded mesh nodes t_n = T (n/N)^r.
    mesh = m.TimeMesh.graded(1.0, 4, 2.0)
    for got, want in zip(mesh.nodes, [0.0, 1 / 16, 1 / 4, 9 / 16, 1.0]):
        approx(got, want, 1e-15)

    # Weight row on the uniform two-step mesh at order 1/2.
    half = m.VarOrder.constant(0.5)
    mesh2 = m.TimeMesh.uniform(1.0, 2)
    alpha_n, weights = m.weight_row(mesh2, half, 2)
    approx(alpha_n, 0.5, 1e-15)
    approx(weights[0], 0.5857864376269049, 1e-14)
    approx(weights[1], 1.4142135623730951, 1e-14)

    # Discrete operator is exact on data linear in time.
    mesh8 = m.TimeMesh.graded(1.0, 8, 2.5)
    history = [2.0 * t for t in mesh8.nodes]
    got = m.discrete_caputo(history, mesh8, vo, 8)
    a = vo.alpha(1.0)
    approx(got, 2.0 / m.gamma(1.0 + a), 1e-12)

    # Quadrature oracles against closed forms.
    approx(m.gamma(0.5), math.sqrt(math.pi), 1e-14)
    approx(m.frac_integral(lambda s: 1.0, half, 1.0), 2.0 / math.sqrt(math.pi), 1e-8)
    approx(m.caputo(lambda s: s, lambda s: 1.0, half, 0.81), 0.9 / m.gamma(1.5), 1e-8)
    approx(
        m.riemann_liouville(lambda s: 1.0, lambda s: 0.0, half, 0.25),
        2.0 / math.sqrt(math.pi),
        1e-8,
    )

    # Box mesh bookkeeping: m^d * d! simplices, (m-1)^d interior nodes.
    assert m.box_mesh_counts(1, 4) == (5, 3, 4)
    assert m.box_mesh_counts(2, 2) == (9, 1, 8)
    assert m.box_mesh_counts(3, 2) == (27, 1, 48)

    # One manufactured solve and a small temporal sweep.
    result = m.solve_manufactured(1, 128, 8, 0.6, 0.4)
    approx(result["grading"], 2.0 / 0.6, 1e-12)
    assert 0.0 < result["final_error"] < 0.1

    table = m.temporal_convergence(1, 256, [4, 8, 16], 0.6, 0.4)
    rows = table["rows"]
    assert len(rows) == 3
    errors = [row[1] for row in rows]
    assert errors[0] > errors[1] > errors[2]
    rate = rows[-1][2]
    assert 0.7 < rate < 1.2, f"unexpected rate {rate}"
    assert table["csv"].startswith("# axis=Temporal")

    print("vofem_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
