#!/usr/bin/env python3
"""Smoke test for the _cpinterp extension module.

Builds the extension if needed, copies it next to this script under the
importable name, and exercises every exported function.
"""

import math
import pathlib
import shutil
import subprocess
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def ensure_module():
    target = HERE / "_cpinterp.so"
    candidates = [
        ROOT / "target" / "release" / "lib_cpinterp.so",
        ROOT / "target" / "debug" / "lib_cpinterp.so",
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        subprocess.run(
            ["cargo", "build", "-p", "cpinterp-py"], cwd=ROOT, check=True
        )
        built = candidates[1]
    shutil.copy2(built, target)
    sys.path.insert(0, str(HERE))


def approx_equal(x, y, tol=1e-9):
    return abs(x - y) <= tol


def matrix_close(m1, m2, tol=1e-8):
    return all(
        abs(a - b) <= tol for row1, row2 in zip(m1, m2) for a, b in zip(row1, row2)
    )


def main():
    ensure_module()
    import _cpinterp as cp

    print(f"_cpinterp {cp.__version__}")

    identity2 = [[1, 0], [0, 1]]
    sigma1 = [[0, -1j], [1j, 0]]
    sigma2 = [[0, 1], [1, 0]]
    sigma3 = [[1, 0], [0, -1]]
    paulis = [identity2, sigma1, sigma2, sigma3]

    # Full-span identity instance: the unique interpolant is the identity
    # channel, so solve must return a single Kraus element equal to I.
    result = cp.solve(2, 2, paulis, paulis)
    assert result["status"] == "solved", result
    assert len(result["kraus"]) == 1
    assert matrix_close(result["kraus"][0], identity2)
    assert max(result["residuals"]) <= 1e-8
    print("solve: identity channel recovered")

    verdict = cp.check(2, 2, paulis, paulis)
    assert verdict["status"] == "feasible", verdict
    assert verdict["lambda_min"] >= -1e-8
    print(f"check: feasible, lambda_min = {verdict['lambda_min']:.3e}")

    # PSD source with an indefinite target violates the type precheck.
    verdict = cp.check(2, 2, [[[1, 0], [0, 0]]], [sigma3])
    assert verdict["status"] == "precheck-failed", verdict
    assert "positive semidefinite" in verdict["prechecks"][0]
    print("check: type mismatch caught by prechecks")

    # Single pair: sigma3 -> diag(1, 1, -1, -1) needs exactly two elements.
    big = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]]
    single = cp.single_pair_solve(sigma3, big)
    assert single["minimal_rank"] == 2, single
    assert len(single["kraus"]) == 2
    image = cp.apply_kraus(single["kraus"], sigma3)
    assert matrix_close(image, big)
    print("single_pair_solve: rank 2 construction reproduces the target")

    try:
        cp.single_pair_solve([[1, 0], [0, 0]], sigma3)
    except ValueError as exc:
        print(f"single_pair_solve: infeasible pair raises ValueError ({exc})")
    else:
        raise AssertionError("infeasible pair must raise")

    assert cp.matrix_inertia(sigma3) == (1, 0, 1)
    assert cp.matrix_inertia(identity2) == (0, 0, 2)
    print("matrix_inertia: signatures agree")

    # Choi conversion round trip on a random-ish Hermitian matrix.
    h = [
        [2, 0.5 + 0.25j, 0, 0.125j],
        [0.5 - 0.25j, 1, -0.5, 0],
        [0, -0.5, 0.5, 1j],
        [-0.125j, 0, -1j, 3],
    ]
    choi = cp.density_to_choi(h, 2, 2)
    back = cp.choi_to_density(choi, 2, 2)
    assert matrix_close(back, h, tol=1e-12)
    print("density_to_choi / choi_to_density: round trip exact")

    # Kraus extraction from the identity-channel Choi matrix.
    choi_id = [
        [1, 0, 0, 1],
        [0, 0, 0, 0],
        [0, 0, 0, 0],
        [1, 0, 0, 1],
    ]
    ops = cp.kraus_from_choi(choi_id, 2, 2)
    assert len(ops) == 1
    assert matrix_close(ops[0], identity2)
    print("kraus_from_choi: identity Choi matrix gives one identity element")

    # The Pauli span of {I, sigma1, sigma2} has I as an obvious
    # positive-definite element; a witness must exist and be PD.
    witness = cp.positive_definite_element([identity2, sigma1, sigma2])
    assert witness is not None
    kminus, kzero, kplus = cp.matrix_inertia(witness)
    assert (kminus, kzero, kplus) == (0, 0, 2)
    norm = math.sqrt(sum(abs(z) ** 2 for row in witness for z in row))
    assert approx_equal(norm, 1.0, tol=1e-6)
    print("positive_definite_element: unit-norm PD witness found")

    print("smoke test passed")


if __name__ == "__main__":
    main()
