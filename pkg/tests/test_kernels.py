"""The numba and numpy backends must agree on every kernel."""

import numpy as np
import pytest

from mabvp import expressions as ex
from mabvp.kernels import get_backend

BACKENDS = [get_backend("numpy"), get_backend("numba")]


def _tapes(texts, n):
    return ex.pack_tapes(tuple(ex.parse(t, n) for t in texts), n)


def test_eval_point_agreement():
    tapes = _tapes(["exp(0.3*v1) + (v1+v2)^1.5/(1+v2)"], 2)
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.uniform(0, 4, size=2)
        vals = [
            b.eval_point(tapes.ops[0], tapes.args[0], int(tapes.lengths[0]), v)
            for b in BACKENDS
        ]
        assert vals[0] == pytest.approx(vals[1], rel=1e-14, abs=1e-300)


def test_eval_grid_agreement_and_matches_point():
    tapes = _tapes(["(v1+2*v2)^2 + exp(v1)"], 2)
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 3, size=(2, 40))
    grids = [b.eval_grid(tapes.ops[0], tapes.args[0], int(tapes.lengths[0]), pts) for b in BACKENDS]
    np.testing.assert_allclose(grids[0], grids[1], rtol=1e-14)
    for j in range(pts.shape[1]):
        p = BACKENDS[0].eval_point(tapes.ops[0], tapes.args[0], int(tapes.lengths[0]), pts[:, j])
        assert grids[0][j] == pytest.approx(p, rel=1e-14)


def test_invalid_values_are_not_masked():
    tapes = _tapes(["v1 - v2"], 2)
    pts = np.array([[0.0], [1.0]])
    for b in BACKENDS:
        value = b.eval_grid(tapes.ops[0], tapes.args[0], int(tapes.lengths[0]), pts)[0]
        assert value == -1.0
    tapes = _tapes(["1/v1"], 1)
    for b in BACKENDS:
        value = b.eval_point(tapes.ops[0], tapes.args[0], int(tapes.lengths[0]), np.array([0.0]))
        assert np.isinf(value)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_shoot_agreement(N):
    tapes = _tapes(["(v1+v2)^1", "(v1+v2)^3"], 2)
    alpha = np.array([0.7, 1.3])
    results = [b.shoot(alpha, 0.9, N, 128, tapes.ops, tapes.args, tapes.lengths, tapes.stack_need)
               for b in BACKENDS]
    for (v0, w0, s0), (v1, w1, s1) in zip(results, results[1:]):
        assert s0 == s1 == 0
        np.testing.assert_allclose(v0, v1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(w0, w1, rtol=1e-12, atol=1e-14)


def test_shoot_status_on_invalid_nonlinearity():
    tapes = _tapes(["v1 - 10"], 1)  # negative near the origin
    for b in BACKENDS:
        _, _, status = b.shoot(np.array([1.0]), 1.0, 1, 64, tapes.ops, tapes.args,
                               tapes.lengths, tapes.stack_need)
        assert status != 0


@pytest.mark.parametrize("N", [1, 2, 3])
def test_operator_apply_agreement(N):
    tapes = _tapes(["exp(0.2*(v1+v2))", "(v1+v2)^2"], 2)
    t = np.linspace(0, 1, 129)
    values = np.vstack([1.5 * (1 - t**2), 0.5 * (1 - t)])
    results = [b.operator_apply(values, 1.7, N, tapes.ops, tapes.args, tapes.lengths,
                                tapes.stack_need) for b in BACKENDS]
    for (o0, s0), (o1, s1) in zip(results, results[1:]):
        assert s0 == s1 == 0
        np.testing.assert_allclose(o0, o1, rtol=1e-12, atol=1e-15)


def test_operator_apply_status_flags_component():
    tapes = _tapes(["v1", "v1 - 5"], 2)
    t = np.linspace(0, 1, 65)
    values = np.vstack([(1 - t), (1 - t)])
    for b in BACKENDS:
        _, status = b.operator_apply(values, 1.0, 1, tapes.ops, tapes.args, tapes.lengths,
                                     tapes.stack_need)
        assert status == 2  # second component is the invalid one


def test_dispatch_selects_a_backend():
    import mabvp.kernels as kernels

    assert kernels.BACKEND in ("numba", "numpy")
    assert callable(kernels.shoot) and callable(kernels.operator_apply)
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_forced_numpy_backend_selection(tmp_path):
    import subprocess
    import sys

    code = "import mabvp.kernels as k; print(k.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True, env={"MABVP_BACKEND": "numpy", "PATH": "/usr/bin:/bin"},
    )
    assert out.stdout.strip() == "numpy"
