import numpy as np
import pytest

from mabvp import expressions as ex
from mabvp.model import (
    Mesh,
    Profile,
    ProblemSpec,
    cone_check,
    hessian_det_radial,
    norm,
    profile_from_csv,
    profile_to_csv,
    to_solution,
)


def _profile(fns, M=64):
    return Profile.from_callables(fns, M)


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh(8)
    with pytest.raises(ValueError):
        Mesh(18)  # not divisible by 4
    m = Mesh(64)
    assert m.h == 1 / 64
    assert m.nodes[m.quarter_index] == 0.25
    assert m.nodes[m.three_quarter_index] == 0.75


def test_problem_spec_validation():
    f = (ex.parse("v1", 1),)
    with pytest.raises(ValueError):
        ProblemSpec(N=0, n=1, lam=1.0, f=f, M=64)
    with pytest.raises(ValueError):
        ProblemSpec(N=1, n=1, lam=-1.0, f=f, M=64)
    with pytest.raises(ValueError):
        ProblemSpec(N=1, n=2, lam=1.0, f=f, M=64)  # wrong expression count
    with pytest.raises(ValueError):
        ProblemSpec(N=1, n=1, lam=1.0, f=(ex.parse("v1+v2", 2),), M=64)  # v2 with n=1


def test_norm_parabola():
    assert norm(_profile([lambda t: 1 - t**2])) == 1.0


def test_norm_zero():
    assert norm(Profile.zeros(2, 64)) == 0.0


def test_norm_two_components():
    v = _profile([lambda t: 1 - t, lambda t: 2 * (1 - t**2)])
    assert norm(v) == 3.0


def test_norm_homogeneous():
    rng = np.random.default_rng(0)
    base = rng.random((3, 65))
    for c in (0.0, 0.37, 5.5):
        assert norm(c * base) == pytest.approx(c * norm(base), rel=1e-13)


def test_cone_pass_parabola():
    report = cone_check(_profile([lambda t: 1 - t**2]))
    assert report.ok
    assert report.quarter_min == pytest.approx(7 / 16)


def test_cone_zero_slack_line():
    report = cone_check(_profile([lambda t: 1 - t]))
    assert report.ok
    assert report.quarter_slack == pytest.approx(0.0, abs=1e-15)


def test_cone_fails_compact_spike():
    report = cone_check(_profile([lambda t: np.maximum(0.0, 1 - 4 * t)]))
    assert not report.ok
    assert not report.quarter_ok


def test_cone_scaled_parabolas_always_pass():
    rng = np.random.default_rng(5)
    for _ in range(50):
        cs = rng.uniform(0, 4, size=int(rng.integers(1, 4)))
        v = Profile(np.array([c * (1 - np.linspace(0, 1, 65) ** 2) for c in cs]))
        assert cone_check(v).ok


def test_cone_component_bound_applies_to_concave():
    report = cone_check(_profile([lambda t: 1 - t**2]))
    (comp,) = report.components
    assert comp.applicable and comp.ok


def test_to_solution_parabola_is_convex():
    spec = ProblemSpec(N=1, n=1, lam=1.0, f=(ex.parse("1", 1),), M=64)
    pair = to_solution(_profile([lambda t: (1 - t**2) / 2]), spec)
    assert pair.convex_ok and pair.slope_ok and not pair.trivial
    np.testing.assert_array_equal(pair.u, -pair.v.values)


def test_to_solution_zero_is_trivial():
    spec = ProblemSpec(N=1, n=1, lam=1.0, f=(ex.parse("1", 1),), M=64)
    pair = to_solution(Profile.zeros(1, 64), spec)
    assert pair.trivial


def test_to_solution_cosine_profile():
    spec = ProblemSpec(N=1, n=1, lam=1.0, f=(ex.parse("v1", 1),), M=256)
    pair = to_solution(_profile([lambda t: np.cos(np.pi * t / 2)], M=256), spec)
    assert pair.convex_ok and pair.slope_ok
    # second derivative of -cos(pi t/2) is (pi/2)^2 cos(pi t/2) >= 0
    assert pair.convexity_margin >= -1e-10


def test_to_solution_flags_nonconvex():
    spec = ProblemSpec(N=1, n=1, lam=1.0, f=(ex.parse("1", 1),), M=64)
    # v = (1-t)^2 is convex, so u = -v has u'' = -2 < 0
    pair = to_solution(_profile([lambda t: (1 - t) ** 2]), spec)
    assert not pair.convex_ok


def test_hessian_det_quadratic():
    mesh = Mesh(64)
    u = mesh.nodes**2 - 1
    det, det0 = hessian_det_radial(u, 2, mesh)
    np.testing.assert_allclose(det, 4.0, rtol=1e-10)
    assert det0 == pytest.approx(4.0, rel=1e-9)
    det, det0 = hessian_det_radial(u, 3, mesh)
    np.testing.assert_allclose(det, 8.0, rtol=1e-10)
    assert det0 == pytest.approx(8.0, rel=1e-9)


def test_hessian_det_quartic_against_symbolic():
    # u = (r^4 - 1)/4: u' = r^3, u'' = 3 r^2, det (N=2) = 3 r^4
    mesh = Mesh(256)
    u = (mesh.nodes**4 - 1) / 4
    det, _ = hessian_det_radial(u, 2, mesh)
    r = mesh.nodes[1:-1]
    np.testing.assert_allclose(det, 3 * r**4, atol=2e-4)


def test_hessian_det_nonnegative_for_convex():
    rng = np.random.default_rng(9)
    mesh = Mesh(64)
    for _ in range(20):
        # convex decreasing-to-zero construction: integrate a nonneg
        # nondecreasing slope from the right
        slopes = np.cumsum(rng.random(mesh.intervals))
        v = np.concatenate([(slopes[k:] * mesh.h).sum(keepdims=True) for k in range(mesh.intervals)] + [np.zeros(1)])
        det, det0 = hessian_det_radial(-v, 2, mesh)
        assert det.min() >= -1e-12
        assert det0 >= -1e-12


def test_profile_csv_round_trip():
    rng = np.random.default_rng(2)
    p = Profile(rng.random((2, 65)))
    q = profile_from_csv(profile_to_csv(p))
    np.testing.assert_array_equal(p.values, q.values)


def test_profile_csv_header():
    text = profile_to_csv(Profile.zeros(3, 64))
    assert text.splitlines()[0] == "t,v1,v2,v3"


def test_profile_values_read_only():
    p = Profile.zeros(1, 64)
    with pytest.raises(ValueError):
        p.values[0, 0] = 1.0
