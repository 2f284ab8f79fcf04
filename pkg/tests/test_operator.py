import numpy as np
import pytest

from mabvp import expressions as ex
from mabvp.integral_operator import PowerMap, apply, inner_accumulate, residual
from mabvp.model import Profile, ProblemSpec, cone_check, norm
from mabvp.analysis import gamma_constant


def _spec(text, N=1, n=1, lam=1.0, M=256):
    return ProblemSpec(N=N, n=n, lam=lam, f=tuple(ex.parse(t, n) for t in ([text] * n if isinstance(text, str) else text)), M=M)


def _parabola(n=1, M=256, c=1.0):
    t = np.linspace(0, 1, M + 1)
    return Profile(np.array([c * (1 - t**2)] * n))


def test_power_map_inverse_pair():
    pm = PowerMap(3)
    x = np.linspace(0, 7, 50)
    np.testing.assert_allclose(pm.inverse(pm.forward(x)), x, rtol=1e-12)
    np.testing.assert_allclose(pm.forward(pm.inverse(x)), x, rtol=1e-12)
    assert np.all(np.diff(pm.forward(x)) > 0)


def test_inner_accumulate_constant_f_exact_for_linear_weight():
    # N=1 trapezoid is exact on the constant integrand: w(t) = lam * t
    spec = _spec("1", N=1, lam=1.0, M=64)
    w = inner_accumulate(_parabola(M=64), 0, spec)
    np.testing.assert_allclose(w, np.linspace(0, 1, 65), atol=1e-15)


def test_inner_accumulate_exact_on_linear_integrand():
    # N=2: the integrand 2*tau is linear, so the trapezoid rule is exact
    spec = _spec("1", N=2, lam=1.0, M=64)
    w = inner_accumulate(_parabola(M=64), 0, spec)
    t = np.linspace(0, 1, 65)
    np.testing.assert_allclose(w, t**2, atol=1e-14)


def test_inner_accumulate_converges_to_power():
    # f == 1, N=3: w(t) -> t^3 at O(h^2)
    errs = []
    for M in (64, 128, 256):
        spec = _spec("1", N=3, lam=1.0, M=M)
        w = inner_accumulate(_parabola(M=M), 0, spec)
        t = np.linspace(0, 1, M + 1)
        errs.append(np.abs(w - t**3).max())
    assert errs[0] > 0
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


def test_inner_accumulate_zero_input_zero_f():
    spec = _spec("v1", N=2, lam=3.0, M=64)
    w = inner_accumulate(Profile.zeros(1, 64), 0, spec)
    np.testing.assert_array_equal(w, np.zeros(65))


def test_inner_accumulate_total_mass():
    # w(1) = lam * c up to O(h^2) for f == c
    spec = _spec("2.5", N=2, lam=1.75, M=512)
    w = inner_accumulate(_parabola(M=512), 0, spec)
    assert w[-1] == pytest.approx(1.75 * 2.5, rel=1e-5)
    assert np.all(np.diff(w) >= 0) and w[0] == 0.0


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_apply_constant_f_closed_form(N, lam):
    spec = _spec("1", N=N, lam=lam, M=2048)
    t = np.linspace(0, 1, 2049)
    rng = np.random.default_rng(1)
    arbitrary = Profile(np.abs(rng.standard_normal((1, 2049))))
    out = apply(arbitrary, spec)
    exact = lam ** (1.0 / N) * (1 - t**2) / 2
    assert np.abs(out.values[0] - exact).max() <= 1e-5
    assert out.values[0, -1] == 0.0


def test_apply_zero_fixed_point():
    spec = _spec("v1^2", N=1, lam=1.0, M=64)
    out = apply(Profile.zeros(1, 64), spec)
    np.testing.assert_array_equal(out.values, np.zeros((1, 65)))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_apply_scaling_identity(N):
    spec1 = _spec("(v1+v2)^2", N=N, n=2, lam=1.0, M=128)
    v = _parabola(n=2, M=128)
    base = apply(v, spec1).values
    for lam in (0.25, 2.0, 9.0):
        out = apply(v, ProblemSpec(N=N, n=2, lam=lam, f=spec1.f, M=128)).values
        expected = lam ** (1.0 / N) * base
        mask = expected != 0
        rel = np.abs(out[mask] - expected[mask]) / np.abs(expected[mask])
        assert rel.max() <= 1e-12
        np.testing.assert_array_equal(out[~mask], expected[~mask])


def test_apply_monotone_in_lambda():
    f = ("exp(0.3*(v1+v2))", "(v1+v2)^2")
    v = _parabola(n=2, M=128)
    prev = None
    for lam in (0.5, 1.0, 2.0, 4.0):
        spec = ProblemSpec(N=2, n=2, lam=lam, f=tuple(ex.parse(t, 2) for t in f), M=128)
        out = apply(v, spec).values
        if prev is not None:
            assert np.all(out >= prev - 1e-15)
        prev = out


def _random_cone_profile(rng, n, M, scale=2.0):
    h = 1.0 / M
    values = np.empty((n, M + 1))
    for i in range(n):
        slopes = np.cumsum(rng.random(M))
        tail = np.concatenate([np.cumsum((slopes * h)[::-1])[::-1], [0.0]])
        values[i] = tail * rng.uniform(0.1, scale) / max(tail[0], 1e-12)
    return Profile(values)


def test_cone_invariance_sample():
    rng = np.random.default_rng(12)
    spec = ProblemSpec(
        N=2, n=2, lam=1.3,
        f=(ex.parse("(v1+v2)^2", 2), ex.parse("exp(0.5*(v1+v2))", 2)), M=128,
    )
    for _ in range(100):
        v = _random_cone_profile(rng, 2, 128)
        assert cone_check(v).ok  # generator produces cone members
        assert cone_check(apply(v, spec)).ok


def test_lower_bound_inequality_for_matched_power():
    # f_i = (eta * sum v)^N  ->  ||T v|| >= lam^(1/N) * Gamma * eta * ||v||
    rng = np.random.default_rng(21)
    for N in (1, 2):
        eta, lam = 0.7, 2.0
        gamma = gamma_constant(N)
        text = f"(0.7*(v1+v2))^{N}"
        spec = ProblemSpec(N=N, n=2, lam=lam, f=(ex.parse(text, 2),) * 2, M=128)
        for _ in range(50):
            v = _random_cone_profile(rng, 2, 128)
            lower = lam ** (1.0 / N) * gamma * eta * norm(v)
            assert norm(apply(v, spec)) >= lower


def test_upper_bound_inequality_for_matched_power():
    # f_i = (eps * sum v)^N with envelope (eps r)^N -> ||T v|| <= lam^(1/N)*eps*n*||v||
    rng = np.random.default_rng(22)
    for N in (1, 2):
        eps, lam, n = 0.4, 1.5, 2
        text = f"(0.4*(v1+v2))^{N}"
        spec = ProblemSpec(N=N, n=n, lam=lam, f=(ex.parse(text, 2),) * 2, M=128)
        for _ in range(50):
            v = _random_cone_profile(rng, 2, 128)
            upper = lam ** (1.0 / N) * eps * n * norm(v)
            assert norm(apply(v, spec)) <= upper * (1 + 1e-12)


def test_residual_constant_f_fixed_point():
    for N in (1, 2, 3):
        spec = _spec("1", N=N, lam=1.7, M=2048)
        t = np.linspace(0, 1, 2049)
        v = Profile((1.7 ** (1.0 / N) * (1 - t**2) / 2)[None, :])
        assert residual(v, spec) <= 1e-5


def test_residual_zero_on_trivial():
    spec = _spec("v1^2", N=1, lam=1.0, M=64)
    assert residual(Profile.zeros(1, 64), spec) == 0.0


def test_residual_eigenfunction_second_order():
    lam = np.pi**2 / 4
    errs = []
    for M in (256, 512, 1024):
        spec = _spec("v1", N=1, lam=lam, M=M)
        t = np.linspace(0, 1, M + 1)
        v = Profile(np.cos(np.pi * t / 2)[None, :])
        errs.append(residual(v, spec))
    assert errs[-1] <= 1e-5
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


def test_apply_propagates_range_errors():
    spec = _spec("v1 - 10", N=1, lam=1.0, M=64)
    with pytest.raises(ex.EvaluationRangeError):
        apply(_parabola(M=64), spec)
