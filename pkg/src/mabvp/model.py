"""Discrete meshes, vector profiles, cone diagnostics, and the radial
Hessian determinant."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expressions as ex


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh t_k = k/M on [0, 1]; M divisible by 4 so that the
    quarter points are exact nodes."""

    intervals: int

    def __post_init__(self):
        if self.intervals < 16:
            raise ValueError("mesh needs at least 16 intervals")
        if self.intervals % 4 != 0:
            raise ValueError("interval count must be divisible by 4")

    @property
    def h(self) -> float:
        return 1.0 / self.intervals

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.intervals + 1)

    @property
    def quarter_index(self) -> int:
        return self.intervals // 4

    @property
    def three_quarter_index(self) -> int:
        return 3 * self.intervals // 4


@dataclass(frozen=True)
class ProblemSpec:
    """A radial system instance: dimension N, n equations, parameter lam,
    nonlinearities f (one syntax tree per equation), mesh intervals M."""

    N: int
    n: int
    lam: float
    f: tuple
    M: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if len(self.f) != self.n:
            raise ValueError(f"expected {self.n} expressions, got {len(self.f)}")
        Mesh(self.M)  # validates M >= 16 and divisibility by 4
        for i, ast in enumerate(self.f):
            hi = ex.max_var_index(ast)
            if hi > self.n:
                raise ValueError(f"f{i + 1} references v{hi} but n = {self.n}")

    def mesh(self) -> Mesh:
        return Mesh(self.M)


class Profile:
    """Grid function (v_1, ..., v_n) on the uniform mesh; rows are components.

    Values are arbitrary reals (shooting trajectories overshoot below zero);
    cone membership is a property checked by cone_check, not a constructor
    constraint.  The wrapped array is read-only.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] < 2:
            raise ValueError("profile values must be an (n, M+1) array")
        arr.setflags(write=False)
        self.values = arr

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def intervals(self) -> int:
        return self.values.shape[1] - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.shape[1])

    def component(self, i: int) -> np.ndarray:
        return self.values[i]

    @classmethod
    def zeros(cls, n: int, M: int) -> "Profile":
        return cls(np.zeros((n, M + 1)))

    @classmethod
    def from_callables(cls, fns: Sequence, M: int) -> "Profile":
        t = np.linspace(0.0, 1.0, M + 1)
        return cls(np.array([np.asarray(fn(t), dtype=float) for fn in fns]))

    def __repr__(self) -> str:
        return f"Profile(n={self.n}, M={self.intervals}, norm={norm(self):.6g})"


def _as_values(v) -> np.ndarray:
    if isinstance(v, Profile):
        return v.values
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def norm(v) -> float:
    """Sum over components of the sup of absolute node values."""
    arr = _as_values(v)
    return float(np.abs(arr).max(axis=1).sum())


def default_tolerance(v) -> float:
    """Discrete concavity errors scale like O(h): 10*h*norm(v)."""
    arr = _as_values(v)
    return 10.0 * norm(arr) / (arr.shape[1] - 1)


@dataclass(frozen=True)
class ComponentBoundCheck:
    """Per-component lower-bound diagnostic v_i(t) >= min(t, 1-t)*sup v_i."""

    applicable: bool
    ok: bool
    margin: float


@dataclass(frozen=True)
class ConeReport:
    tol: float
    min_value: float
    nonnegative: bool
    quarter_min: float
    quarter_required: float
    quarter_ok: bool
    components: tuple

    @property
    def quarter_slack(self) -> float:
        return self.quarter_min - self.quarter_required

    @property
    def ok(self) -> bool:
        return self.nonnegative and self.quarter_ok


def cone_check(v, tol: Optional[float] = None) -> ConeReport:
    """Check cone membership: nonnegativity and the quarter inequality
    min over [1/4, 3/4] of the component sum >= norm/4, plus the
    per-component concavity lower bound where it applies."""
    arr = _as_values(v)
    M = arr.shape[1] - 1
    if M % 4 != 0:
        raise ValueError("cone check requires a mesh with M divisible by 4")
    if tol is None:
        tol = default_tolerance(arr)
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    t = np.linspace(0.0, 1.0, M + 1)
    total = arr.sum(axis=0)
    k1, k2 = M // 4, 3 * M // 4
    quarter_min = float(total[k1 : k2 + 1].min())
    required = 0.25 * norm(arr)
    min_value = float(arr.min())

    envelope = np.minimum(t, 1.0 - t)
    comps = []
    for i in range(arr.shape[0]):
        vi = arr[i]
        peak = float(vi.max())
        if peak <= 0:
            comps.append(ComponentBoundCheck(applicable=False, ok=True, margin=0.0))
            continue
        d2 = vi[:-2] - 2.0 * vi[1:-1] + vi[2:]
        concave = bool(d2.max() <= 1e-12 * max(1.0, peak))
        argmax = int(vi.argmax())
        if not concave or argmax == M:
            comps.append(ComponentBoundCheck(applicable=False, ok=True, margin=0.0))
            continue
        margin = float((vi - envelope * peak).min())
        comps.append(ComponentBoundCheck(applicable=True, ok=margin >= -tol, margin=margin))

    return ConeReport(
        tol=float(tol),
        min_value=min_value,
        nonnegative=min_value >= -tol,
        quarter_min=quarter_min,
        quarter_required=required,
        quarter_ok=quarter_min >= required - tol,
        components=tuple(comps),
    )


@dataclass
class SolutionPair:
    """A positive concave profile v together with its sign-flipped convex
    counterpart u = -v."""

    v: Profile
    u: np.ndarray
    lam: float
    residual: float
    trivial: bool
    convex_ok: bool
    convexity_margin: float  # min of the discrete second derivative of u
    initial_slope: float  # one-sided u'(0); should vanish for solutions
    slope_ok: bool

    @property
    def ok(self) -> bool:
        return self.convex_ok and self.slope_ok


def to_solution(v, spec: ProblemSpec, tol: Optional[float] = None,
                residual: float = float("nan")) -> SolutionPair:
    """Flip signs to the convex representative and check discrete convexity
    and the centre slope.  Violations are flagged, never silently accepted."""
    profile = v if isinstance(v, Profile) else Profile(v)
    arr = profile.values
    u = -arr
    u.setflags(write=False)
    nv = norm(arr)
    M = arr.shape[1] - 1
    h = 1.0 / M
    if tol is None:
        tol = 10.0 * h
    d2 = (u[:, :-2] - 2.0 * u[:, 1:-1] + u[:, 2:]) / (h * h)
    curvature_scale = max(1.0, float(np.abs(d2).max())) if d2.size else 1.0
    margin = float(d2.min()) if d2.size else 0.0
    convex_ok = margin >= -tol * curvature_scale
    slope = float(np.abs((u[:, 1] - u[:, 0]) / h).max())
    slope_ok = slope <= tol * max(1.0, nv)
    return SolutionPair(
        v=profile,
        u=u,
        lam=spec.lam,
        residual=residual,
        trivial=nv == 0.0,
        convex_ok=convex_ok,
        convexity_margin=margin,
        initial_slope=slope,
        slope_ok=slope_ok,
    )


def hessian_det_radial(u, N: int, mesh: Mesh):
    """Discrete radial Hessian determinant (u')^(N-1) u'' / t^(N-1) on the
    interior nodes, plus its limit (u''(0))^N at the origin where the raw
    formula is 0/0.

    Returns (det_interior, det_origin) with det_interior of length M-1.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.shape[0] != mesh.intervals + 1:
        raise ValueError("component array does not match the mesh")
    h = mesh.h
    t = mesh.nodes[1:-1]
    up = (u[2:] - u[:-2]) / (2.0 * h)
    upp = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    det = up ** (N - 1) * upp / t ** (N - 1)
    upp0 = (u[0] - 2.0 * u[1] + u[2]) / (h * h)
    return det, float(upp0**N)


def profile_to_csv(profile: Profile) -> str:
    """Serialize to CSV with header t,v1,...,vn at full double precision."""
    n = profile.n
    t = profile.nodes
    buf = io.StringIO()
    buf.write("t," + ",".join(f"v{i + 1}" for i in range(n)) + "\n")
    for k in range(t.shape[0]):
        row = [f"{t[k]:.17g}"] + [f"{profile.values[i, k]:.17g}" for i in range(n)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def profile_from_csv(text: str) -> Profile:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty CSV")
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t" or any(h != f"v{i + 1}" for i, h in enumerate(header[1:])):
        raise ValueError(f"unexpected CSV header {lines[0]!r}")
    n = len(header) - 1
    if n < 1:
        raise ValueError("CSV has no component columns")
    rows = [[float(c) for c in ln.split(",")] for ln in lines[1:]]
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != n + 1:
        raise ValueError("ragged CSV rows")
    t = data[:, 0]
    M = data.shape[0] - 1
    expected = np.linspace(0.0, 1.0, M + 1)
    if M < 1 or not np.allclose(t, expected, atol=1e-12):
        raise ValueError("CSV nodes are not a uniform mesh on [0, 1]")
    return Profile(data[:, 1:].T)
