"""The cone integral operator, its power transform, and fixed-point residuals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .expressions import EvaluationRangeError, Tapes, pack_tapes
from .model import Profile, ProblemSpec, norm


@dataclass(frozen=True)
class PowerMap:
    """The degree-N power map and its inverse on the nonnegative half-line."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")

    def forward(self, x):
        return np.asarray(x, dtype=float) ** self.N

    def inverse(self, x):
        return np.asarray(x, dtype=float) ** (1.0 / self.N)


@lru_cache(maxsize=256)
def _tapes_for(spec: ProblemSpec) -> Tapes:
    return pack_tapes(spec.f, spec.n)


def inner_accumulate(v, i: int, spec: ProblemSpec) -> np.ndarray:
    """Cumulative trapezoid of lam*N*t^(N-1)*f_i(v(t)) from 0 to each node.

    ``i`` is the 0-based component index.  The result starts at 0 and is
    nondecreasing for admissible (nonnegative) inputs.
    """
    values = v.values if isinstance(v, Profile) else np.atleast_2d(np.asarray(v, dtype=float))
    if not 0 <= i < spec.n:
        raise IndexError(f"component {i} out of range for n={spec.n}")
    tapes = _tapes_for(spec)
    M = values.shape[1] - 1
    t = np.linspace(0.0, 1.0, M + 1)
    f = kernels.eval_grid(tapes.ops[i], tapes.args[i], int(tapes.lengths[i]), values)
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise EvaluationRangeError(f"f{i + 1} produced an invalid value on the grid")
    integrand = (spec.lam * spec.N) * t ** (spec.N - 1) * f
    h = 1.0 / M
    seg = (integrand[:-1] + integrand[1:]) * (0.5 * h)
    return np.concatenate(([0.0], np.cumsum(seg)))


def apply(v, spec: ProblemSpec) -> Profile:
    """Apply the operator: component i is the right-anchored cumulative
    trapezoid of the 1/N-th root of the accumulated inner integral, so the
    output vanishes at t = 1 exactly and each component is nonincreasing."""
    values = v.values if isinstance(v, Profile) else np.atleast_2d(np.asarray(v, dtype=float))
    if values.shape[0] != spec.n:
        raise ValueError(f"profile has {values.shape[0]} components, spec has {spec.n}")
    tapes = _tapes_for(spec)
    out, status = kernels.operator_apply(
        values, spec.lam, spec.N, tapes.ops, tapes.args, tapes.lengths, tapes.stack_need
    )
    if status != 0:
        raise EvaluationRangeError(
            f"f{status} produced an invalid value while applying the operator"
        )
    return Profile(out)


def residual(v, spec: ProblemSpec) -> float:
    """Fixed-point defect norm(T v - v) in the component-sup sum norm.

    The operator lives on the cone, so v is projected onto the nonnegative
    orthant first; integrator output may undershoot zero by rounding-level
    amounts at the boundary.
    """
    values = v.values if isinstance(v, Profile) else np.atleast_2d(np.asarray(v, dtype=float))
    clamped = np.maximum(values, 0.0)
    image = apply(clamped, spec)
    return norm(image.values - clamped)
