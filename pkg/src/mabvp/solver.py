"""Fixed-point iteration, shooting, root finding and parameter sweeps."""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import integral_operator as iop
from . import kernels
from .expressions import EvaluationRangeError
from .model import (
    ConeReport,
    Mesh,
    Profile,
    ProblemSpec,
    SolutionPair,
    cone_check,
    hessian_det_radial,
    norm,
    to_solution,
)

DEDUP_RELATIVE = 1e-6
SCALAR_ROOT_TOL = 1e-10
SYSTEM_ROOT_TOL = 1e-9
JACOBIAN_STEP = 1e-6


@dataclass(frozen=True)
class SearchWindow:
    """Norm annulus searched for solutions."""

    r_lo: float = 1e-6
    r_hi: float = 1e3

    def __post_init__(self):
        if not 0 <= self.r_lo < self.r_hi:
            raise ValueError("window requires 0 <= r_lo < r_hi")


@dataclass
class ShotResult:
    alpha: np.ndarray
    profile: Profile  # raw trajectory; may dip below zero off a solution
    boundary: np.ndarray  # v_i(1; alpha), the shooting residuals

    @property
    def boundary_total(self) -> float:
        return float(self.boundary.sum())


def shoot(spec: ProblemSpec, alpha) -> ShotResult:
    """Integrate outward from v(0) = alpha with zero initial slope.

    The trajectory clamps v at zero only inside the nonlinearity; the
    returned values are the raw integrator output.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 0:
        alpha = alpha[None]
    if alpha.shape != (spec.n,):
        raise ValueError(f"alpha must have {spec.n} components")
    if np.any(alpha < 0):
        raise ValueError("alpha must be componentwise nonnegative")
    tapes = iop._tapes_for(spec)
    v, _, status = kernels.shoot(
        alpha, spec.lam, spec.N, spec.M, tapes.ops, tapes.args, tapes.lengths, tapes.stack_need
    )
    if status != 0:
        raise EvaluationRangeError(
            f"nonlinearity produced an invalid value at integration step {status - 1}"
        )
    return ShotResult(alpha=alpha.copy(), profile=Profile(v), boundary=v[:, -1].copy())


@dataclass
class PicardResult:
    profile: Profile
    converged: bool
    diverged: bool
    iterations: int
    residuals: list

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def picard(spec: ProblemSpec, v0: Profile, tol: float = 1e-10, max_iter: int = 500,
           damping: float = 1.0) -> PicardResult:
    """Damped fixed-point iteration v <- (1-damping) v + damping T v.

    Only attracting fixed points are reachable this way; the result reports
    the residual history instead of pretending otherwise.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    values = v0.values if isinstance(v0, Profile) else np.atleast_2d(np.asarray(v0, dtype=float))
    blowup = 1e6 * max(norm(values), 1.0)
    residuals: list = []
    for it in range(max_iter):
        image = iop.apply(values, spec).values
        r = norm(image - values)
        residuals.append(r)
        if r <= tol:
            return PicardResult(Profile(values), True, False, it, residuals)
        values = (1.0 - damping) * values + damping * image
        if norm(values) > blowup:
            return PicardResult(Profile(values), False, True, it + 1, residuals)
    return PicardResult(Profile(values), False, False, max_iter, residuals)


# ---------------------------------------------------------------------------
# Scalar problems: bracket and bisect the boundary value over the amplitude


def _scan_grid(window: SearchWindow, grid: int) -> np.ndarray:
    lo = max(window.r_lo, 1e-12)
    geo = np.geomspace(lo, window.r_hi, grid)
    lin = np.linspace(lo, window.r_hi, grid)
    return np.unique(np.concatenate([geo, lin]))


def find_solutions_scalar(spec: ProblemSpec, window: SearchWindow = SearchWindow(),
                          grid: int = 64) -> list[tuple[float, Profile]]:
    """Scan amplitudes over the window, bracket sign changes of the boundary
    value, and refine each bracket by bisection.  Returns (alpha, profile)
    pairs with alpha > 0; an empty list is a valid outcome."""
    if spec.n != 1:
        raise ValueError("scalar search requires n = 1")
    if grid < 8:
        raise ValueError("grid must have at least 8 points")

    def g(a: float) -> Optional[float]:
        try:
            return float(shoot(spec, [a]).boundary[0])
        except EvaluationRangeError:
            return None

    alphas = _scan_grid(window, grid)
    values = [g(a) for a in alphas]
    roots: list[float] = []
    for (a, ga), (b, gb) in zip(zip(alphas, values), zip(alphas[1:], values[1:])):
        if ga is None or gb is None:
            continue
        if ga == 0.0:
            roots.append(a)
            continue
        if ga * gb < 0.0:
            roots.append(_bisect_alpha(g, a, b, ga, gb))
    if values and values[-1] == 0.0:
        roots.append(float(alphas[-1]))

    out: list[tuple[float, Profile]] = []
    for a in sorted(roots):
        if a <= 0:
            continue
        if out and abs(a - out[-1][0]) <= DEDUP_RELATIVE * max(abs(a), abs(out[-1][0])):
            continue  # keep the lower-amplitude representative
        out.append((a, shoot(spec, [a]).profile))
    return out


def _bisect_alpha(g, a: float, b: float, ga: float, gb: float) -> float:
    for _ in range(200):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        gm = g(m)
        if gm is None:
            break
        if abs(gm) <= SCALAR_ROOT_TOL * max(1.0, m):
            return m
        if ga * gm < 0.0:
            b, gb = m, gm
        else:
            a, ga = m, gm
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Systems: damped Newton on the boundary values


@dataclass
class NewtonResult:
    ok: bool
    alpha: Optional[np.ndarray]
    profile: Optional[Profile]
    iterations: int
    message: str


def _boundary(spec: ProblemSpec, alpha: np.ndarray) -> Optional[np.ndarray]:
    try:
        return shoot(spec, alpha).boundary
    except EvaluationRangeError:
        return None


def find_solutions_system(spec: ProblemSpec, alpha0, max_newton: int = 50) -> NewtonResult:
    """Damped Newton on the boundary-value map with a forward-difference
    Jacobian.  Trial points are projected onto the nonnegative orthant;
    converged iterates that are trivial are rejected."""
    if spec.n < 2:
        raise ValueError("system search requires n >= 2")
    alpha = np.maximum(np.asarray(alpha0, dtype=float), 0.0)
    if alpha.shape != (spec.n,):
        raise ValueError(f"alpha0 must have {spec.n} components")
    R = _boundary(spec, alpha)
    if R is None:
        return NewtonResult(False, None, None, 0, "nonlinearity invalid at the seed")

    def success(it: int) -> NewtonResult:
        if alpha.sum() <= 0:
            return NewtonResult(False, None, None, it, "converged to the trivial branch")
        return NewtonResult(True, alpha, shoot(spec, alpha).profile, it, "converged")

    polish = 0
    for it in range(max_newton + 3):
        rnorm = float(np.abs(R).sum())
        converged = rnorm <= SYSTEM_ROOT_TOL * max(1.0, float(alpha.sum()))
        if converged:
            # a few extra best-effort full steps pin alpha well below the
            # dedup tolerance before reporting success
            if polish >= 3 or rnorm == 0.0:
                return success(it)
            polish += 1
        elif it >= max_newton:
            break

        J = np.empty((spec.n, spec.n))
        jacobian_ok = True
        for j in range(spec.n):
            step = JACOBIAN_STEP * max(1.0, abs(alpha[j]))
            probe = alpha.copy()
            probe[j] += step
            Rj = _boundary(spec, probe)
            if Rj is None:
                jacobian_ok = False
                break
            J[:, j] = (Rj - R) / step
        if not jacobian_ok:
            if converged:
                return success(it)
            return NewtonResult(False, None, None, it, "nonlinearity invalid in the Jacobian")

        delta = None
        scale = float(np.abs(J).max()) or 1.0
        for mu in (0.0, 1e-12, 1e-8, 1e-4):
            try:
                delta = np.linalg.solve(J + mu * scale * np.eye(spec.n), -R)
                break
            except np.linalg.LinAlgError:
                continue
        if delta is None or not np.all(np.isfinite(delta)):
            if converged:
                return success(it)
            return NewtonResult(False, None, None, it, "singular Jacobian")

        gamma = 1.0
        accepted = False
        while gamma >= 2.0**-12:
            trial = np.maximum(alpha + gamma * delta, 0.0)
            Rt = _boundary(spec, trial)
            if Rt is not None and float(np.abs(Rt).sum()) <= (1.0 - 1e-4 * gamma) * rnorm:
                alpha, R = trial, Rt
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            if converged:
                return success(it)
            return NewtonResult(False, None, None, it, "damping stalled")

    return NewtonResult(False, None, None, max_newton, "maximum iterations reached")


def _multi_start_system(spec: ProblemSpec, window: SearchWindow, seeds: int = 24,
                        warm: Sequence[np.ndarray] = (), max_newton: int = 50
                        ) -> list[tuple[np.ndarray, Profile]]:
    """Newton from a deterministic grid of ray amplitudes c*(1,...,1) plus
    warm starts, deduplicated by solution norm."""
    lo = max(window.r_lo, 1e-12) / spec.n
    hi = window.r_hi / spec.n
    ray = np.geomspace(lo, hi, seeds)
    found: list[tuple[np.ndarray, Profile]] = []
    for seed in [c * np.ones(spec.n) for c in ray] + [np.asarray(a, float) for a in warm]:
        result = find_solutions_system(spec, seed, max_newton=max_newton)
        if not result.ok:
            continue
        r = norm(result.profile)
        if not window.r_lo <= r <= window.r_hi:
            continue
        duplicate = False
        for idx, (alpha_known, prof_known) in enumerate(found):
            if abs(r - norm(prof_known)) <= DEDUP_RELATIVE * max(r, norm(prof_known)):
                if result.alpha.sum() < alpha_known.sum():
                    found[idx] = (result.alpha, result.profile)
                duplicate = True
                break
        if not duplicate:
            found.append((result.alpha, result.profile))
    found.sort(key=lambda item: norm(item[1]))
    return found


# ---------------------------------------------------------------------------
# Parameter sweep


@dataclass(frozen=True)
class SweepRow:
    lam: float
    count: int
    norms: tuple
    alphas: tuple

    def __post_init__(self):
        if self.count != len(self.norms) or self.count != len(self.alphas):
            raise ValueError("count must match the recorded solutions")


@dataclass(frozen=True)
class SweepTable:
    rows: tuple

    def __post_init__(self):
        lams = [row.lam for row in self.rows]
        if lams != sorted(lams):
            raise ValueError("rows must be sorted by lambda")

    def counts(self) -> list[int]:
        return [row.count for row in self.rows]

    def to_csv(self) -> str:
        width = max((row.count for row in self.rows), default=0)
        buf = io.StringIO()
        header = ["lambda", "count"] + [f"norm_{j + 1}" for j in range(width)]
        buf.write(",".join(header) + "\n")
        for row in self.rows:
            cells = [f"{row.lam:.17g}", str(row.count)]
            cells += [f"{x:.17g}" for x in row.norms]
            cells += [""] * (width - row.count)
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def sweep(spec: ProblemSpec, lambdas, window: SearchWindow = SearchWindow(),
          seeds: int = 24) -> SweepTable:
    """Solve at each parameter value, reusing each step's solutions as warm
    starts for the next, and record counts and norms."""
    lams = [float(x) for x in lambdas]
    if not lams:
        raise ValueError("lambda grid must be nonempty")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    rows = []
    warm: list[np.ndarray] = []
    for lam in lams:
        current = replace(spec, lam=lam)
        if spec.n == 1:
            sols = [
                (np.array([a]), p)
                for a, p in find_solutions_scalar(current, window)
                if window.r_lo <= norm(p) <= window.r_hi
            ]
        else:
            sols = _multi_start_system(current, window, seeds=seeds, warm=warm)
        sols.sort(key=lambda item: norm(item[1]))
        rows.append(
            SweepRow(
                lam=lam,
                count=len(sols),
                norms=tuple(norm(p) for _, p in sols),
                alphas=tuple(tuple(a.tolist()) for a, _ in sols),
            )
        )
        warm = [a for a, _ in sols]
    return SweepTable(tuple(rows))


def count_transitions(table: SweepTable) -> list[tuple[float, float, int, int]]:
    """Intervals (lam_a, lam_b, count_a, count_b) where the solution count
    changes; a fold shows up as a single decreasing transition."""
    out = []
    for a, b in zip(table.rows, table.rows[1:]):
        if a.count != b.count:
            out.append((a.lam, b.lam, a.count, b.count))
    return out


def bisect_lambda(spec: ProblemSpec, lam_lo: float, lam_hi: float, alpha,
                  max_iter: int = 200) -> tuple[float, Profile]:
    """Bisect on the parameter for a sign change of the summed boundary value
    at a fixed amplitude; locates parameters where a solution branch crosses."""
    if not 0 < lam_lo < lam_hi:
        raise ValueError("need 0 < lam_lo < lam_hi")

    def s(lam: float) -> float:
        return shoot(replace(spec, lam=lam), alpha).boundary_total

    lo, hi = lam_lo, lam_hi
    slo, shi = s(lo), s(hi)
    if slo == 0.0:
        return lo, shoot(replace(spec, lam=lo), alpha).profile
    if shi == 0.0:
        return hi, shoot(replace(spec, lam=hi), alpha).profile
    if slo * shi > 0:
        raise ValueError("boundary value does not change sign over the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        sm = s(mid)
        if sm == 0.0:
            lo = hi = mid
            break
        if slo * sm < 0:
            hi, shi = mid, sm
        else:
            lo, slo = mid, sm
    root = 0.5 * (lo + hi)
    return root, shoot(replace(spec, lam=root), alpha).profile


# ---------------------------------------------------------------------------
# Solution verification


@dataclass
class VerificationReport:
    cone: ConeReport
    pair: SolutionPair
    fixed_point_residual: float
    det_errors: tuple  # per-component max |det - lam*f(-u)| / scale
    findings: tuple

    @property
    def ok(self) -> bool:
        return not self.findings


def determinant_check(spec: ProblemSpec, profile: Profile) -> tuple:
    """Per-component scaled residual of the radial determinant equation
    det = lam*f(-u) on interior nodes; the scale is the sup of the right
    side so the bound is meaningful where f vanishes."""
    mesh = Mesh(profile.intervals)
    tapes = iop._tapes_for(spec)
    clamped = np.maximum(profile.values, 0.0)
    errors = []
    for i in range(spec.n):
        det, _ = hessian_det_radial(-profile.values[i], spec.N, mesh)
        f = kernels.eval_grid(tapes.ops[i], tapes.args[i], int(tapes.lengths[i]), clamped)
        rhs = spec.lam * f[1:-1]
        scale = max(float(rhs.max()), 1e-300)
        errors.append(float(np.abs(det - rhs).max()) / scale)
    return tuple(errors)


def verify_solution(spec: ProblemSpec, profile: Profile,
                    residual_factor: float = 200.0) -> VerificationReport:
    """Re-check a claimed solution: cone membership, convexity of -v, the
    determinant residual at O(h), and the fixed-point defect at O(h^2)."""
    if profile.n != spec.n:
        raise ValueError("profile component count does not match the spec")
    mesh = Mesh(profile.intervals)
    h = mesh.h
    findings = []
    cone = cone_check(profile)
    if not cone.ok:
        findings.append("profile is not in the cone")
    pair = to_solution(profile, spec)
    if pair.trivial:
        findings.append("profile is identically zero")
    if not pair.convex_ok:
        findings.append("sign-flipped profile is not discretely convex")
    if not pair.slope_ok:
        findings.append("centre slope does not vanish")
    det_errors = determinant_check(spec, profile)
    for i, err in enumerate(det_errors):
        if err > 10.0 * h:
            findings.append(f"determinant residual of component {i + 1} is {err:.3e} > {10 * h:.3e}")
    fp = iop.residual(profile.values, spec)
    fp_tol = residual_factor * h * h * max(1.0, spec.lam) ** (1.0 / spec.N) * max(1.0, norm(profile))
    if fp > fp_tol:
        findings.append(f"fixed-point residual {fp:.3e} exceeds {fp_tol:.3e}")
    pair.residual = fp
    return VerificationReport(
        cone=cone,
        pair=pair,
        fixed_point_residual=fp,
        det_errors=det_errors,
        findings=tuple(findings),
    )
