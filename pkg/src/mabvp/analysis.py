"""Constants, asymptotic classification of nonlinearities, envelope bounds,
and the parameter thresholds they certify.

Everything here is sampled evidence, not proof: suprema and infima over
unbounded regions are estimated on deterministic grids with safety margins
and the reports say so.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import expressions as ex
from .kernels import numpy_backend as _nb
from .model import ProblemSpec

ZERO_THRESHOLD = 1e-6
INF_THRESHOLD = 1e6
TREND_WINDOW = 4
SUP_MARGIN = 1.05  # sampled suprema are inflated, infima deflated, by 5%


def gamma_constant(N: int, panels: int = 20000) -> float:
    """The positive constant (1/4) * integral over [1/4, 3/4] of
    (s^N - (1/4)^N)^(1/N) ds.

    The integrand has a branch point at s = 1/4 for N >= 2, so integrate in
    the substituted variable u = (s^N - (1/4)^N)^(1/N), which makes the
    integrand u^N (u^N + (1/4)^N)^((1-N)/N), smooth on the whole interval;
    composite Simpson then converges at full order.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if panels < 10_000:
        raise ValueError("use at least 10^4 panels")
    if panels % 2:
        panels += 1
    a = 0.25**N
    u_max = (0.75**N - a) ** (1.0 / N)
    u = np.linspace(0.0, u_max, panels + 1)
    g = u**N * (u**N + a) ** ((1.0 - N) / N)
    h = u_max / panels
    integral = (h / 3.0) * (g[0] + g[-1] + 4.0 * g[1:-1:2].sum() + 2.0 * g[2:-1:2].sum())
    return 0.25 * float(integral)


# ---------------------------------------------------------------------------
# Direction sampling on the positive simplex (sum norm = 1)


def simplex_directions(n: int, extra: int = 45, seed: int = 20260314) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    rows = [np.eye(n)[i] for i in range(n)]
    rows.append(np.full(n, 1.0 / n))
    for i in range(n):
        for j in range(i + 1, n):
            d = np.zeros(n)
            d[i] = d[j] = 0.5
            rows.append(d)
    rng = np.random.default_rng(seed)
    if extra > 0:
        raw = -np.log(rng.random((extra, n)))  # Dirichlet(1,...,1)
        rows.extend(raw / raw.sum(axis=1, keepdims=True))
    return np.array(rows)


def _tape(ast: ex.Node):
    ops, args, depth = ex.compile_tape(ast)
    return np.asarray(ops, dtype=np.int64), np.asarray(args, dtype=np.float64), len(ops)


def _values_at(ast: ex.Node, points: np.ndarray) -> np.ndarray:
    """Raw expression values at points of shape (n, P); may contain inf/NaN."""
    ops, args, length = _tape(ast)
    return _nb.eval_grid(ops, args, length, points)


def _ratio_matrix(ast: ex.Node, n: int, radii: np.ndarray, dirs: np.ndarray,
                  N: int) -> np.ndarray:
    """f(r*d) / r^N for every radius (rows) and direction (columns)."""
    out = np.empty((radii.shape[0], dirs.shape[0]))
    with np.errstate(all="ignore"):
        for k, r in enumerate(radii):
            pts = (dirs * r).T
            out[k] = _values_at(ast, pts) / r**N
    return out


# ---------------------------------------------------------------------------
# Limit classification


@dataclass(frozen=True)
class LimitEstimate:
    kind: str  # 'zero' | 'finite' | 'infinite' | 'ambiguous'
    value: Optional[float]  # extrapolated ratio for the finite case
    direction_dependent: bool
    per_direction: tuple  # kind per sampled direction

    def __str__(self) -> str:
        if self.kind == "finite":
            return f"finite:{self.value:.6g}"
        return self.kind


def _classify_curve(ratios: np.ndarray) -> tuple[str, Optional[float]]:
    """Classify a ratio sequence ordered toward the limit: the value at the
    most extreme radius decides, confirmed by the trend over the last few."""
    tail = ratios[-TREND_WINDOW:]
    if np.any(np.isnan(tail)):
        return "ambiguous", None
    slack = 1.0 + 1e-9
    decreasing = bool(np.all(tail[1:] <= tail[:-1] * slack))
    increasing = bool(np.all(tail[1:] * slack >= tail[:-1]))
    final = tail[-1]
    if final < ZERO_THRESHOLD:
        return ("zero", None) if decreasing else ("ambiguous", None)
    if final > INF_THRESHOLD:
        return ("infinite", None) if increasing else ("ambiguous", None)
    if np.all(np.isfinite(tail)):
        return "finite", float(final)
    return "ambiguous", None


def limit_estimate(f_i: ex.Node, which: str, N: int, n: int) -> LimitEstimate:
    """Classify the ratio f(v)/||v||^N as ||v|| tends to 0 or infinity.

    Ratios are sampled along coordinate rays, the uniform ray and seeded
    simplex rays.  The headline class follows the per-radius supremum over
    the direction set; rays that disagree set the direction_dependent flag
    rather than being averaged away.
    """
    if which not in {"zero", "infinity"}:
        raise ValueError("which must be 'zero' or 'infinity'")
    exponents = np.arange(1, 9, dtype=float)
    radii = 10.0 ** (-exponents) if which == "zero" else 10.0**exponents
    dirs = simplex_directions(n)
    ratios = _ratio_matrix(f_i, n, radii, dirs, N)

    per_direction = []
    for j in range(dirs.shape[0]):
        kind, _ = _classify_curve(ratios[:, j])
        per_direction.append(kind)

    all_nan = np.all(np.isnan(ratios), axis=1)
    sup_curve = np.where(np.isnan(ratios), -np.inf, ratios).max(axis=1)
    sup_curve[all_nan] = np.nan
    kind, value = _classify_curve(sup_curve)

    finite_cols = [
        float(ratios[-1, j]) for j in range(dirs.shape[0]) if per_direction[j] == "finite"
    ]
    direction_dependent = len(set(per_direction)) > 1
    if not direction_dependent and finite_cols:
        lo, hi = min(finite_cols), max(finite_cols)
        if hi > 0 and (hi - lo) > 0.1 * hi:
            direction_dependent = True

    return LimitEstimate(
        kind=kind,
        value=value,
        direction_dependent=direction_dependent,
        per_direction=tuple(per_direction),
    )


@dataclass(frozen=True)
class TotalClass:
    kind: str
    value: Optional[float]

    def __str__(self) -> str:
        if self.kind == "finite":
            return f"finite:{self.value:.6g}"
        return self.kind


def combine_limits(components: tuple) -> TotalClass:
    kinds = [c.kind for c in components]
    if "ambiguous" in kinds:
        return TotalClass("ambiguous", None)
    if "infinite" in kinds:
        return TotalClass("infinite", None)
    if all(k == "zero" for k in kinds):
        return TotalClass("zero", None)
    total = sum(c.value for c in components if c.kind == "finite")
    return TotalClass("finite", float(total))


# ---------------------------------------------------------------------------
# Envelope and extremum sampling


def _pattern_search(objective: Callable[[np.ndarray], float], x0: np.ndarray,
                    feasible: Callable[[np.ndarray], bool], step: float,
                    maximize: bool, sweeps: int = 60) -> tuple[np.ndarray, float]:
    x = x0.copy()
    best = objective(x)
    sign = 1.0 if maximize else -1.0
    floor = max(step * 1e-8, 1e-300)
    for _ in range(sweeps):
        improved = False
        for j in range(x.shape[0]):
            for delta in (step, -step):
                y = x.copy()
                y[j] += delta
                if y[j] < 0 or not feasible(y):
                    continue
                val = objective(y)
                if np.isfinite(val) and sign * val > sign * best:
                    x, best = y, val
                    improved = True
        if not improved:
            step *= 0.5
            if step < floor:
                break
    return x, best


def hat_envelope(f_i: ex.Node, t: float, n: int, radius_samples: int = 33) -> float:
    """Sampled maximum of f over the sum-norm ball of radius t, sharpened by
    a coordinate pattern search.  Always at least the sampled maximum."""
    if t < 0:
        raise ValueError("radius must be nonnegative")
    origin = ex.evaluate_raw(f_i, np.zeros(n))
    if t == 0:
        return float(origin)
    dirs = simplex_directions(n)
    radii = np.linspace(0.0, t, radius_samples)[1:]
    best_val = float(origin) if np.isfinite(origin) else -np.inf
    best_pt = np.zeros(n)
    for r in radii:
        pts = (dirs * r).T
        vals = _values_at(f_i, pts)
        if np.any(np.isposinf(vals)):
            return float("inf")
        finite = np.where(np.isfinite(vals))[0]
        if finite.size == 0:
            continue
        j = finite[np.argmax(vals[finite])]
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_pt = dirs[j] * r

    def objective(x: np.ndarray) -> float:
        return ex.evaluate_raw(f_i, x)

    _, refined = _pattern_search(
        objective, best_pt, lambda x: x.sum() <= t * (1.0 + 1e-12), step=t / radius_samples,
        maximize=True,
    )
    return float(max(best_val, refined))


def envelope_limit_estimate(f_i: ex.Node, which: str, N: int, n: int,
                            radius_samples: int = 21) -> LimitEstimate:
    """Classify the scalar envelope ratio max(f on ball r) / r^N toward a
    limit; agreement with limit_estimate of f itself is an invariant."""
    exponents = np.arange(1, 9, dtype=float)
    radii = 10.0 ** (-exponents) if which == "zero" else 10.0**exponents
    curve = np.empty(radii.shape[0])
    with np.errstate(all="ignore"):
        for k, r in enumerate(radii):
            curve[k] = hat_envelope(f_i, float(r), n, radius_samples) / r**N
    kind, value = _classify_curve(curve)
    return LimitEstimate(kind=kind, value=value, direction_dependent=False,
                         per_direction=(kind,))


@dataclass(frozen=True)
class WeakBounds:
    annulus_min: float  # min of all f_i over r/4 <= ||v|| <= r
    ball_max: float  # max of all f_i over ||v|| <= r
    h2_ok: bool  # annulus minimum strictly positive


def weak_bounds(spec: ProblemSpec, r: float, radius_samples: int = 17) -> WeakBounds:
    if r <= 0:
        raise ValueError("r must be positive")
    dirs = simplex_directions(spec.n)
    ann_radii = np.linspace(r / 4.0, r, radius_samples)
    ball_radii = np.linspace(0.0, r, radius_samples)
    m_hat = np.inf
    M_hat = -np.inf
    for ast in spec.f:
        for radii, minimizing in ((ann_radii, True), (ball_radii, False)):
            best_val = np.inf if minimizing else -np.inf
            best_pt = None
            for rr in radii:
                if rr == 0.0:
                    vals = np.array([ex.evaluate_raw(ast, np.zeros(spec.n))])
                    pts_dirs = np.zeros((1, spec.n))
                else:
                    pts_dirs = dirs
                    vals = _values_at(ast, (dirs * rr).T)
                finite = np.where(np.isfinite(vals))[0]
                if finite.size == 0:
                    continue
                j = finite[np.argmin(vals[finite])] if minimizing else finite[np.argmax(vals[finite])]
                if (minimizing and vals[j] < best_val) or (not minimizing and vals[j] > best_val):
                    best_val = float(vals[j])
                    best_pt = pts_dirs[j] * rr
            if best_pt is not None:
                if minimizing:
                    feasible = lambda x: r / 4.0 * (1 - 1e-12) <= x.sum() <= r * (1 + 1e-12)
                else:
                    feasible = lambda x: x.sum() <= r * (1 + 1e-12)
                _, refined = _pattern_search(
                    lambda x: ex.evaluate_raw(ast, x), best_pt, feasible,
                    step=r / radius_samples, maximize=not minimizing,
                )
                best_val = min(best_val, refined) if minimizing else max(best_val, refined)
            if minimizing:
                m_hat = min(m_hat, best_val)
            else:
                M_hat = max(M_hat, best_val)
    return WeakBounds(annulus_min=float(m_hat), ball_max=float(M_hat), h2_ok=bool(m_hat > 0))


# ---------------------------------------------------------------------------
# Certificates and thresholds


def _certificate_grid(n: int):
    radii = np.geomspace(1e-6, 1e6, 200)
    dirs = simplex_directions(n, extra=max(45, 100 - n - 1 - n * (n - 1) // 2))
    return radii, dirs


def epsilon_certificate(spec: ProblemSpec) -> tuple[Optional[float], str]:
    """Sampled supremum of f_i(v)/||v||^N over all i and v, inflated 5%."""
    radii, dirs = _certificate_grid(spec.n)
    sup = 0.0
    for ast in spec.f:
        ratios = _ratio_matrix(ast, spec.n, radii, dirs, spec.N)
        if np.any(np.isnan(ratios)):
            return None, "ratio sampling produced NaN"
        peak = float(ratios.max())
        if not np.isfinite(peak):
            return None, "sampled ratio is unbounded"
        sup = max(sup, peak)
    if sup <= 0:
        return None, "sampled ratio is not positive"
    return SUP_MARGIN * sup, f"sampled sup {sup:.6g} inflated 5%"


def eta3_certificate(spec: ProblemSpec) -> tuple[Optional[float], str]:
    """Lower ratio certificate following the small/large-radius splitting:
    best over reference radii (r1, r2) of min(inf ratio of the best
    component near zero up to r1, inf ratio of the best component beyond
    r2, min ratio of the latter on [r1/4, r2]), deflated 5%."""
    radii, dirs = _certificate_grid(spec.n)
    rmin = np.empty((spec.n, radii.shape[0]))
    for i, ast in enumerate(spec.f):
        ratios = _ratio_matrix(ast, spec.n, radii, dirs, spec.N)
        if np.any(np.isnan(ratios)):
            return None, "ratio sampling produced NaN"
        rmin[i] = np.where(np.all(np.isinf(ratios), axis=1), np.inf, np.nanmin(
            np.where(np.isfinite(ratios), ratios, np.inf), axis=1))

    r1_candidates = np.geomspace(1e-3, 1e2, 11)
    best = 0.0
    detail = "no admissible reference radii"
    for r1 in r1_candidates:
        small = radii <= r1
        eta1_by_comp = rmin[:, small].min(axis=1)
        i_star = int(np.argmax(eta1_by_comp))
        eta1 = float(eta1_by_comp[i_star])
        if eta1 <= 0:
            continue
        for r2 in np.geomspace(2 * r1, 1e4, 7):
            large = radii >= r2
            if not large.any():
                continue
            eta2_by_comp = rmin[:, large].min(axis=1)
            j_star = int(np.argmax(eta2_by_comp))
            eta2 = float(eta2_by_comp[j_star])
            if eta2 <= 0:
                continue
            annulus = (radii >= r1 / 4.0) & (radii <= r2)
            mid = float(rmin[j_star, annulus].min()) if annulus.any() else np.inf
            eta = min(eta1, eta2, mid)
            if eta > best:
                best = eta
                detail = f"sampled min {eta:.6g} at r1={r1:.3g}, r2={r2:.3g}, deflated 5%"
    if best <= 0 or not np.isfinite(best):
        return None, "no positive lower ratio found (H2 may fail along a ray)"
    return best / SUP_MARGIN, detail


@dataclass(frozen=True)
class Threshold:
    label: str
    value: Optional[float]
    detail: str


def lambda0_thresholds(spec: ProblemSpec, report: "BoundsReport",
                       r_ref: float = 1.0) -> tuple:
    """Emit every threshold whose regime hypotheses the classifications
    support; thresholds with unmet hypotheses carry a reason instead."""
    N = spec.N
    gamma = report.gamma
    f0, finf = report.f0_total, report.finf_total
    out = []

    if f0.kind == "zero" or finf.kind == "zero":
        wb = report.weak(r_ref)
        if wb.h2_ok:
            value = (r_ref / (4.0 * gamma * wb.annulus_min ** (1.0 / N))) ** N
            out.append(Threshold("existence_large_lambda", value,
                                 f"annulus min {wb.annulus_min:.6g} at r={r_ref:.6g}"))
        else:
            out.append(Threshold("existence_large_lambda", None,
                                 "sampled annulus minimum is not positive"))
    else:
        out.append(Threshold("existence_large_lambda", None,
                             "needs a zero limit at one end"))

    if f0.kind == "infinite" or finf.kind == "infinite":
        wb = report.weak(r_ref)
        value = (r_ref / (spec.n * wb.ball_max ** (1.0 / N))) ** N
        out.append(Threshold("existence_small_lambda", value,
                             f"ball max {wb.ball_max:.6g} at r={r_ref:.6g}"))
    else:
        out.append(Threshold("existence_small_lambda", None,
                             "needs an infinite limit at one end"))

    if f0.kind in ("zero", "finite") and finf.kind in ("zero", "finite"):
        if report.epsilon is not None:
            value = 1.0 / (spec.n**N * report.epsilon)
            out.append(Threshold("nonexistence_small_lambda", value, report.epsilon_detail))
        else:
            out.append(Threshold("nonexistence_small_lambda", None, report.epsilon_detail))
    else:
        out.append(Threshold("nonexistence_small_lambda", None,
                             "needs finite limits at both ends"))

    if f0.kind in ("finite", "infinite") and finf.kind in ("finite", "infinite"):
        if report.eta3 is not None:
            value = 1.0 / (gamma**N * report.eta3)
            out.append(Threshold("nonexistence_large_lambda", value, report.eta3_detail))
        else:
            out.append(Threshold("nonexistence_large_lambda", None, report.eta3_detail))
    else:
        out.append(Threshold("nonexistence_large_lambda", None,
                             "needs positive limits at both ends"))
    return tuple(out)


# ---------------------------------------------------------------------------
# Aggregate report and regime classification


@dataclass
class BoundsReport:
    spec: ProblemSpec
    r_ref: float
    gamma: float
    f0_components: tuple
    finf_components: tuple
    f0_total: TotalClass
    finf_total: TotalClass
    epsilon: Optional[float]
    epsilon_detail: str
    eta3: Optional[float]
    eta3_detail: str
    thresholds: tuple = ()

    def weak(self, r: float) -> WeakBounds:
        return weak_bounds(self.spec, r)

    def m_hat(self, r: float) -> float:
        return self.weak(r).annulus_min

    def M_hat(self, r: float) -> float:
        return self.weak(r).ball_max

    def threshold(self, label: str) -> Threshold:
        for th in self.thresholds:
            if th.label == label:
                return th
        raise KeyError(label)

    def to_text(self) -> str:
        lines = [
            f"N={self.spec.N}",
            f"n={self.spec.n}",
            f"r_ref={self.r_ref:.17g}",
            f"gamma={self.gamma:.17g}",
        ]
        for name, comps, total in (
            ("f0", self.f0_components, self.f0_total),
            ("finf", self.finf_components, self.finf_total),
        ):
            for i, c in enumerate(comps):
                flag = " direction_dependent" if c.direction_dependent else ""
                lines.append(f"{name}_{i + 1}={c}{flag}")
            lines.append(f"{name}_total={total}")
        lines.append(
            f"epsilon={self.epsilon:.17g}" if self.epsilon is not None
            else f"epsilon_omitted={self.epsilon_detail}"
        )
        lines.append(
            f"eta3={self.eta3:.17g}" if self.eta3 is not None
            else f"eta3_omitted={self.eta3_detail}"
        )
        for th in self.thresholds:
            if th.value is not None:
                lines.append(f"lambda0_{th.label}={th.value:.17g}")
            else:
                lines.append(f"lambda0_{th.label}_omitted={th.detail}")
        lines.append("certificates=sampled, non-rigorous")
        return "\n".join(lines) + "\n"


def analyze(spec: ProblemSpec, r_ref: float = 1.0) -> BoundsReport:
    f0 = tuple(limit_estimate(f, "zero", spec.N, spec.n) for f in spec.f)
    finf = tuple(limit_estimate(f, "infinity", spec.N, spec.n) for f in spec.f)
    f0_total = combine_limits(f0)
    finf_total = combine_limits(finf)
    report = BoundsReport(
        spec=spec,
        r_ref=r_ref,
        gamma=gamma_constant(spec.N),
        f0_components=f0,
        finf_components=finf,
        f0_total=f0_total,
        finf_total=finf_total,
        epsilon=None,
        epsilon_detail="",
        eta3=None,
        eta3_detail="",
    )
    if f0_total.kind in ("zero", "finite") and finf_total.kind in ("zero", "finite"):
        report.epsilon, report.epsilon_detail = epsilon_certificate(spec)
    else:
        report.epsilon, report.epsilon_detail = None, "a limit is infinite"
    if f0_total.kind in ("finite", "infinite") and finf_total.kind in ("finite", "infinite"):
        report.eta3, report.eta3_detail = eta3_certificate(spec)
    else:
        report.eta3, report.eta3_detail = None, "a limit is zero"
    report.thresholds = lambda0_thresholds(spec, report, r_ref)
    return report


REGIME_DESCRIPTIONS = {
    "exists_all_lambda_superlinear": "a nontrivial convex solution exists for every parameter value",
    "exists_all_lambda_sublinear": "a nontrivial convex solution exists for every parameter value",
    "exists_above_threshold": "a strictly convex solution exists above some threshold",
    "exists_below_threshold": "a strictly convex solution exists below some threshold",
    "two_above_threshold": "two strictly convex solutions exist above some threshold",
    "two_below_threshold": "two strictly convex solutions exist below some threshold",
    "none_below_threshold": "no strictly convex solution exists below some threshold",
    "none_above_threshold": "no strictly convex solution exists above some threshold",
    "undetermined": "limit classification is ambiguous; no regime is claimed",
}


@dataclass
class Classification:
    report: BoundsReport
    regimes: tuple  # (label, description) pairs

    def labels(self) -> tuple:
        return tuple(label for label, _ in self.regimes)

    def to_text(self) -> str:
        lines = [self.report.to_text().rstrip("\n")]
        for label, description in self.regimes:
            lines.append(f"regime_{label}={description}")
        return "\n".join(lines) + "\n"


def classify(spec: ProblemSpec, r_ref: float = 1.0) -> Classification:
    """Map the summed limit classifications to the applicable existence,
    multiplicity and nonexistence regimes; all matches are reported."""
    report = analyze(spec, r_ref)
    k0, kinf = report.f0_total.kind, report.finf_total.kind
    if k0 == "ambiguous" or kinf == "ambiguous":
        return Classification(report, (("undetermined", REGIME_DESCRIPTIONS["undetermined"]),))
    regimes = []
    if k0 == "zero" and kinf == "infinite":
        regimes.append("exists_all_lambda_superlinear")
    if k0 == "infinite" and kinf == "zero":
        regimes.append("exists_all_lambda_sublinear")
    if k0 == "zero" or kinf == "zero":
        regimes.append("exists_above_threshold")
    if k0 == "infinite" or kinf == "infinite":
        regimes.append("exists_below_threshold")
    if k0 == "zero" and kinf == "zero":
        regimes.append("two_above_threshold")
    if k0 == "infinite" and kinf == "infinite":
        regimes.append("two_below_threshold")
    if k0 in ("zero", "finite") and kinf in ("zero", "finite"):
        regimes.append("none_below_threshold")
    if k0 in ("finite", "infinite") and kinf in ("finite", "infinite"):
        regimes.append("none_above_threshold")
    return Classification(report, tuple((r, REGIME_DESCRIPTIONS[r]) for r in regimes))
