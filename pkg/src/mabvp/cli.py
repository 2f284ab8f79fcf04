"""Command-line front end: key=value configs in, CSV/report files out.

Commands: solve, sweep, verify, gamma, classify, envelope.
Exit codes: 0 success, 1 validation failure, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, solver
from . import expressions as ex
from .model import Profile, ProblemSpec, profile_from_csv, profile_to_csv


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "M": 2048,
    "tol": 1e-10,
    "max_iter": 500,
    "r_lo": 1e-6,
    "r_hi": 1e3,
    "points": 64,
    "spacing": "geometric",
}

_INT_KEYS = {"N", "n", "M", "points", "max_iter"}
_FLOAT_KEYS = {"lambda", "r_lo", "r_hi", "lambda_min", "lambda_max", "tol"}
_STR_KEYS = {"spacing", "out"}


@dataclass
class Config:
    N: int
    n: int
    lam: float
    M: int
    expressions: tuple  # parsed ASTs, f1..fn
    texts: tuple  # the raw expression strings
    r_lo: float
    r_hi: float
    lambda_min: float
    lambda_max: float
    points: int
    spacing: str
    tol: float
    max_iter: int
    out: Optional[str]

    def to_problem_spec(self) -> ProblemSpec:
        return ProblemSpec(N=self.N, n=self.n, lam=self.lam, f=self.expressions, M=self.M)

    def window(self) -> solver.SearchWindow:
        return solver.SearchWindow(self.r_lo, self.r_hi)

    def lambda_grid(self) -> np.ndarray:
        if self.spacing == "geometric":
            return np.geomspace(self.lambda_min, self.lambda_max, self.points)
        return np.linspace(self.lambda_min, self.lambda_max, self.points)


def load_config(path) -> Config:
    """Parse a line-oriented key=value file with '#' comments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
        lines[key] = lineno

    def fail(key: str, message: str):
        raise ConfigError(f"{path}:{lines.get(key, 0)}: {message}")

    for required in ("N", "n", "lambda"):
        if required not in raw:
            raise ConfigError(f"{path}: missing required key {required!r}")

    values: dict = dict(DEFAULTS)
    expr_texts: dict[int, str] = {}
    for key, text in raw.items():
        if key in _INT_KEYS:
            try:
                values[key] = int(text)
            except ValueError:
                fail(key, f"{key} must be an integer, got {text!r}")
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(text)
            except ValueError:
                fail(key, f"{key} must be a real number, got {text!r}")
        elif key in _STR_KEYS:
            values[key] = text
        elif key.startswith("f") and key[1:].isdigit():
            expr_texts[int(key[1:])] = text
        else:
            fail(key, f"unknown key {key!r}")

    n = values["n"]
    for i in range(1, n + 1):
        if i not in expr_texts:
            raise ConfigError(f"{path}: missing required key 'f{i}'")
    for i in expr_texts:
        if not 1 <= i <= n:
            fail(f"f{i}", f"f{i} given but n = {n}")

    asts = []
    texts = []
    for i in range(1, n + 1):
        try:
            asts.append(ex.parse(expr_texts[i], n))
        except ex.ExpressionError as err:
            fail(f"f{i}", f"f{i}: {err}")
        texts.append(expr_texts[i])

    if values["spacing"] not in ("linear", "geometric"):
        fail("spacing", "spacing must be 'linear' or 'geometric'")
    lam = values["lambda"]
    values.setdefault("lambda_min", lam / 100.0)
    values.setdefault("lambda_max", lam * 100.0)

    try:
        config = Config(
            N=values["N"],
            n=n,
            lam=lam,
            M=values["M"],
            expressions=tuple(asts),
            texts=tuple(texts),
            r_lo=values["r_lo"],
            r_hi=values["r_hi"],
            lambda_min=values["lambda_min"],
            lambda_max=values["lambda_max"],
            points=values["points"],
            spacing=values["spacing"],
            tol=values["tol"],
            max_iter=values["max_iter"],
            out=values.get("out"),
        )
        config.to_problem_spec()  # runs the numeric validity checks
        config.window()
    except (ValueError, TypeError) as err:
        raise ConfigError(f"{path}: {err}") from err
    if config.points < 2 or config.lambda_min <= 0 or config.lambda_max <= config.lambda_min:
        raise ConfigError(f"{path}: sweep grid requires 0 < lambda_min < lambda_max and points >= 2")
    return config


# ---------------------------------------------------------------------------
# Commands


def _cmd_solve(config: Config, out_dir: str) -> int:
    spec = config.to_problem_spec()
    window = config.window()
    if spec.n == 1:
        solutions = [(np.array([a]), p) for a, p in solver.find_solutions_scalar(spec, window)]
    else:
        solutions = solver._multi_start_system(spec, window)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_lines = [f"solutions={len(solutions)}"]
    status = 0
    for idx, (alpha, profile) in enumerate(solutions, start=1):
        name = f"solution_{idx:03d}.csv"
        (out / name).write_text(profile_to_csv(profile))
        verification = solver.verify_solution(spec, profile)
        report_lines.append(f"[{name}]")
        report_lines.append("alpha=" + ",".join(f"{a:.17g}" for a in alpha))
        report_lines.append(f"norm={solver.norm(profile):.17g}")
        report_lines.append(f"cone_ok={verification.cone.ok}")
        report_lines.append(f"convex_ok={verification.pair.convex_ok}")
        report_lines.append(f"det_rel_err={max(verification.det_errors):.17g}")
        report_lines.append(f"fixed_point_residual={verification.fixed_point_residual:.17g}")
        for finding in verification.findings:
            report_lines.append(f"finding={finding}")
            status = 2
    (out / "solve_report.txt").write_text("\n".join(report_lines) + "\n")
    print(f"wrote {len(solutions)} solution(s) to {out}")
    return status


def _cmd_sweep(config: Config, out_file: str) -> int:
    spec = config.to_problem_spec()
    table = solver.sweep(spec, config.lambda_grid(), config.window())
    Path(out_file).write_text(table.to_csv())
    print(f"wrote sweep table ({len(table.rows)} rows) to {out_file}")
    return 0


def _cmd_verify(config: Config, solution_path: str) -> int:
    spec = config.to_problem_spec()
    try:
        profile = profile_from_csv(Path(solution_path).read_text())
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    spec = ProblemSpec(N=spec.N, n=spec.n, lam=spec.lam, f=spec.f, M=profile.intervals)
    report = solver.verify_solution(spec, profile)
    print(f"cone_ok={report.cone.ok}")
    print(f"convex_ok={report.pair.convex_ok}")
    print(f"det_rel_err={max(report.det_errors):.17g}")
    print(f"fixed_point_residual={report.fixed_point_residual:.17g}")
    for finding in report.findings:
        print(f"finding={finding}")
    print(f"findings={len(report.findings)}")
    return 0 if report.ok else 1


def _cmd_gamma(N: int) -> int:
    print(f"{analysis.gamma_constant(N):.17g}")
    return 0


def _cmd_classify(config: Config) -> int:
    spec = config.to_problem_spec()
    print(analysis.classify(spec).to_text(), end="")
    return 0


def _cmd_envelope(config: Config, tmax: float, points: int, out: Optional[str]) -> int:
    if tmax <= 0 or points < 2:
        print("error: envelope requires tmax > 0 and points >= 2", file=sys.stderr)
        return 1
    spec = config.to_problem_spec()
    ts = np.linspace(0.0, tmax, points)
    columns = []
    for ast in spec.f:
        col = [analysis.hat_envelope(ast, float(t), spec.n) for t in ts]
        columns.append(np.maximum.accumulate(col))  # envelope is nondecreasing
    lines = ["t," + ",".join(f"fhat{i + 1}" for i in range(spec.n))]
    for k, t in enumerate(ts):
        lines.append(",".join([f"{t:.17g}"] + [f"{col[k]:.17g}" for col in columns]))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
        print(f"wrote envelope table to {out}")
    else:
        print(text, end="")
    return 0


def run(command: str, config: Optional[Config], **options) -> int:
    """Dispatch a validated command; returns the process exit status."""
    if command == "gamma":
        return _cmd_gamma(options["N"])
    assert config is not None
    if command == "solve":
        return _cmd_solve(config, options.get("out") or ".")
    if command == "sweep":
        return _cmd_sweep(config, options["out"])
    if command == "verify":
        return _cmd_verify(config, options["solution"])
    if command == "classify":
        return _cmd_classify(config)
    if command == "envelope":
        return _cmd_envelope(config, options["tmax"], options["points"], options.get("out"))
    raise ValueError(f"unknown command {command!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mabvp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="find solutions and write CSVs plus a verification report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: current)")

    p = sub.add_parser("sweep", help="sweep the parameter grid and write the count table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="re-check a solution CSV against the configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)

    p = sub.add_parser("gamma", help="print the cone lower-bound constant for dimension N")
    p.add_argument("--N", type=int, required=True)

    p = sub.add_parser("classify", help="print limit classifications, regimes and thresholds")
    p.add_argument("--config", required=True)

    p = sub.add_parser("envelope", help="tabulate the running maxima of the nonlinearities")
    p.add_argument("--config", required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = None
        if getattr(args, "config", None) is not None:
            config = load_config(args.config)
        options = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        return run(args.command, config, **options)
    except (ConfigError, ex.ExpressionError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # solver failures and anything unexpected
        print(f"solver error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
