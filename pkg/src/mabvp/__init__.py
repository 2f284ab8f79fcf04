"""Solver and verification toolkit for systems of radial two-point boundary
value problems driven by the Hessian-determinant operator."""

from .analysis import (
    BoundsReport,
    Classification,
    analyze,
    classify,
    gamma_constant,
    hat_envelope,
    limit_estimate,
    weak_bounds,
)
from .expressions import (
    EvaluationRangeError,
    ExpressionError,
    ExpressionSyntaxError,
    evaluate,
    parse,
    to_string,
    validate_nonneg,
)
from .integral_operator import PowerMap, apply as apply_operator, inner_accumulate, residual
from .kernels import BACKEND
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
from .solver import (
    SearchWindow,
    SweepTable,
    bisect_lambda,
    find_solutions_scalar,
    find_solutions_system,
    picard,
    shoot,
    sweep,
    verify_solution,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundsReport",
    "Classification",
    "ConeReport",
    "EvaluationRangeError",
    "ExpressionError",
    "ExpressionSyntaxError",
    "Mesh",
    "PowerMap",
    "Profile",
    "ProblemSpec",
    "SearchWindow",
    "SolutionPair",
    "SweepTable",
    "analyze",
    "apply_operator",
    "bisect_lambda",
    "classify",
    "cone_check",
    "evaluate",
    "find_solutions_scalar",
    "find_solutions_system",
    "gamma_constant",
    "hat_envelope",
    "hessian_det_radial",
    "inner_accumulate",
    "limit_estimate",
    "norm",
    "parse",
    "picard",
    "residual",
    "shoot",
    "sweep",
    "to_solution",
    "to_string",
    "validate_nonneg",
    "verify_solution",
    "weak_bounds",
]
