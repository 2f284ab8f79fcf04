"""Pure-NumPy implementations of the hot numerical kernels.

Reference semantics for the numba backend; selected with MABVP_BACKEND=numpy.
"""

from __future__ import annotations

import numpy as np

from ..expressions import (
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_EXP,
    OP_MUL,
    OP_POW,
    OP_SUB,
    OP_VAR,
)

NAME = "numpy"


def eval_point(ops, args, length, v):
    """Evaluate one tape at a single point v (1-D array). Returns float."""
    stack = np.empty(max(int(length), 1))
    top = -1
    with np.errstate(all="ignore"):
        for k in range(length):
            op = ops[k]
            if op == OP_CONST:
                top += 1
                stack[top] = args[k]
            elif op == OP_VAR:
                top += 1
                stack[top] = v[int(args[k])]
            elif op == OP_ADD:
                stack[top - 1] = stack[top - 1] + stack[top]
                top -= 1
            elif op == OP_SUB:
                stack[top - 1] = stack[top - 1] - stack[top]
                top -= 1
            elif op == OP_MUL:
                stack[top - 1] = stack[top - 1] * stack[top]
                top -= 1
            elif op == OP_DIV:
                stack[top - 1] = stack[top - 1] / stack[top]
                top -= 1
            elif op == OP_POW:
                stack[top] = np.power(stack[top], args[k])
            else:  # OP_EXP
                stack[top] = np.exp(stack[top])
    return float(stack[0])


def eval_grid(ops, args, length, pts):
    """Evaluate one tape at many points; pts has shape (n, P)."""
    P = pts.shape[1]
    stack = np.empty((max(int(length), 1), P))
    top = -1
    with np.errstate(all="ignore"):
        for k in range(length):
            op = ops[k]
            if op == OP_CONST:
                top += 1
                stack[top] = args[k]
            elif op == OP_VAR:
                top += 1
                stack[top] = pts[int(args[k])]
            elif op == OP_ADD:
                stack[top - 1] += stack[top]
                top -= 1
            elif op == OP_SUB:
                stack[top - 1] -= stack[top]
                top -= 1
            elif op == OP_MUL:
                stack[top - 1] *= stack[top]
                top -= 1
            elif op == OP_DIV:
                stack[top - 1] /= stack[top]
                top -= 1
            elif op == OP_POW:
                np.power(stack[top], args[k], out=stack[top])
            else:  # OP_EXP
                np.exp(stack[top], out=stack[top])
    return stack[0].copy()


def _components_at(ops2, args2, lengths, point, out):
    ok = True
    for i in range(len(lengths)):
        value = eval_point(ops2[i], args2[i], lengths[i], point)
        if not np.isfinite(value) or value < 0.0:
            ok = False
        out[i] = value
    return ok


def shoot(alpha, lam, N, M, ops2, args2, lengths, stack_need):
    """Integrate the radial first-order system outward from t = 0.

    State per component i: v_i with v_i(0) = alpha_i and the accumulated
    flux w_i with w_i(0) = 0, where w_i' = lam*N*t^(N-1)*f_i(max(v, 0))
    and v_i' = -max(w_i, 0)^(1/N).  The step [0, h] uses the quadratic
    expansion of v (the 1/N-th root has unbounded derivatives at w = 0),
    classical RK4 afterwards.

    Returns (v, w, status); status 0 means success, k+1 means the
    nonlinearity produced an invalid value at step k.
    """
    n = alpha.shape[0]
    h = 1.0 / M
    v = np.zeros((n, M + 1))
    w = np.zeros((n, M + 1))
    fvals = np.empty(n)
    if not _components_at(ops2, args2, lengths, np.maximum(alpha, 0.0), fvals):
        return v, w, 1
    root = 1.0 / N
    # quadratic expansion through the first few nodes; the 1/N-th root of w
    # is not RK4-friendly while w ~ t^N is still at rounding scale
    patch = min(4, max(1, M // 8))
    c = (lam * fvals) ** root
    v[:, 0] = alpha
    w[:, 0] = 0.0
    for k in range(1, patch + 1):
        t = k * h
        v[:, k] = alpha - c * (0.5 * t * t)
        w[:, k] = lam * fvals * t**N
    yv = v[:, patch].copy()
    yw = w[:, patch].copy()

    def rhs(t, sv, sw):
        if not _components_at(ops2, args2, lengths, np.maximum(sv, 0.0), fvals):
            return None, None
        dw = (lam * N * t ** (N - 1)) * fvals
        dv = -(np.maximum(sw, 0.0) ** root)
        return dv, dw

    for k in range(patch, M):
        t = k * h
        a1v, a1w = rhs(t, yv, yw)
        if a1v is None:
            return v, w, k + 1
        a2v, a2w = rhs(t + 0.5 * h, yv + 0.5 * h * a1v, yw + 0.5 * h * a1w)
        if a2v is None:
            return v, w, k + 1
        a3v, a3w = rhs(t + 0.5 * h, yv + 0.5 * h * a2v, yw + 0.5 * h * a2w)
        if a3v is None:
            return v, w, k + 1
        a4v, a4w = rhs(t + h, yv + h * a3v, yw + h * a3w)
        if a4v is None:
            return v, w, k + 1
        yv = yv + (h / 6.0) * (a1v + 2.0 * a2v + 2.0 * a3v + a4v)
        yw = yw + (h / 6.0) * (a1w + 2.0 * a2w + 2.0 * a3w + a4w)
        v[:, k + 1] = yv
        w[:, k + 1] = yw
    return v, w, 0


def operator_apply(values, lam, N, ops2, args2, lengths, stack_need):
    """Apply the cone integral operator to profile values of shape (n, M+1).

    Component i: cumulative trapezoid of lam*N*t^(N-1)*f_i(v(t)) from 0,
    clamped at 0, raised to 1/N, then accumulated by trapezoid from t = 1
    leftward so the boundary value is exactly zero.

    Returns (out, status); status 0 on success, i+1 if component i hit an
    invalid nonlinearity value.
    """
    n, MP1 = values.shape
    M = MP1 - 1
    h = 1.0 / M
    t = np.linspace(0.0, 1.0, MP1)
    weight = (lam * N) * t ** (N - 1)
    out = np.zeros_like(values)
    root = 1.0 / N
    for i in range(n):
        f = eval_grid(ops2[i], args2[i], lengths[i], values)
        if not np.all(np.isfinite(f)) or np.any(f < 0.0):
            return out, i + 1
        integrand = weight * f
        seg = (integrand[:-1] + integrand[1:]) * (0.5 * h)
        w = np.concatenate(([0.0], np.cumsum(seg)))
        g = np.maximum(w, 0.0) ** root
        segg = (g[:-1] + g[1:]) * (0.5 * h)
        out[i, :-1] = np.cumsum(segg[::-1])[::-1]
        out[i, -1] = 0.0
    return out, 0
