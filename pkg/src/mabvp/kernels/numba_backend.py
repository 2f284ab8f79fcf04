"""Numba-compiled versions of the hot kernels.

Same contracts as numpy_backend; error_model="numpy" keeps IEEE semantics
(division by zero -> inf, invalid pow -> NaN) identical to the fallback.
"""

from __future__ import annotations

import numpy as np
from numba import njit

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

NAME = "numba"

_JIT = {"cache": True, "error_model": "numpy", "fastmath": False}


@njit(**_JIT)
def _eval(ops, args, length, v, stack):
    top = -1
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
            stack[top] = stack[top] ** args[k]
        else:  # OP_EXP
            stack[top] = np.exp(stack[top])
    return stack[0]


@njit(**_JIT)
def _eval_grid_kernel(ops, args, length, pts, out, stack):
    P = pts.shape[1]
    n = pts.shape[0]
    point = np.empty(n)
    for j in range(P):
        for i in range(n):
            point[i] = pts[i, j]
        out[j] = _eval(ops, args, length, point, stack)


@njit(**_JIT)
def _rhs(t, sv, sw, lam, N, ops2, args2, lengths, dv, dw, vclamp, stack):
    n = sv.shape[0]
    for i in range(n):
        vclamp[i] = sv[i] if sv[i] > 0.0 else 0.0
    tp = t ** (N - 1)
    root = 1.0 / N
    for i in range(n):
        f = _eval(ops2[i], args2[i], lengths[i], vclamp, stack)
        if not np.isfinite(f) or f < 0.0:
            return 1
        dw[i] = lam * N * tp * f
        wi = sw[i] if sw[i] > 0.0 else 0.0
        dv[i] = -(wi**root)
    return 0


@njit(**_JIT)
def _shoot_kernel(alpha, lam, N, M, ops2, args2, lengths, stack, v, w):
    n = alpha.shape[0]
    h = 1.0 / M
    fvals = np.empty(n)
    vclamp = np.empty(n)
    for i in range(n):
        vclamp[i] = alpha[i] if alpha[i] > 0.0 else 0.0
    for i in range(n):
        f = _eval(ops2[i], args2[i], lengths[i], vclamp, stack)
        if not np.isfinite(f) or f < 0.0:
            return 1
        fvals[i] = f
    root = 1.0 / N
    # quadratic expansion through the first few nodes; the 1/N-th root of w
    # is not RK4-friendly while w ~ t^N is still at rounding scale
    patch = min(4, max(1, M // 8))
    for i in range(n):
        v[i, 0] = alpha[i]
        w[i, 0] = 0.0
        c = (lam * fvals[i]) ** root
        for k in range(1, patch + 1):
            t = k * h
            v[i, k] = alpha[i] - c * (0.5 * t * t)
            w[i, k] = lam * fvals[i] * t**N
    yv = np.empty(n)
    yw = np.empty(n)
    tv = np.empty(n)
    tw = np.empty(n)
    a1v = np.empty(n)
    a1w = np.empty(n)
    a2v = np.empty(n)
    a2w = np.empty(n)
    a3v = np.empty(n)
    a3w = np.empty(n)
    a4v = np.empty(n)
    a4w = np.empty(n)
    for i in range(n):
        yv[i] = v[i, patch]
        yw[i] = w[i, patch]
    for k in range(patch, M):
        t = k * h
        if _rhs(t, yv, yw, lam, N, ops2, args2, lengths, a1v, a1w, vclamp, stack) != 0:
            return k + 1
        for i in range(n):
            tv[i] = yv[i] + 0.5 * h * a1v[i]
            tw[i] = yw[i] + 0.5 * h * a1w[i]
        if _rhs(t + 0.5 * h, tv, tw, lam, N, ops2, args2, lengths, a2v, a2w, vclamp, stack) != 0:
            return k + 1
        for i in range(n):
            tv[i] = yv[i] + 0.5 * h * a2v[i]
            tw[i] = yw[i] + 0.5 * h * a2w[i]
        if _rhs(t + 0.5 * h, tv, tw, lam, N, ops2, args2, lengths, a3v, a3w, vclamp, stack) != 0:
            return k + 1
        for i in range(n):
            tv[i] = yv[i] + h * a3v[i]
            tw[i] = yw[i] + h * a3w[i]
        if _rhs(t + h, tv, tw, lam, N, ops2, args2, lengths, a4v, a4w, vclamp, stack) != 0:
            return k + 1
        for i in range(n):
            yv[i] = yv[i] + (h / 6.0) * (a1v[i] + 2.0 * a2v[i] + 2.0 * a3v[i] + a4v[i])
            yw[i] = yw[i] + (h / 6.0) * (a1w[i] + 2.0 * a2w[i] + 2.0 * a3w[i] + a4w[i])
            v[i, k + 1] = yv[i]
            w[i, k + 1] = yw[i]
    return 0


@njit(**_JIT)
def _apply_kernel(values, lam, N, ops2, args2, lengths, stack, out):
    n, MP1 = values.shape
    M = MP1 - 1
    h = 1.0 / M
    root = 1.0 / N
    point = np.empty(n)
    g = np.empty(MP1)
    for i in range(n):
        # cumulative trapezoid of the weighted nonlinearity, left to right
        prev = 0.0
        acc = 0.0
        for k in range(MP1):
            t = k * h
            for j in range(n):
                point[j] = values[j, k]
            f = _eval(ops2[i], args2[i], lengths[i], point, stack)
            if not np.isfinite(f) or f < 0.0:
                return i + 1
            cur = (lam * N) * t ** (N - 1) * f
            if k > 0:
                acc = acc + (prev + cur) * (0.5 * h)
            g[k] = acc if acc > 0.0 else 0.0
            prev = cur
        for k in range(MP1):
            g[k] = g[k] ** root
        # right-anchored accumulation keeps the boundary value exactly zero
        out[i, M] = 0.0
        racc = 0.0
        for k in range(M - 1, -1, -1):
            racc = racc + (g[k] + g[k + 1]) * (0.5 * h)
            out[i, k] = racc
    return 0


def eval_point(ops, args, length, v):
    stack = np.empty(max(int(length), 1))
    return float(_eval(ops, args, int(length), np.asarray(v, dtype=np.float64), stack))


def eval_grid(ops, args, length, pts):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    out = np.empty(pts.shape[1])
    stack = np.empty(max(int(length), 1))
    _eval_grid_kernel(ops, args, int(length), pts, out, stack)
    return out


def shoot(alpha, lam, N, M, ops2, args2, lengths, stack_need):
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    n = alpha.shape[0]
    v = np.zeros((n, M + 1))
    w = np.zeros((n, M + 1))
    stack = np.empty(max(int(stack_need), 1))
    status = _shoot_kernel(alpha, float(lam), int(N), int(M), ops2, args2, lengths, stack, v, w)
    return v, w, int(status)


def operator_apply(values, lam, N, ops2, args2, lengths, stack_need):
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    stack = np.empty(max(int(stack_need), 1))
    status = _apply_kernel(values, float(lam), int(N), ops2, args2, lengths, stack, out)
    return out, int(status)
