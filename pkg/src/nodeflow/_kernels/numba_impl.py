"""Numba-jitted kernels: per-point loops over the same packed encoding.

Hot paths only (field evaluation, fixed-step RK4, the singular h
series). Results agree with the numpy backend to rounding; within one
backend they are bit-reproducible.
"""

import math

import numpy as np
from numba import njit

from .pack import PackedField

NAME = "numba"

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _bump(s):
    if s <= 0.0 or s >= 1.0:
        return 0.0
    return math.exp(-1.0 / (s * (1.0 - s)))


@njit(**_JIT)
def _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                x, out, buf_a, buf_b):
    d = x.shape[0]
    if kind == 0:  # zero
        for i in range(d):
            out[i] = 0.0
        return
    if kind == 1:  # constant
        for i in range(d):
            out[i] = scale * vec[i]
        return
    if kind == 2:  # linear
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += mat[i, j] * x[j]
            out[i] = scale * acc
        return
    if kind == 3:  # odd-extended 1d bump
        xi = x[0] - vec[0]
        u = abs(xi) / vec[1]
        sign = 1.0 if xi > 0.0 else (-1.0 if xi < 0.0 else 0.0)
        out[0] = scale * vec[2] * _bump(u) * sign
        return
    if kind == 4:  # compactly supported rotation
        r2 = 0.0
        for i in range(d):
            r2 += x[i] * x[i]
        r = math.sqrt(r2)
        phi = _bump((r - vec[0]) / (vec[1] - vec[0]))
        if phi == 0.0:
            for i in range(d):
                out[i] = 0.0
            return
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += mat[i, j] * x[j]
            out[i] = scale * phi * acc
        return
    # mlp
    n_layers = sizes.shape[0] - 1
    for i in range(d):
        buf_a[i] = x[i]
    off_w = 0
    off_b = 0
    width_in = d
    for layer in range(n_layers):
        width_out = sizes[layer + 1]
        for i in range(width_out):
            acc = biases[off_b + i]
            row = off_w + i * width_in
            for j in range(width_in):
                acc += weights[row + j] * buf_a[j]
            buf_b[i] = acc
        if layer < n_layers - 1:
            if act == 0:
                for i in range(width_out):
                    if buf_b[i] < 0.0:
                        buf_b[i] = 0.0
            else:
                for i in range(width_out):
                    buf_b[i] = math.tanh(buf_b[i])
        off_w += width_out * width_in
        off_b += width_out
        width_in = width_out
        tmp = buf_a
        buf_a = buf_b
        buf_b = tmp
    for i in range(d):
        out[i] = scale * buf_a[i]


@njit(**_JIT)
def _eval_batch(kind, scale, vec, mat, sizes, weights, biases, act, x):
    n, d = x.shape
    width = d
    for i in range(sizes.shape[0]):
        if sizes[i] > width:
            width = sizes[i]
    buf_a = np.empty(width)
    buf_b = np.empty(width)
    out = np.empty_like(x)
    for i in range(n):
        _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                    x[i], out[i], buf_a, buf_b)
    return out


@njit(**_JIT)
def _rk4_batch(kind, scale, vec, mat, sizes, weights, biases, act,
               x0, t, n_steps):
    n, d = x0.shape
    width = d
    for i in range(sizes.shape[0]):
        if sizes[i] > width:
            width = sizes[i]
    buf_a = np.empty(width)
    buf_b = np.empty(width)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    stage = np.empty(d)
    y = x0.copy()
    h = t / n_steps
    ok = True
    for p in range(n):
        yp = y[p]
        for _ in range(n_steps):
            _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                        yp, k1, buf_a, buf_b)
            for i in range(d):
                stage[i] = yp[i] + 0.5 * h * k1[i]
            _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                        stage, k2, buf_a, buf_b)
            for i in range(d):
                stage[i] = yp[i] + 0.5 * h * k2[i]
            _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                        stage, k3, buf_a, buf_b)
            for i in range(d):
                stage[i] = yp[i] + h * k3[i]
            _eval_point(kind, scale, vec, mat, sizes, weights, biases, act,
                        stage, k4, buf_a, buf_b)
            finite = True
            for i in range(d):
                yp[i] = yp[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not math.isfinite(yp[i]):
                    finite = False
            if not finite:
                ok = False
                break
        if not ok:
            break
    return y, ok


@njit(**_JIT)
def _h_series_batch(xs, terms):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        lx = math.log(xs[i])
        acc = 0.0
        for k in range(1, terms[i] + 1):
            acc += math.exp((1.0 / k - 1.0) * lx) / (k * k * k)
        out[i] = acc
    return out


def eval_batch(pf: PackedField, x: np.ndarray) -> np.ndarray:
    return _eval_batch(pf.kind, pf.scale, pf.vec, pf.mat, pf.sizes,
                       pf.weights, pf.biases, pf.act, x)


def rk4_batch(pf: PackedField, x0: np.ndarray, t: float, n_steps: int):
    return _rk4_batch(pf.kind, pf.scale, pf.vec, pf.mat, pf.sizes,
                      pf.weights, pf.biases, pf.act,
                      np.ascontiguousarray(x0, dtype=np.float64),
                      float(t), n_steps)


def h_series_batch(xs: np.ndarray, terms: np.ndarray) -> np.ndarray:
    return _h_series_batch(np.ascontiguousarray(xs, dtype=np.float64),
                           np.ascontiguousarray(terms, dtype=np.int64))
