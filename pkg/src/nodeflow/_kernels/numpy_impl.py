"""Pure-numpy kernel implementations (vectorized over the batch axis).

This is the fallback path selected with NODEFLOW_BACKEND=numpy; the
numba backend mirrors these routines point by point. Both consume the
PackedField encoding from `pack.py`.
"""

import numpy as np

from .pack import (ACT_RELU, KIND_BUMP1D, KIND_CONSTANT, KIND_LINEAR,
                   KIND_MLP, KIND_RADIAL, KIND_ZERO, PackedField)

NAME = "numpy"


def bump_profile(s):
    """Smooth bump exp(-1/(s(1-s))) on (0,1), exactly 0 elsewhere."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def eval_batch(pf: PackedField, x: np.ndarray) -> np.ndarray:
    """Field values for a batch of points x with shape (n, d)."""
    kind = pf.kind
    if kind == KIND_ZERO:
        return np.zeros_like(x)
    if kind == KIND_CONSTANT:
        return np.broadcast_to(pf.scale * pf.vec, x.shape).copy()
    if kind == KIND_LINEAR:
        return pf.scale * (x @ pf.mat.T)
    if kind == KIND_BUMP1D:
        center, width, amplitude = pf.vec
        xi = x[:, 0] - center
        u = np.abs(xi) / width
        out = (pf.scale * amplitude) * bump_profile(u) * np.sign(xi)
        return out[:, None]
    if kind == KIND_RADIAL:
        r_inner, r_outer = pf.vec
        r = np.sqrt(np.sum(x * x, axis=1))
        phi = bump_profile((r - r_inner) / (r_outer - r_inner))
        return (pf.scale * phi)[:, None] * (x @ pf.mat.T)
    if kind == KIND_MLP:
        h = x
        off_w = off_b = 0
        for layer in range(len(pf.sizes) - 1):
            fan_in = int(pf.sizes[layer])
            fan_out = int(pf.sizes[layer + 1])
            w = pf.weights[off_w:off_w + fan_out * fan_in].reshape(fan_out, fan_in)
            b = pf.biases[off_b:off_b + fan_out]
            h = h @ w.T + b
            if layer < len(pf.sizes) - 2:
                h = np.maximum(h, 0.0) if pf.act == ACT_RELU else np.tanh(h)
            off_w += fan_out * fan_in
            off_b += fan_out
        return pf.scale * h
    raise ValueError(f"unknown field kind {kind}")


def rk4_batch(pf: PackedField, x0: np.ndarray, t: float, n_steps: int):
    """Classical RK4 over n_steps equal steps for the whole batch.

    Returns (states, all_finite). No exception is raised here so the
    two backends share the same calling convention.
    """
    y = np.array(x0, dtype=np.float64, copy=True)
    h = t / n_steps
    for _ in range(n_steps):
        k1 = eval_batch(pf, y)
        k2 = eval_batch(pf, y + (0.5 * h) * k1)
        k3 = eval_batch(pf, y + (0.5 * h) * k2)
        k4 = eval_batch(pf, y + h * k3)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            return y, False
    return y, True


def h_series_batch(xs: np.ndarray, terms: np.ndarray) -> np.ndarray:
    """Partial sums sum_{k<=K_i} x_i^(1/k-1)/k^3, one K per point."""
    out = np.empty(len(xs))
    for i, (x, K) in enumerate(zip(xs, terms)):
        k = np.arange(1, K + 1, dtype=np.float64)
        out[i] = np.exp((1.0 / k - 1.0) * np.log(x)) @ (1.0 / (k * k * k))
    return out
