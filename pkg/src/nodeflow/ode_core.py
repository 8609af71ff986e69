"""Deterministic solution of autonomous initial value problems.

The default method is classical fixed-step RK4 with a per-unit-time
step budget, which keeps every run bit-reproducible. An embedded
Dormand-Prince 5(4) pair is available for rougher (learned) fields.
Negative times integrate the negated field forward, which is exact for
autonomous systems and keeps a single code path.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import pack_field
from .errors import (DimensionMismatch, MaxStepsExceeded, NonFiniteState)
from .field_zoo import VectorFieldSpec

FIXED_RK4 = "fixed_rk4"
ADAPTIVE_DP54 = "adaptive_dp54"


@dataclass(frozen=True)
class SolverConfig:
    method: str = FIXED_RK4
    step_count: int = 256       # fixed method: steps per unit time
    rel_tol: float = 1e-9       # adaptive method
    abs_tol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in (FIXED_RK4, ADAPTIVE_DP54):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step_count < 1:
            raise ValueError("step_count must be >= 1")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < self.step_count:
            raise ValueError("max_steps must be >= step_count")


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        p = np.asarray(self.points, dtype=np.float64)
        if len(t) != len(p):
            raise ValueError("times and points must have equal length")
        dt = np.diff(t)
        if len(dt) and not (np.all(dt > 0) or np.all(dt < 0)):
            raise ValueError("times must be strictly monotone")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)


def _check_batch(field: VectorFieldSpec, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != field.dim:
        raise DimensionMismatch(
            f"expected points of shape (n, {field.dim}), got {x.shape}")
    return x


def integrate_batch(field: VectorFieldSpec, x0: np.ndarray, t: float,
                    cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """Batch version of `integrate`; x0 has shape (n, d)."""
    x0 = _check_batch(field, x0)
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0.0:
        return x0.copy()
    pf = pack_field(field)
    if t < 0.0:
        pf = _kernels.negated(pf)
        t = -t
    if cfg.method == FIXED_RK4:
        n_steps = max(1, math.ceil(t * cfg.step_count))
        out, ok = _kernels.rk4_batch(pf, x0, t, n_steps)
        if not ok:
            raise NonFiniteState("trajectory left the finite range")
        return out
    out = np.empty_like(x0)
    for i in range(x0.shape[0]):
        out[i] = _dp54_point(pf, x0[i], t, cfg)
    return out


def integrate(field: VectorFieldSpec, x0, t: float,
              cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """Numerical solution z(t) of z' = f(z), z(0) = x0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (field.dim,):
        raise DimensionMismatch(f"expected a {field.dim}-vector, got {x0.shape}")
    return integrate_batch(field, x0[None, :], t, cfg)[0]


def trajectory(field: VectorFieldSpec, x0, times,
               cfg: SolverConfig = DEFAULT_SOLVER) -> Trajectory:
    """States at the given (sorted) times, integrated incrementally."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    points = np.empty((len(times), field.dim))
    current = x0[None, :].copy()
    prev_t = 0.0
    for i, ti in enumerate(times):
        dt = float(ti) - prev_t
        if dt != 0.0:
            current = integrate_batch(field, current, dt, cfg)
        points[i] = current[0]
        prev_t = float(ti)
    return Trajectory(times, points)


# Dormand-Prince 5(4) tableau
_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])


def _dp54_point(pf, x0: np.ndarray, t_end: float, cfg: SolverConfig) -> np.ndarray:
    def f(y):
        return _kernels.eval_batch(pf, y[None, :])[0]

    y = x0.copy()
    t = 0.0
    h = min(t_end, 0.1)
    k = [np.zeros_like(y) for _ in range(7)]
    k[0] = f(y)
    for _ in range(cfg.max_steps):
        if t >= t_end:
            return y
        h = min(h, t_end - t)
        for s, row in enumerate(_DP_A):
            ys = y + h * sum(a * k[j] for j, a in enumerate(row))
            k[s + 1] = f(ys)
        y5 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B5) if b != 0.0)
        y4 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B4) if b != 0.0)
        if not np.all(np.isfinite(y5)):
            raise NonFiniteState("trajectory left the finite range")
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
        if err <= 1.0:
            t += h
            y = y5
            k[0] = k[6]  # FSAL: last stage sits at the accepted state
        factor = 0.9 * (err ** -0.2) if err > 0.0 else 5.0
        h *= min(5.0, max(0.2, factor))
    raise MaxStepsExceeded(
        f"adaptive solver exceeded {cfg.max_steps} steps before t={t_end}")
