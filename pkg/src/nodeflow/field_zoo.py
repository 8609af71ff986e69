"""Lipschitz vector fields with certified bounds and exact flows.

Each field evaluates to a globally Lipschitz map on R^d and carries a
cheaply certified upper bound on its Lipschitz constant. The compactly
supported variants (the odd 1d bump and the bump-gated rotation) are
exactly zero outside their declared support, so their flows fix the
complement pointwise. Closed-form flows are available for the variants
whose trajectories have exact solutions; they serve as oracles for the
numerical integrator.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from . import _kernels
from ._kernels import pack_field
from .errors import DimensionMismatch, NoClosedForm

_SAFETY = 1.1  # widens sampled derivative maxima into certified bounds


def _readonly(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# variants

@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True, eq=False)
class Constant:
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _readonly(np.atleast_1d(self.value)))


@dataclass(frozen=True, eq=False)
class Linear:
    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(np.atleast_2d(self.matrix))
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"linear matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Bump1D:
    """Odd extension of a smooth bump: amplitude * g(|x-c|/w) * sign(x-c).

    g is exp(-1/(s(1-s))) on (0,1) and 0 elsewhere, so the field is
    C-infinity, nonnegative on the right half, and supported exactly on
    [center-width, center+width].
    """

    center: float
    width: float
    amplitude: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")


@dataclass(frozen=True, eq=False)
class RadialRotation:
    """x -> phi(|x|) A x with A skew-symmetric and phi a smooth bump.

    phi is supported on [r_inner, r_outer], so every trajectory outside
    the annulus is a fixed point and inside it the motion is a rotation
    that preserves the Euclidean norm.
    """

    matrix: np.ndarray
    r_inner: float
    r_outer: float

    def __post_init__(self):
        m = _readonly(np.atleast_2d(self.matrix))
        if not np.array_equal(m.T, -m):
            raise ValueError("rotation generator must be skew-symmetric")
        if not (0 < self.r_inner < self.r_outer):
            raise ValueError("need 0 < r_inner < r_outer")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class MlpParams:
    widths: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unsupported activation {self.activation!r}")
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError("widths must be >= 2 positive layer sizes")
        if widths[0] != widths[-1]:
            raise ValueError("field MLP must map R^d to R^d")
        weights = tuple(_readonly(w) for w in self.weights)
        biases = tuple(_readonly(b) for b in self.biases)
        if len(weights) != len(widths) - 1 or len(biases) != len(widths) - 1:
            raise ValueError("need one weight and bias per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (widths[i + 1], widths[i]) or b.shape != (widths[i + 1],):
                raise ValueError(f"layer {i} shapes do not chain")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)


@dataclass(frozen=True)
class Mlp:
    params: MlpParams


@dataclass(frozen=True)
class Scaled:
    factor: float
    inner: "VectorFieldSpec"


Variant = Union[Zero, Constant, Linear, Bump1D, RadialRotation, Mlp, Scaled]


@dataclass(frozen=True)
class VectorFieldSpec:
    dim: int
    variant: Variant

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise ValueError("dim must be positive")
        v = self.variant
        if isinstance(v, Constant) and v.value.shape != (d,):
            raise DimensionMismatch(f"constant value has shape {v.value.shape}, dim {d}")
        if isinstance(v, Linear) and v.matrix.shape != (d, d):
            raise DimensionMismatch(f"linear matrix has shape {v.matrix.shape}, dim {d}")
        if isinstance(v, Bump1D) and d != 1:
            raise DimensionMismatch("bump field is one-dimensional only")
        if isinstance(v, RadialRotation):
            if d < 2:
                raise DimensionMismatch("radial rotation needs dim >= 2")
            if v.matrix.shape != (d, d):
                raise DimensionMismatch(f"generator has shape {v.matrix.shape}, dim {d}")
        if isinstance(v, Mlp) and v.params.widths[0] != d:
            raise DimensionMismatch(f"MLP maps R^{v.params.widths[0]}, dim {d}")
        if isinstance(v, Scaled) and v.inner.dim != d:
            raise DimensionMismatch(f"scaled inner field has dim {v.inner.dim}, outer {d}")


# constructors

def zero(dim: int) -> VectorFieldSpec:
    return VectorFieldSpec(dim, Zero())


def constant(value) -> VectorFieldSpec:
    v = Constant(value)
    return VectorFieldSpec(v.value.shape[0], v)


def linear(matrix) -> VectorFieldSpec:
    v = Linear(matrix)
    return VectorFieldSpec(v.matrix.shape[0], v)


def bump1d(center: float, width: float, amplitude: float) -> VectorFieldSpec:
    return VectorFieldSpec(1, Bump1D(center, width, amplitude))


def radial_rotation(matrix, r_inner: float, r_outer: float) -> VectorFieldSpec:
    v = RadialRotation(matrix, r_inner, r_outer)
    return VectorFieldSpec(v.matrix.shape[0], v)


def mlp_field(params: MlpParams) -> VectorFieldSpec:
    return VectorFieldSpec(params.widths[0], Mlp(params))


def scaled(factor: float, inner: VectorFieldSpec) -> VectorFieldSpec:
    return VectorFieldSpec(inner.dim, Scaled(float(factor), inner))


def rotation_generator(dim: int) -> np.ndarray:
    """Smallest nonzero skew-symmetric matrix: rotation in the (0,1) plane."""
    a = np.zeros((dim, dim))
    a[0, 1] = 1.0
    a[1, 0] = -1.0
    return a


# ---------------------------------------------------------------------------
# evaluation

def eval_field_batch(spec: VectorFieldSpec, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.dim:
        raise DimensionMismatch(f"expected (n, {spec.dim}) points, got {x.shape}")
    return _kernels.eval_batch(pack_field(spec), x)


def eval_field(spec: VectorFieldSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (spec.dim,):
        raise DimensionMismatch(f"expected a {spec.dim}-vector, got shape {x.shape}")
    return eval_field_batch(spec, x[None, :])[0]


def bump_profile(s):
    """Smooth bump exp(-1/(s(1-s))) on (0,1), exactly 0 elsewhere."""
    return _bump_profile_np(s)


def _bump_profile_np(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def _bump_profile_deriv(s):
    """d/ds exp(-1/(s(1-s))) = g(s) (2s-1)/(s(1-s))^2 inside, 0 outside."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    q = si * (1.0 - si)
    out[inside] = np.exp(-1.0 / q) * (2.0 * si - 1.0) / (q * q)
    return out


_PROFILE_GRID = np.linspace(0.0, 1.0, 20001)
_PROFILE_MAX = float(_bump_profile_np(_PROFILE_GRID).max())
_PROFILE_DERIV_MAX = float(np.abs(_bump_profile_deriv(_PROFILE_GRID)).max())


# ---------------------------------------------------------------------------
# certified Lipschitz bounds

def lipschitz_bound(spec: VectorFieldSpec) -> float:
    """Certified upper bound on the field's Lipschitz constant."""
    v = spec.variant
    if isinstance(v, Zero) or isinstance(v, Constant):
        return 0.0
    if isinstance(v, Linear):
        return operator_norm(v.matrix)
    if isinstance(v, Scaled):
        return abs(v.factor) * lipschitz_bound(v.inner)
    if isinstance(v, Bump1D):
        return abs(v.amplitude) / v.width * _PROFILE_DERIV_MAX * _SAFETY
    if isinstance(v, RadialRotation):
        # |D f| <= |A| * max_r (phi(r) + r |phi'(r)|) over the support
        width = v.r_outer - v.r_inner
        r = v.r_inner + _PROFILE_GRID * width
        local = _bump_profile_np(_PROFILE_GRID) + r * np.abs(
            _bump_profile_deriv(_PROFILE_GRID)) / width
        return operator_norm(v.matrix) * float(local.max()) * _SAFETY
    if isinstance(v, Mlp):
        bound = 1.0
        for w in v.params.weights:
            bound *= operator_norm(w)
        return bound
    raise TypeError(f"unsupported variant {type(v).__name__}")


def operator_norm(matrix: np.ndarray, rel_tol: float = 1e-10,
                  max_iter: int = 20000) -> float:
    """Spectral norm by power iteration on M^T M."""
    m = np.asarray(matrix, dtype=np.float64)
    gram = m.T @ m
    d = gram.shape[0]
    v = np.arange(1.0, d + 1.0)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= rel_tol * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))


# ---------------------------------------------------------------------------
# exact flows

def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring a truncated Taylor series.

    For skew-symmetric input the result is orthogonal to ~1e-15.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exp requires finite entries")
    d = m.shape[0]
    norm = float(np.abs(m).sum(axis=1).max()) if m.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.25))) if norm > 0.25 else 0)
    a = m / (2.0 ** squarings)
    result = np.eye(d)
    term = np.eye(d)
    for k in range(1, 41):
        term = term @ a / k
        result = result + term
        if float(np.abs(term).max()) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def closed_form_flow_batch(spec: VectorFieldSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Exact flow endpoints for variants with analytic solutions."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.dim:
        raise DimensionMismatch(f"expected (n, {spec.dim}) points, got {x.shape}")
    v = spec.variant
    if isinstance(v, Zero):
        return x.copy()
    if isinstance(v, Constant):
        return x + t * v.value
    if isinstance(v, Linear):
        return x @ matrix_exp(t * v.matrix).T
    if isinstance(v, Scaled):
        # the flow of c*f at time t is the flow of f at time c*t
        return closed_form_flow_batch(v.inner, x, v.factor * t)
    if isinstance(v, RadialRotation):
        # |x| is invariant along trajectories, so the rotation rate
        # phi(|x|) is constant and the endpoint is a fixed rotation.
        out = x.copy()
        width = v.r_outer - v.r_inner
        r = np.sqrt(np.sum(x * x, axis=1))
        phi = _bump_profile_np((r - v.r_inner) / width)
        moving = phi > 0.0
        for i in np.nonzero(moving)[0]:
            rot = matrix_exp(t * phi[i] * v.matrix)
            out[i] = rot @ x[i]
        return out
    raise NoClosedForm(f"no exact flow for variant {type(v).__name__}")


def closed_form_flow(spec: VectorFieldSpec, x, t: float) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return closed_form_flow_batch(spec, x[None, :], t)[0]


def has_closed_form(spec: VectorFieldSpec) -> bool:
    v = spec.variant
    if isinstance(v, Scaled):
        return has_closed_form(v.inner)
    return isinstance(v, (Zero, Constant, Linear, RadialRotation))


# ---------------------------------------------------------------------------
# serialization (doubles survive the round trip exactly: json emits the
# shortest decimal that reparses to the same IEEE-754 value)

def field_to_json(spec: VectorFieldSpec) -> dict:
    v = spec.variant
    if isinstance(v, Zero):
        return {"variant": "zero", "dim": spec.dim}
    if isinstance(v, Constant):
        return {"variant": "constant", "dim": spec.dim, "value": v.value.tolist()}
    if isinstance(v, Linear):
        return {"variant": "linear", "dim": spec.dim, "matrix": v.matrix.tolist()}
    if isinstance(v, Bump1D):
        return {"variant": "bump1d", "dim": 1, "center": v.center,
                "width": v.width, "amplitude": v.amplitude}
    if isinstance(v, RadialRotation):
        return {"variant": "radial_rotation", "dim": spec.dim,
                "matrix": v.matrix.tolist(),
                "r_inner": v.r_inner, "r_outer": v.r_outer}
    if isinstance(v, Mlp):
        p = v.params
        return {"variant": "mlp", "dim": spec.dim, "widths": list(p.widths),
                "activation": p.activation,
                "weights": [w.tolist() for w in p.weights],
                "biases": [b.tolist() for b in p.biases]}
    if isinstance(v, Scaled):
        return {"variant": "scaled", "dim": spec.dim, "factor": v.factor,
                "inner": field_to_json(v.inner)}
    raise TypeError(f"unsupported variant {type(v).__name__}")


def field_from_json(doc: dict) -> VectorFieldSpec:
    kind = doc["variant"]
    if kind == "zero":
        return zero(doc["dim"])
    if kind == "constant":
        return constant(doc["value"])
    if kind == "linear":
        return linear(doc["matrix"])
    if kind == "bump1d":
        return bump1d(doc["center"], doc["width"], doc["amplitude"])
    if kind == "radial_rotation":
        return radial_rotation(doc["matrix"], doc["r_inner"], doc["r_outer"])
    if kind == "mlp":
        params = MlpParams(tuple(doc["widths"]),
                           tuple(np.array(w) for w in doc["weights"]),
                           tuple(np.array(b) for b in doc["biases"]),
                           doc["activation"])
        return mlp_field(params)
    if kind == "scaled":
        return scaled(doc["factor"], field_from_json(doc["inner"]))
    raise ValueError(f"unknown field variant {kind!r}")
