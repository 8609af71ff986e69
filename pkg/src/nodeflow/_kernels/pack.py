"""Flat array encoding of vector fields, shared by both kernel backends.

A packed field is a tuple of plain scalars and contiguous float64/int64
arrays so the same values can feed either the jitted kernels or the
vectorized numpy fallback. `Scaled` wrappers fold multiplicatively into
a single scale factor.
"""

from typing import NamedTuple

import numpy as np

KIND_ZERO = 0
KIND_CONSTANT = 1
KIND_LINEAR = 2
KIND_BUMP1D = 3
KIND_RADIAL = 4
KIND_MLP = 5

ACT_RELU = 0
ACT_TANH = 1

_EMPTY_F = np.zeros(0, dtype=np.float64)
_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_M = np.zeros((1, 1), dtype=np.float64)


class PackedField(NamedTuple):
    kind: int
    dim: int
    scale: float
    vec: np.ndarray     # constant value / bump params / radial radii
    mat: np.ndarray     # linear or rotation generator matrix
    sizes: np.ndarray   # mlp layer widths, input first
    weights: np.ndarray  # mlp weights, row-major, concatenated
    biases: np.ndarray  # mlp biases, concatenated
    act: int


def pack_field(spec) -> PackedField:
    """Flatten a VectorFieldSpec into backend-ready arrays."""
    from ..field_zoo import Bump1D, Constant, Linear, Mlp, RadialRotation, Scaled, Zero

    scale = 1.0
    variant = spec.variant
    while isinstance(variant, Scaled):
        scale *= variant.factor
        variant = variant.inner.variant

    d = spec.dim
    if isinstance(variant, Zero):
        return PackedField(KIND_ZERO, d, scale, _EMPTY_F, _EMPTY_M, _EMPTY_I,
                           _EMPTY_F, _EMPTY_F, 0)
    if isinstance(variant, Constant):
        return PackedField(KIND_CONSTANT, d, scale,
                           np.ascontiguousarray(variant.value, dtype=np.float64),
                           _EMPTY_M, _EMPTY_I, _EMPTY_F, _EMPTY_F, 0)
    if isinstance(variant, Linear):
        return PackedField(KIND_LINEAR, d, scale, _EMPTY_F,
                           np.ascontiguousarray(variant.matrix, dtype=np.float64),
                           _EMPTY_I, _EMPTY_F, _EMPTY_F, 0)
    if isinstance(variant, Bump1D):
        params = np.array([variant.center, variant.width, variant.amplitude])
        return PackedField(KIND_BUMP1D, d, scale, params, _EMPTY_M, _EMPTY_I,
                           _EMPTY_F, _EMPTY_F, 0)
    if isinstance(variant, RadialRotation):
        radii = np.array([variant.r_inner, variant.r_outer])
        return PackedField(KIND_RADIAL, d, scale, radii,
                           np.ascontiguousarray(variant.matrix, dtype=np.float64),
                           _EMPTY_I, _EMPTY_F, _EMPTY_F, 0)
    if isinstance(variant, Mlp):
        p = variant.params
        sizes = np.asarray(p.widths, dtype=np.int64)
        weights = np.concatenate([w.ravel() for w in p.weights])
        biases = np.concatenate([b.ravel() for b in p.biases])
        act = ACT_RELU if p.activation == "relu" else ACT_TANH
        return PackedField(KIND_MLP, d, scale, _EMPTY_F, _EMPTY_M, sizes,
                           np.ascontiguousarray(weights),
                           np.ascontiguousarray(biases), act)
    raise TypeError(f"unsupported variant {type(variant).__name__}")


def negated(pf: PackedField) -> PackedField:
    """Field scaled by -1; used to integrate backwards in time."""
    return pf._replace(scale=-pf.scale)
