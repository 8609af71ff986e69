"""Invertible networks: an affine map after a chain of flow endpoints.

forward applies the endpoints in order and the affine map last;
inverse solves the affine part by LU and runs the endpoints backwards
in reverse order, so invertibility holds by construction up to solver
error.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DimensionMismatch, SingularAffine
from .field_zoo import operator_norm
from .flow_engine import (FlowEndpoint, endpoint_batch, endpoint_from_json,
                          endpoint_to_json, inverse_endpoint_batch)

_DET_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class AffineMap:
    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        b = np.array(self.b, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"matrix must be square, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionMismatch(f"bias shape {b.shape} does not match {w.shape}")
        sign, logdet = np.linalg.slogdet(w)
        if sign == 0.0 or np.exp(logdet) <= _DET_FLOOR:
            raise SingularAffine(f"|det W| <= {_DET_FLOOR}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.w.shape[0]


def identity_affine(dim: int) -> AffineMap:
    return AffineMap(np.eye(dim), np.zeros(dim))


def op_norm(affine) -> float:
    """Spectral norm of the linear part (power iteration)."""
    w = affine.w if isinstance(affine, AffineMap) else np.asarray(affine)
    return operator_norm(w)


@dataclass(frozen=True, eq=False)
class InnModel:
    endpoints: Tuple[FlowEndpoint, ...]
    affine: AffineMap

    def __post_init__(self):
        endpoints = tuple(self.endpoints)
        for ep in endpoints:
            if ep.dim != self.affine.dim:
                raise DimensionMismatch(
                    f"endpoint dim {ep.dim} does not match affine dim {self.affine.dim}")
        object.__setattr__(self, "endpoints", endpoints)

    @property
    def dim(self) -> int:
        return self.affine.dim


def forward_batch(model: InnModel, x: np.ndarray) -> np.ndarray:
    y = np.ascontiguousarray(x, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (n, {model.dim}) points, got {y.shape}")
    for ep in model.endpoints:
        y = endpoint_batch(ep, y)
    return y @ model.affine.w.T + model.affine.b


def forward(model: InnModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return forward_batch(model, x[None, :])[0]


def inverse_batch(model: InnModel, y: np.ndarray) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (n, {model.dim}) points, got {y.shape}")
    try:
        x = np.linalg.solve(model.affine.w, (y - model.affine.b).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularAffine(str(exc)) from exc
    for ep in reversed(model.endpoints):
        x = inverse_endpoint_batch(ep, x)
    return x


def inverse(model: InnModel, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    return inverse_batch(model, y[None, :])[0]


def model_to_json(model: InnModel) -> dict:
    return {
        "schema_version": 1,
        "affine": {"matrix": model.affine.w.tolist(),
                   "bias": model.affine.b.tolist()},
        "endpoints": [endpoint_to_json(ep) for ep in model.endpoints],
    }


def model_from_json(doc: dict) -> InnModel:
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    affine = AffineMap(np.array(doc["affine"]["matrix"]),
                       np.array(doc["affine"]["bias"]))
    endpoints = tuple(endpoint_from_json(e) for e in doc["endpoints"])
    return InnModel(endpoints, affine)
