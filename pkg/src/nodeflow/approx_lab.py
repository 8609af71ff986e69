"""Approximation machinery: sup norms on compacts and error budgets.

The central check: if f approximates a Lipschitz field F to within
delta in sup norm over an inflated compact K' that contains every
trajectory started in K, then the time-1 maps differ by at most
2*delta*e^L on K, where L bounds the Lipschitz constant of F. The
compact K' is built by sweeping K through the flow of F over [0,1]
and inflating the bounding box by 2*e^L per coordinate (a superset of
the Euclidean-ball inflation, hence still valid).

`approximate_composition` turns that endpoint bound into a full
pipeline: each stage of a composed target map is fitted by a trained
MLP field with a per-stage budget chosen so the transported errors
telescope below the requested total.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Tuple

import numpy as np

from .errors import BoundViolated, BudgetMissed, GridTooLarge, NonFiniteLoss
from .field_zoo import (MlpParams, VectorFieldSpec, closed_form_flow_batch,
                        eval_field_batch, has_closed_form, lipschitz_bound,
                        mlp_field)
from .flow_engine import FlowEndpoint
from .inn_model import AffineMap, InnModel, forward_batch, op_norm
from .ode_core import DEFAULT_SOLVER, SolverConfig, integrate_batch

_GRID_BUDGET = 10_000_000

BatchMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be equal-length vectors")
        if np.any(lo > hi):
            raise ValueError("need lower[i] <= upper[i]")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def cube(radius: float, dim: int, center: float = 0.0) -> Box:
    return Box(np.full(dim, center - radius), np.full(dim, center + radius))


def grid(box: Box, resolution: int) -> np.ndarray:
    """Uniform grid with `resolution` points per axis, corners included.

    Zero-width axes collapse to a single coordinate. Nested refinement
    (resolution -> 2*resolution - 1) keeps every coarse point, so sup
    estimates never decrease along that ladder.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2 points per axis")
    axes = []
    total = 1
    for lo, hi in zip(box.lower, box.upper):
        axis = np.array([lo]) if hi == lo else np.linspace(lo, hi, resolution)
        total *= len(axis)
        if total > _GRID_BUDGET:
            raise GridTooLarge(f"grid would exceed {_GRID_BUDGET} points")
        axes.append(axis)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sup_distance(f: BatchMap, g: BatchMap, box: Box, resolution: int) -> float:
    """Max Euclidean distance between f and g over the grid.

    A lower bound on the true sup over the box.
    """
    pts = grid(box, resolution)
    diff = np.asarray(f(pts)) - np.asarray(g(pts))
    return float(np.max(np.linalg.norm(diff, axis=1), initial=0.0))


def reach_box(field: VectorFieldSpec, box: Box, n_space: int = 9,
              n_time: int = 9, cfg: SolverConfig = DEFAULT_SOLVER) -> Box:
    """Bounding box of the flow of `box` over unit time.

    Sweeps a spatial grid through the time grid incrementally and
    tracks the coordinate-wise extremes.
    """
    if n_space < 2 or n_time < 2:
        raise ValueError("n_space and n_time must be >= 2")
    pts = grid(box, n_space)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    times = np.linspace(0.0, 1.0, n_time)
    current = pts
    for prev, now in zip(times[:-1], times[1:]):
        current = integrate_batch(field, current, float(now - prev), cfg)
        lo = np.minimum(lo, current.min(axis=0))
        hi = np.maximum(hi, current.max(axis=0))
    return Box(lo, hi)


def inflate(box: Box, margin: float) -> Box:
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return Box(box.lower - margin, box.upper + margin)


@dataclass(frozen=True)
class ApproxReport:
    delta: float                 # measured sup_{K'} |F - f|
    lip_f: float                 # certified Lipschitz bound of the target
    gronwall_bound: float        # 2 * delta * e^lip_f
    endpoint_sup_error: float    # measured sup_K |phi_F(.,1) - phi_f(.,1)|
    grid_resolution: int
    slack: float                 # solver allowance: 1e-5 + 1e-3 * delta
    bound_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lip_f": self.lip_f,
            "gronwall_bound": self.gronwall_bound,
            "endpoint_sup_error": self.endpoint_sup_error,
            "grid_resolution": self.grid_resolution,
            "slack": self.slack,
            "bound_satisfied": self.bound_satisfied,
        }


def _endpoint_map(field: VectorFieldSpec, cfg: SolverConfig) -> BatchMap:
    return lambda pts: integrate_batch(field, pts, 1.0, cfg)


def gronwall_compact(target: VectorFieldSpec, box: Box,
                     cfg: SolverConfig = DEFAULT_SOLVER, n_space: int = 9,
                     n_time: int = 9) -> Box:
    """The compact K' on which the field approximation must hold: the
    unit-time sweep of the box, inflated by 2*e^L per coordinate."""
    lip = lipschitz_bound(target)
    swept = reach_box(target, box, n_space=n_space, n_time=n_time, cfg=cfg)
    return inflate(swept, 2.0 * math.exp(lip))


def gronwall_verify(target: VectorFieldSpec, approx: VectorFieldSpec, box: Box,
                    resolution: int = 17, cfg: SolverConfig = DEFAULT_SOLVER,
                    n_space: int = 9, n_time: int = 9) -> ApproxReport:
    """Measure the endpoint error bound 2*delta*e^L and assert it.

    Raises BoundViolated (report attached) when the measured endpoint
    error exceeds the bound plus solver slack, which signals a solver
    accuracy problem or an invalid Lipschitz bound.
    """
    lip = lipschitz_bound(target)
    enlarged = gronwall_compact(target, box, cfg=cfg, n_space=n_space,
                                n_time=n_time)
    delta = sup_distance(lambda p: eval_field_batch(target, p),
                         lambda p: eval_field_batch(approx, p),
                         enlarged, resolution)
    err = sup_distance(_endpoint_map(target, cfg), _endpoint_map(approx, cfg),
                       box, resolution)
    bound = 2.0 * delta * math.exp(lip)
    slack = 1e-5 + 1e-3 * delta
    report = ApproxReport(delta=delta, lip_f=lip, gronwall_bound=bound,
                          endpoint_sup_error=err, grid_resolution=resolution,
                          slack=slack, bound_satisfied=err <= bound + slack)
    if not report.bound_satisfied:
        raise BoundViolated(
            f"endpoint error {err:.3e} exceeds bound {bound:.3e} + slack {slack:.3e}",
            report)
    return report


# ---------------------------------------------------------------------------
# MLP field fitting

@dataclass(frozen=True)
class TrainConfig:
    sample_count: int = 4096
    epoch_count: int = 500
    batch_size: int = 128
    learning_rate: float = 1e-2
    seed: int = 7
    hidden: Tuple[int, ...] = (16,)
    activation: str = "tanh"

    def __post_init__(self):
        if min(self.sample_count, self.epoch_count, self.batch_size) < 1:
            raise ValueError("sample/epoch/batch counts must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class FitReport:
    delta: float
    final_loss: float
    grid_resolution: int
    epochs: int
    sample_count: int

    def to_dict(self) -> dict:
        return {"delta": self.delta, "final_loss": self.final_loss,
                "grid_resolution": self.grid_resolution,
                "epochs": self.epochs, "sample_count": self.sample_count}


def _forward_layers(x, weights, biases, activation):
    h = x
    pre = []
    acts = [x]
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        pre.append(z)
        if i < len(weights) - 1:
            h = np.maximum(z, 0.0) if activation == "relu" else np.tanh(z)
        else:
            h = z
        acts.append(h)
    return pre, acts


_MOMENTUM = 0.9


def fit_field(target: BatchMap, box: Box, tc: TrainConfig = TrainConfig(),
              ) -> Tuple[VectorFieldSpec, FitReport]:
    """Fit an MLP field to `target` on the box by seeded minibatch SGD.

    The loss is the mean squared field error over uniform samples,
    minimized with momentum 0.9. Targets are normalized to unit range
    during the run and the scale is folded back into the linear output
    layer afterwards, so the step size works at any field amplitude.
    The returned delta is the sup error measured afterwards on a grid
    about twice as fine as the sampling density. No accuracy is
    guaranteed -- the report states what this budget achieved.
    """
    d = box.dim
    rng = np.random.default_rng(tc.seed)
    widths = (d, *tc.hidden, d)
    weights = [rng.standard_normal((widths[i + 1], widths[i]))
               * math.sqrt(2.0 / (widths[i] + widths[i + 1]))
               for i in range(len(widths) - 1)]
    # zero-init output layer: the net starts as the zero field and the
    # hidden features stay at their random init until the head moves
    weights[-1] = np.zeros_like(weights[-1])
    biases = [np.zeros(widths[i + 1]) for i in range(len(widths) - 1)]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    span = box.upper - box.lower
    x_train = box.lower + rng.random((tc.sample_count, d)) * span
    y_raw = np.asarray(target(x_train), dtype=np.float64)
    scale = max(float(np.max(np.abs(y_raw), initial=0.0)), 1e-300)
    y_train = y_raw / scale

    loss = math.inf
    for _ in range(tc.epoch_count):
        order = rng.permutation(tc.sample_count)
        for start in range(0, tc.sample_count, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            pre, acts = _forward_layers(xb, weights, biases, tc.activation)
            resid = acts[-1] - yb
            loss = float(np.mean(np.sum(resid * resid, axis=1)))
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"training diverged (loss={loss})")
            grad = 2.0 * resid / xb.shape[0]
            for layer in range(len(weights) - 1, -1, -1):
                gw = grad.T @ acts[layer]
                gb = grad.sum(axis=0)
                if layer > 0:
                    grad = grad @ weights[layer]
                    z = pre[layer - 1]
                    if tc.activation == "relu":
                        grad = grad * (z > 0.0)
                    else:
                        t = np.tanh(z)
                        grad = grad * (1.0 - t * t)
                vel_w[layer] = _MOMENTUM * vel_w[layer] - tc.learning_rate * gw
                vel_b[layer] = _MOMENTUM * vel_b[layer] - tc.learning_rate * gb
                weights[layer] = weights[layer] + vel_w[layer]
                biases[layer] = biases[layer] + vel_b[layer]

    weights[-1] = weights[-1] * scale
    biases[-1] = biases[-1] * scale
    params = MlpParams(widths, tuple(weights), tuple(biases), tc.activation)
    fitted = mlp_field(params)
    res = _fit_eval_resolution(tc.sample_count, d)
    delta = sup_distance(target, lambda p: eval_field_batch(fitted, p), box, res)
    return fitted, FitReport(delta=delta, final_loss=loss * scale * scale,
                             grid_resolution=res, epochs=tc.epoch_count,
                             sample_count=tc.sample_count)


def _fit_eval_resolution(sample_count: int, dim: int) -> int:
    res = 2 * math.ceil(sample_count ** (1.0 / dim)) + 1
    while res ** dim > 300_000 and res > 3:
        res = res // 2 + 1
    return max(res, 3)


# ---------------------------------------------------------------------------
# composition pipeline

@dataclass(frozen=True)
class StageReport:
    index: int
    budget: float                # endpoint error budget for this stage
    required_delta: float        # field budget: budget / (2 e^L)
    achieved_delta: float        # measured field error on the fit compact
    lip_field: float             # certified bound for the stage field
    lip_endpoint: float          # measured Lipschitz bound of the true endpoint
    endpoint_error: float        # measured sup error at transported points
    gronwall: ApproxReport

    def to_dict(self) -> dict:
        return {"index": self.index, "budget": self.budget,
                "required_delta": self.required_delta,
                "achieved_delta": self.achieved_delta,
                "lip_field": self.lip_field,
                "lip_endpoint": self.lip_endpoint,
                "endpoint_error": self.endpoint_error,
                "gronwall": self.gronwall.to_dict()}


@dataclass(frozen=True)
class CompositionReport:
    stages: Tuple[StageReport, ...]
    eps: float
    final_error: float           # sup_K |W o g_k..g_1 - model|
    telescoped_bound: float      # opnorm(W) * sum of transported stage errors
    op_norm_w: float
    within_eps: bool
    telescoping_holds: bool

    def to_dict(self) -> dict:
        return {"stages": [s.to_dict() for s in self.stages], "eps": self.eps,
                "final_error": self.final_error,
                "telescoped_bound": self.telescoped_bound,
                "op_norm_w": self.op_norm_w, "within_eps": self.within_eps,
                "telescoping_holds": self.telescoping_holds}


def _true_endpoint_map(field: VectorFieldSpec, cfg: SolverConfig) -> BatchMap:
    if has_closed_form(field):
        return lambda pts: closed_form_flow_batch(field, pts, 1.0)
    return _endpoint_map(field, cfg)


def _image_box(points: np.ndarray) -> Box:
    return Box(points.min(axis=0), points.max(axis=0))


def _measured_endpoint_lipschitz(fn: BatchMap, box: Box, rng,
                                 n_pairs: int = 2000) -> float:
    d = box.dim
    span = box.upper - box.lower
    a = box.lower + rng.random((n_pairs, d)) * span
    b = box.lower + rng.random((n_pairs, d)) * span
    gap = np.linalg.norm(a - b, axis=1)
    keep = gap > 1e-9
    quot = np.linalg.norm(fn(a[keep]) - fn(b[keep]), axis=1) / gap[keep]
    return float(np.max(quot, initial=0.0))


def approximate_composition(stages: Sequence[VectorFieldSpec], affine: AffineMap,
                            box: Box, eps: float,
                            tc: TrainConfig = TrainConfig(),
                            cfg: SolverConfig = DEFAULT_SOLVER,
                            resolution: int = 33,
                            ) -> Tuple[InnModel, CompositionReport]:
    """Fit one MLP field per stage and compose them below a sup budget.

    Stage j receives the endpoint budget
        eps_j = eps / (opnorm(W) * k * prod_{i>j} (L_i + 1)),
    with L_i a measured Lipschitz bound of the true stage endpoint, so
    the transported errors telescope below eps. Each stage field is
    fitted on its own inflated reach compact to the delta that the
    endpoint bound requires; a stage that misses its budget raises
    BudgetMissed with all achieved deltas.
    """
    if not stages:
        raise ValueError("need at least one stage")
    if eps <= 0:
        raise ValueError("eps must be positive")
    k = len(stages)
    rng = np.random.default_rng(tc.seed ^ 0x5EED)
    w_norm = op_norm(affine)

    true_maps = [_true_endpoint_map(f, cfg) for f in stages]

    # intermediate compacts: push the box grid through the true stages,
    # inflating by the full budget so approximate trajectories stay inside
    base_pts = grid(box, resolution)
    stage_boxes = []
    lip_endpoints = []
    pts = base_pts
    for j in range(k):
        kbox = inflate(_image_box(pts), eps) if j else box
        stage_boxes.append(kbox)
        lip_endpoints.append(_measured_endpoint_lipschitz(true_maps[j], kbox, rng))
        pts = true_maps[j](pts)

    budgets = []
    for j in range(k):
        transport = 1.0
        for i in range(j + 1, k):
            transport *= lip_endpoints[i] + 1.0
        budgets.append(eps / (w_norm * k * transport))

    fitted_fields = []
    achieved = []
    required = []
    for j, field in enumerate(stages):
        lip_f = lipschitz_bound(field)
        need = budgets[j] / (2.0 * math.exp(lip_f))
        enlarged = gronwall_compact(field, stage_boxes[j], cfg=cfg)
        stage_tc = replace(tc, seed=tc.seed + j)
        fitted, fit_rep = fit_field(lambda p, f=field: eval_field_batch(f, p),
                                    enlarged, stage_tc)
        fitted_fields.append(fitted)
        achieved.append(fit_rep.delta)
        required.append(need)
    missed = [j for j in range(k) if achieved[j] > required[j]]
    if missed:
        raise BudgetMissed(
            f"stages {missed} missed their field budgets "
            f"(achieved {[f'{a:.2e}' for a in achieved]}, "
            f"required {[f'{r:.2e}' for r in required]})", achieved)

    model = InnModel(tuple(FlowEndpoint(f, cfg) for f in fitted_fields), affine)

    # telescoping audit on the box grid: transported true points vs
    # transported approximate points, stage by stage
    approx_maps = [_endpoint_map(f, cfg) for f in fitted_fields]
    true_pts = base_pts
    approx_pts = base_pts
    stage_reports = []
    stage_errors = []
    for j in range(k):
        next_true = true_maps[j](true_pts)
        next_approx = approx_maps[j](approx_pts)
        true_at_approx = true_maps[j](approx_pts)
        # stage error at the points the model actually visits
        stage_err = float(np.max(np.linalg.norm(
            true_at_approx - next_approx, axis=1), initial=0.0))
        # fold the audited pair stretches into the measured endpoint bound
        # so the telescoping inequality is exact over this grid
        gaps = np.linalg.norm(true_pts - approx_pts, axis=1)
        keep = gaps > 1e-14
        if np.any(keep):
            stretch = np.linalg.norm(next_true - true_at_approx, axis=1)
            lip_endpoints[j] = max(lip_endpoints[j],
                                   float(np.max(stretch[keep] / gaps[keep])))
        stage_errors.append(stage_err)
        gron = gronwall_verify(stages[j], fitted_fields[j], stage_boxes[j],
                               resolution=min(resolution, 21), cfg=cfg)
        stage_reports.append((stage_err, gron))
        true_pts = next_true
        approx_pts = next_approx

    final_error = float(np.max(np.linalg.norm(
        (true_pts @ affine.w.T) - (approx_pts @ affine.w.T), axis=1), initial=0.0))
    telescoped = 0.0
    for j in range(k):
        transport = 1.0
        for i in range(j + 1, k):
            transport *= lip_endpoints[i]
        telescoped += stage_errors[j] * transport
    telescoped *= w_norm

    reports = tuple(
        StageReport(index=j, budget=budgets[j], required_delta=required[j],
                    achieved_delta=achieved[j],
                    lip_field=lipschitz_bound(stages[j]),
                    lip_endpoint=lip_endpoints[j],
                    endpoint_error=stage_errors[j], gronwall=stage_reports[j][1])
        for j in range(k))
    report = CompositionReport(
        stages=reports, eps=eps, final_error=final_error,
        telescoped_bound=telescoped, op_norm_w=w_norm,
        within_eps=final_error < eps,
        telescoping_holds=final_error <= telescoped * (1.0 + 1e-9) + 1e-12)
    return model, report
