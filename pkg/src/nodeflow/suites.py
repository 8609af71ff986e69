"""The six verification suites behind `nodeflow run`.

Every suite is a pure function of its config: fixed field constants,
seeded randomness, and deterministic reductions, so reruns produce
byte-identical CSV rows. Suites return their rows, a JSON-ready case
list, an overall pass flag, and an optional SVG chart payload.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import field_zoo as fz
from . import norm_lab as nl
from .approx_lab import (Box, TrainConfig, cube, fit_field, gronwall_compact,
                         gronwall_verify, approximate_composition)
from .errors import BoundViolated, BudgetMissed, ConfigInvalid
from .flow_engine import (FlowEndpoint, endpoint_batch, group_law_residual,
                          inverse_endpoint_batch, rescale_residual,
                          support_fixed_check)
from .inn_model import AffineMap
from .ode_core import DEFAULT_SOLVER, SolverConfig

GROUP_LAW_TOL = 1e-6
INVERSE_TOL = 1e-6
RESCALE_TOL = 1e-6


@dataclass
class SuiteResult:
    suite: str
    header: Sequence[str]
    rows: List[tuple]
    cases: list
    passed: bool
    checks: dict
    svg: Optional[dict] = None


def _parallel(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# the analytic zoo (fixed constants shared by suites and tests)

_CONSTS = {1: [0.7], 2: [0.7, -0.4], 3: [0.7, -0.4, 0.2]}
_LINEARS = {
    1: [[-0.5]],
    2: [[0.0, 1.0], [-1.0, 0.0]],
    3: [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.3], [0.0, -0.3, 0.0]],
}


def analytic_zoo() -> List[tuple]:
    """(name, field) pairs covering every analytic variant in d = 1, 2, 3."""
    fields = []
    for d in (1, 2, 3):
        fields.append((f"zero_d{d}", fz.zero(d)))
        fields.append((f"constant_d{d}", fz.constant(_CONSTS[d])))
        fields.append((f"linear_d{d}", fz.linear(_LINEARS[d])))
    fields.append(("bump1d", fz.bump1d(0.0, 1.0, 1.0)))
    for d in (2, 3):
        fields.append((f"radial_d{d}", fz.radial_rotation(
            fz.rotation_generator(d), 1.0, 2.0)))
    return fields


def compactly_supported_zoo() -> List[tuple]:
    zoo = dict(analytic_zoo())
    return [(n, zoo[n]) for n in ("bump1d", "radial_d2", "radial_d3")]


def points_outside_support(field: fz.VectorFieldSpec, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Sample points strictly outside the declared support."""
    base = field.variant
    while isinstance(base, fz.Scaled):
        base = base.inner.variant
    if isinstance(base, fz.Bump1D):
        edge = base.width * 1.05
        offs = edge + 3.0 * rng.random(count)
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return (base.center + signs * offs)[:, None]
    d = field.dim
    dirs = rng.standard_normal((count, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.where(rng.random(count) < 0.3,
                     base.r_inner * (0.2 + 0.7 * rng.random(count)),
                     base.r_outer * (1.05 + 2.0 * rng.random(count)))
    return dirs * radii[:, None]


def _solver_from(doc: Optional[dict]) -> SolverConfig:
    if not doc:
        return DEFAULT_SOLVER
    return SolverConfig(
        method=doc.get("method", DEFAULT_SOLVER.method),
        step_count=doc.get("step_count", DEFAULT_SOLVER.step_count),
        rel_tol=doc.get("rel_tol", DEFAULT_SOLVER.rel_tol),
        abs_tol=doc.get("abs_tol", DEFAULT_SOLVER.abs_tol),
        max_steps=doc.get("max_steps", DEFAULT_SOLVER.max_steps),
    )


def _train_from(doc: Optional[dict], base: TrainConfig) -> TrainConfig:
    if not doc:
        return base
    return TrainConfig(
        sample_count=doc.get("sample_count", base.sample_count),
        epoch_count=doc.get("epoch_count", base.epoch_count),
        batch_size=doc.get("batch_size", base.batch_size),
        learning_rate=doc.get("learning_rate", base.learning_rate),
        seed=doc.get("seed", base.seed),
        hidden=tuple(doc.get("hidden", base.hidden)),
        activation=doc.get("activation", base.activation),
    )


# ---------------------------------------------------------------------------
# suite: flow_axioms

def run_flow_axioms(config: dict, threads: int = 1) -> SuiteResult:
    seed = config.get("seed", 2024)
    samples = config.get("samples", 100)
    cfg = _solver_from(config.get("solver"))
    rows = []
    cases = []

    def one_field(item):
        name, field = item
        rng = np.random.default_rng((seed, name.encode()))
        d = field.dim
        xs = rng.uniform(-2.0, 2.0, size=(samples, d))
        sts = rng.uniform(-1.0, 1.0, size=(samples, 2))
        g_res = max(group_law_residual(field, xs[i], sts[i, 0], sts[i, 1], cfg)
                    for i in range(samples))
        ep = FlowEndpoint(field, cfg)
        fwd = endpoint_batch(ep, xs)
        back = inverse_endpoint_batch(ep, fwd)
        inv_res = float(np.max(np.linalg.norm(back - xs, axis=1)))
        out = [(name, d, "group_law", samples, g_res, GROUP_LAW_TOL),
               (name, d, "inverse_roundtrip", samples, inv_res, INVERSE_TOL)]
        base = field.variant
        if isinstance(base, (fz.Bump1D, fz.RadialRotation)):
            pts = points_outside_support(field, samples, rng)
            disp = support_fixed_check(field, pts, cfg)
            out.append((name, d, "support_fixed", samples, disp, 0.0))
        return out

    results = _parallel(one_field, analytic_zoo(), threads)
    case_id = 0
    passed = True
    for group in results:
        for name, d, check, n, residual, tol in group:
            ok = residual <= tol
            passed &= ok
            rows.append((case_id, name, d, check, n, residual, tol, ok))
            cases.append({"case_id": case_id, "field": name, "dim": d,
                          "check": check, "max_residual": residual,
                          "threshold": tol, "passed": ok})
            case_id += 1
    header = ("case_id", "field", "dim", "check", "samples", "max_residual",
              "threshold", "passed")
    return SuiteResult("flow_axioms", header, rows, cases, passed,
                       {"samples_per_case": samples})


# ---------------------------------------------------------------------------
# suite: gronwall

_QUICK_TRAIN = TrainConfig(sample_count=2048, epoch_count=300, batch_size=128,
                           learning_rate=2e-2, seed=7, hidden=(24,),
                           activation="tanh")


def analytic_perturbation_pairs() -> List[tuple]:
    """(name, target, approx, box) pairs with analytically known fields."""
    pairs = []
    eye2 = np.eye(2)
    rot2 = np.array(_LINEARS[2], dtype=float)
    rot3 = np.array(_LINEARS[3], dtype=float)
    pairs.append(("zero_vs_small_const_d1", fz.zero(1),
                  fz.constant([0.05]), cube(1.0, 1)))
    pairs.append(("const_vs_const_d1", fz.constant([0.3]),
                  fz.constant([0.34]), cube(1.0, 1)))
    pairs.append(("linear_vs_linear_d1", fz.linear([[-0.4]]),
                  fz.linear([[-0.37]]), cube(1.0, 1)))
    pairs.append(("bump_vs_scaled_bump", fz.bump1d(0.0, 1.0, 1.0),
                  fz.bump1d(0.0, 1.0, 1.08), cube(1.5, 1)))
    pairs.append(("bump_vs_zero", fz.bump1d(0.0, 1.0, 1.0),
                  fz.zero(1), cube(1.5, 1)))
    pairs.append(("bump_vs_shifted_bump", fz.bump1d(0.0, 1.0, 1.0),
                  fz.bump1d(0.05, 1.0, 1.0), cube(1.5, 1)))
    pairs.append(("const_vs_const_d2", fz.constant(_CONSTS[2]),
                  fz.constant([0.74, -0.42]), cube(1.0, 2)))
    pairs.append(("rotation_vs_rotation_d2", fz.linear(rot2),
                  fz.linear(rot2 + 0.03 * eye2), cube(1.0, 2)))
    pairs.append(("rotation_vs_self_d2", fz.linear(rot2),
                  fz.linear(rot2.copy()), cube(1.0, 2)))
    pairs.append(("radial_vs_scaled_radial_d2",
                  fz.radial_rotation(fz.rotation_generator(2), 1.0, 2.0),
                  fz.scaled(1.05, fz.radial_rotation(
                      fz.rotation_generator(2), 1.0, 2.0)), cube(2.2, 2)))
    pairs.append(("radial_vs_zero_d2",
                  fz.radial_rotation(fz.rotation_generator(2), 1.0, 2.0),
                  fz.zero(2), cube(2.2, 2)))
    pairs.append(("radial_vs_wider_radial_d2",
                  fz.radial_rotation(fz.rotation_generator(2), 1.0, 2.0),
                  fz.radial_rotation(fz.rotation_generator(2), 0.95, 2.0),
                  cube(2.2, 2)))
    pairs.append(("scaled_linear_vs_linear_d2",
                  fz.scaled(0.5, fz.linear(rot2)),
                  fz.linear(0.52 * rot2), cube(1.0, 2)))
    pairs.append(("const_vs_const_d3", fz.constant(_CONSTS[3]),
                  fz.constant([0.72, -0.44, 0.23]), cube(1.0, 3)))
    pairs.append(("linear_vs_linear_d3", fz.linear(rot3),
                  fz.linear(rot3 + 0.02 * np.eye(3)), cube(1.0, 3)))
    pairs.append(("radial_vs_scaled_radial_d3",
                  fz.radial_rotation(fz.rotation_generator(3), 1.0, 2.0),
                  fz.scaled(0.96, fz.radial_rotation(
                      fz.rotation_generator(3), 1.0, 2.0)), cube(2.2, 3)))
    pairs.append(("zero_vs_small_const_d3", fz.zero(3),
                  fz.constant([0.02, -0.01, 0.03]), cube(1.0, 3)))
    return pairs


def trained_pair_targets() -> List[tuple]:
    return [
        ("trained_zero_d1", fz.zero(1), cube(1.0, 1)),
        ("trained_const_d2", fz.constant(_CONSTS[2]), cube(1.0, 2)),
        ("trained_bump_d1", fz.bump1d(0.0, 1.0, 1.0), cube(1.5, 1)),
        ("trained_radial_d2",
         fz.radial_rotation(fz.rotation_generator(2), 1.0, 2.0), cube(1.8, 2)),
    ]


def build_gronwall_pairs(train: TrainConfig = _QUICK_TRAIN,
                         include_trained: bool = True,
                         cfg: SolverConfig = DEFAULT_SOLVER) -> List[tuple]:
    pairs = analytic_perturbation_pairs()
    if include_trained:
        for i, (name, target, box) in enumerate(trained_pair_targets()):
            compact = gronwall_compact(target, box, cfg=cfg)
            fitted, _ = fit_field(
                lambda p, f=target: fz.eval_field_batch(f, p), compact,
                replace(train, seed=train.seed + i))
            pairs.append((name, target, fitted, box))
    return pairs


def _resolution_for(dim: int, resolution: int) -> int:
    # keep endpoint grids affordable in higher dimension
    if dim >= 3:
        return min(resolution, 9)
    return resolution


def run_gronwall(config: dict, threads: int = 1) -> SuiteResult:
    resolutions = config.get("resolutions", [9, 17])
    include_trained = config.get("include_trained", True)
    cfg = _solver_from(config.get("solver"))
    train = _train_from(config.get("train"), _QUICK_TRAIN)
    pairs = build_gronwall_pairs(train, include_trained, cfg)

    def one(item):
        name, target, approx, box = item
        out = []
        for res in resolutions:
            res_d = _resolution_for(target.dim, res)
            try:
                rep = gronwall_verify(target, approx, box, resolution=res_d,
                                      cfg=cfg)
            except BoundViolated as exc:
                rep = exc.report
            out.append((name, target.dim, res_d, rep))
        return out

    results = _parallel(one, pairs, threads)
    rows, cases = [], []
    passed = True
    case_id = 0
    for group in results:
        for name, d, res, rep in group:
            passed &= rep.bound_satisfied
            rows.append((case_id, name, d, res, rep.delta, rep.lip_f,
                         rep.gronwall_bound, rep.endpoint_sup_error, rep.slack,
                         rep.bound_satisfied))
            cases.append({"case_id": case_id, "pair": name, "dim": d,
                          **rep.to_dict()})
            case_id += 1
    header = ("case_id", "pair", "dim", "resolution", "delta", "lip_bound",
              "gronwall_bound", "endpoint_sup_error", "slack", "passed")
    svg = None
    if len(resolutions) > 1 and results:
        first = results[0]
        svg = {
            "title": "endpoint error vs grid resolution",
            "xlabel": "resolution (points per axis)",
            "ylabel": "sup error",
            "series": [
                ("measured", [float(r) for _, _, r, _ in first],
                 [rep.endpoint_sup_error for _, _, _, rep in first]),
                ("bound+slack", [float(r) for _, _, r, _ in first],
                 [rep.gronwall_bound + rep.slack for _, _, _, rep in first]),
            ],
        }
    return SuiteResult("gronwall", header, rows, cases, passed,
                       {"pair_count": len(pairs),
                        "violations": sum(1 for r in rows if not r[-1])}, svg)


# ---------------------------------------------------------------------------
# suite: fit

def run_fit(config: dict, threads: int = 1) -> SuiteResult:
    if "dimension" not in config:
        raise ConfigInvalid("dimension", "required for the fit suite")
    d = config["dimension"]
    if not isinstance(d, int) or d < 1:
        raise ConfigInvalid("dimension", "must be a positive integer")
    train = _train_from(config.get("train"), TrainConfig())
    cfg = _solver_from(config.get("solver"))
    box = cube(config.get("box_radius", 1.0), d)

    targets = [
        ("zero", fz.zero(d), box, 1e-2),
        ("constant", fz.constant([0.3] + [-0.2] * (d - 1)), box, 1e-2),
    ]
    if d == 1:
        targets.append(("bump1d", fz.bump1d(0.0, 1.0, 1.0), cube(1.5, 1), None))

    def one(item):
        name, target, tbox, threshold = item
        fitted, rep = fit_field(
            lambda p, f=target: fz.eval_field_batch(f, p), tbox, train)
        gron = None
        if threshold is None:
            try:
                gron = gronwall_verify(target, fitted, tbox, resolution=17,
                                       cfg=cfg)
                ok = gron.bound_satisfied
            except BoundViolated as exc:
                gron, ok = exc.report, False
        else:
            ok = rep.delta <= threshold
        return name, target.dim, rep, threshold, ok, gron

    results = _parallel(one, targets, threads)
    rows, cases = [], []
    passed = True
    for case_id, (name, dim, rep, threshold, ok, gron) in enumerate(results):
        passed &= ok
        rows.append((case_id, name, dim, rep.sample_count, rep.epochs,
                     rep.delta, "" if threshold is None else threshold, ok))
        case = {"case_id": case_id, "target": name, "dim": dim,
                **rep.to_dict(), "threshold": threshold, "passed": ok}
        if gron is not None:
            case["gronwall"] = gron.to_dict()
        cases.append(case)
    header = ("case_id", "target", "dim", "sample_count", "epochs", "delta",
              "threshold", "passed")
    return SuiteResult("fit", header, rows, cases, passed,
                       {"train_seed": train.seed})


# ---------------------------------------------------------------------------
# suite: compose

COMPOSE_TRAIN = TrainConfig(sample_count=8192, epoch_count=1500,
                            batch_size=128, learning_rate=0.1, seed=7,
                            hidden=(32, 32), activation="tanh")


def compose_demo_stages() -> List[fz.VectorFieldSpec]:
    """Canonical two-stage target: bounded rotation, then a shift."""
    return [
        fz.radial_rotation(fz.rotation_generator(2), 1.0, 2.0),
        fz.constant([0.3, -0.2]),
    ]


def compose_demo_affine() -> AffineMap:
    # operator norm exactly 2
    return AffineMap([[2.0, 0.0], [0.0, 1.0]], [0.25, -0.1])


def run_compose(config: dict, threads: int = 1) -> SuiteResult:
    if "dimension" not in config:
        raise ConfigInvalid("dimension", "required for the compose suite")
    if config["dimension"] != 2:
        raise ConfigInvalid("dimension", "the composition demo is built in d=2")
    eps = config.get("eps", 0.1)
    box = cube(config.get("box_radius", 1.5), 2)
    resolution = config.get("resolution", 33)
    train = _train_from(config.get("train"), COMPOSE_TRAIN)
    cfg = _solver_from(config.get("solver"))

    stages = compose_demo_stages()
    affine = compose_demo_affine()
    budget_note = ""
    try:
        model, rep = approximate_composition(stages, affine, box, eps, train,
                                             cfg, resolution)
        ok = rep.within_eps and rep.telescoping_holds
    except BudgetMissed as exc:
        raise  # no report to salvage; the caller sees the stage deltas
    rows, cases = [], []
    stage_names = ["radial_rotation", "constant_shift"]
    for s in rep.stages:
        rows.append((s.index, "stage", stage_names[s.index], s.budget,
                     s.required_delta, s.achieved_delta, s.endpoint_error,
                     s.lip_endpoint, s.gronwall.gronwall_bound,
                     s.gronwall.bound_satisfied))
        cases.append({"kind": "stage", "name": stage_names[s.index],
                      **s.to_dict()})
    rows.append((len(rep.stages), "final", "composition", rep.eps, "", "",
                 rep.final_error, rep.op_norm_w, rep.telescoped_bound, ok))
    cases.append({"kind": "final", **rep.to_dict()})
    header = ("case_id", "kind", "name", "budget", "required_delta",
              "achieved_delta", "endpoint_error", "lip_endpoint",
              "telescoped_or_gronwall_bound", "passed")
    checks = {"final_error": rep.final_error, "eps": eps,
              "within_eps": rep.within_eps,
              "telescoping_holds": rep.telescoping_holds,
              "telescoped_bound": rep.telescoped_bound}
    return SuiteResult("compose", header, rows, cases, ok, checks)


# ---------------------------------------------------------------------------
# suite: rescale

def run_rescale(config: dict, threads: int = 1) -> SuiteResult:
    seed = config.get("seed", 2024)
    t_values = config.get("t_values", [-2.0, -0.5, 0.5, 2.0, 10.0])
    points = config.get("points", 5)
    cfg = _solver_from(config.get("solver"))
    fields = [(n, f) for n, f in analytic_zoo()
              if not isinstance(f.variant, fz.Zero)]

    def one(item):
        name, field = item
        rng = np.random.default_rng((seed, name.encode()))
        xs = rng.uniform(-2.0, 2.0, size=(points, field.dim))
        out = []
        for t in t_values:
            res = max(rescale_residual(field, x, t, cfg) for x in xs)
            out.append((name, field.dim, t, res))
        return out

    results = _parallel(one, fields, threads)
    rows, cases = [], []
    passed = True
    case_id = 0
    for group in results:
        for name, d, t, res in group:
            ok = res <= RESCALE_TOL
            passed &= ok
            rows.append((case_id, name, d, t, res, RESCALE_TOL, ok))
            cases.append({"case_id": case_id, "field": name, "dim": d,
                          "t": t, "residual": res, "passed": ok})
            case_id += 1
    header = ("case_id", "field", "dim", "t", "residual", "threshold", "passed")
    return SuiteResult("rescale", header, rows, cases, passed,
                       {"t_values": list(t_values)})


# ---------------------------------------------------------------------------
# suite: normcmp

def run_normcmp(config: dict, threads: int = 1) -> SuiteResult:
    l1_deltas = config.get("l1_deltas", [1e-2, 1e-4, 1e-6])
    ladder = config.get("ladder_deltas", [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    exhibit_n = config.get("exhibit_n", 17)
    exhibit_delta = config.get("exhibit_delta", 1e-20)
    exhibit_p = config.get("exhibit_p", 1.25)

    rows = []
    checks = {}

    # L^1 quadrature against the term-wise analytic value
    l1_quads, l1_oracle = [], []
    for d in l1_deltas:
        quad = nl.lp_norm(lambda x: nl.h_abs(x), 1.0, d, 1.0 - d)
        oracle = nl.h_l1_termwise(d, 1.0 - d)
        l1_quads.append(quad)
        l1_oracle.append(oracle)
        rows.append((1.0, d, quad, "", ""))
    l1_err = max(abs(q - o) for q, o in zip(l1_quads, l1_oracle))
    checks["l1_quad_vs_termwise_max_err"] = l1_err
    checks["l1_matches_termwise"] = l1_err <= 5e-3
    checks["l1_below_total_mass"] = all(q <= nl.H_L1_FULL for q in l1_quads)
    checks["l1_monotone_in_delta"] = all(
        a < b for a, b in zip(l1_quads, l1_quads[1:]))

    # divergence ladders
    ladders = {}
    for p in (1.5, 2.0):
        vals = nl.divergence_probe(p, ladder)
        ladders[p] = vals
        for d, v in zip(ladder, vals):
            rows.append((p, d, v, "", ""))
    checks["ladder_p15_strictly_increasing"] = all(
        a < b for a, b in zip(ladders[1.5], ladders[1.5][1:]))
    checks["ladder_p20_strictly_increasing"] = all(
        a < b for a, b in zip(ladders[2.0], ladders[2.0][1:]))
    checks["ladder_p15_growth"] = ladders[1.5][-1] / ladders[1.5][0]
    checks["ladder_p20_growth"] = ladders[2.0][-1] / ladders[2.0][0]
    growth15 = [b / a for a, b in zip(ladders[1.5], ladders[1.5][1:])]
    growth20 = [b / a for a, b in zip(ladders[2.0], ladders[2.0][1:])]
    checks["p20_dominates_p15_growth"] = all(
        g2 > g1 for g1, g2 in zip(growth15, growth20))

    # the (N, delta) witness: identity approximated in L^1 on the whole
    # interval yet far away in L^p on a slightly trimmed one
    l1_gap = nl.l1_gap_full_interval(exhibit_n)
    lp_gap = nl.gn_gap(exhibit_n, exhibit_p, exhibit_delta, 1.0 - exhibit_delta)
    rows.append((1.0, "", nl.H_L1_FULL, exhibit_n, l1_gap))
    rows.append((exhibit_p, exhibit_delta, lp_gap * exhibit_n, exhibit_n, lp_gap))
    checks["exhibit_n"] = exhibit_n
    checks["exhibit_delta"] = exhibit_delta
    checks["exhibit_l1_gap"] = l1_gap
    checks["exhibit_lp_gap"] = lp_gap
    checks["exhibit_holds"] = bool(l1_gap < 0.1 and lp_gap >= 1.0)

    passed = all(v for k, v in checks.items()
                 if isinstance(v, bool))
    header = ("p", "delta", "norm", "n", "gap")
    svg = {
        "title": "norm growth toward the singular endpoint",
        "xlabel": "log10(delta)",
        "ylabel": "lp norm on [delta, 1/2]",
        "series": [
            ("p=1.5", [math.log10(d) for d in ladder], ladders[1.5]),
            ("p=2.0", [math.log10(d) for d in ladder], ladders[2.0]),
        ],
    }
    cases = [{"check": k, "value": v} for k, v in sorted(checks.items())]
    return SuiteResult("normcmp", header, rows, cases, passed, checks, svg)


SUITES = {
    "flow_axioms": run_flow_axioms,
    "gronwall": run_gronwall,
    "fit": run_fit,
    "compose": run_compose,
    "rescale": run_rescale,
    "normcmp": run_normcmp,
}

SUITE_ORDER = ("flow_axioms", "gronwall", "fit", "compose", "rescale", "normcmp")
