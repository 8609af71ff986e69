"""L^1-vs-L^p gap: a strictly increasing map that is integrable but not
p-integrable for any p > 1.

The series  h(x) = -sum_{k>=1} x^(1/k-1) / k^3  on (0,1) has
|h| integrable (term-wise: each term integrates to 1/k^2, total
pi^2/6) while |h|^p diverges at 0 for every p > 1. The maps
g_n = Id + h/n therefore approach the identity in L^1 on [0,1] while
staying far from it in L^p on [delta, 1-delta] for small delta.

The divergence is rendered at desk scale as monotone growth of
|h|_{p,[delta,1/2]} along a shrinking delta ladder; quadrature uses
geometrically subdivided panels toward the singular endpoint.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import DomainError, QuadratureNotConverged, TailNotConverged

_TRUNCATION_CAP = 10_000_000


@dataclass(frozen=True)
class SeriesConfig:
    truncation: int = 1000
    tail_tolerance: float = 1e-9

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if self.tail_tolerance <= 0:
            raise ValueError("tail_tolerance must be positive")


DEFAULT_SERIES = SeriesConfig()


def _tail_bound(x: float, terms: int) -> float:
    # x^(1/k-1) <= 1/x on (0,1) and sum_{k>K} k^-3 <= 1/(2K^2)
    return (1.0 / x) / (2.0 * terms * terms)


def h_eval(x: float, sc: SeriesConfig = DEFAULT_SERIES) -> Tuple[float, float]:
    """Partial sum of h at x plus a certified bound on the dropped tail.

    The truncation depth is doubled until the tail bound meets the
    configured tolerance (capped at 1e7 terms).
    """
    if not (0.0 < x < 1.0):
        raise DomainError(f"h is defined on (0,1), got x={x}")
    terms = sc.truncation
    while _tail_bound(x, terms) > sc.tail_tolerance:
        if terms >= _TRUNCATION_CAP:
            raise TailNotConverged(
                f"tail bound {_tail_bound(x, terms):.3e} > {sc.tail_tolerance} "
                f"at the {_TRUNCATION_CAP}-term cap")
        terms = min(terms * 2, _TRUNCATION_CAP)
    xs = np.array([x])
    ks = np.array([terms], dtype=np.int64)
    value = -float(_kernels.h_series_batch(xs, ks)[0])
    return value, _tail_bound(x, terms)


def h_abs(x: float, rel_tail: float = 1e-9) -> float:
    """|h(x)| with tail below rel_tail/x, i.e. a fixed truncation depth.

    Suited to quadrature at arbitrarily small x: the absolute tail
    bound (1/x)/(2K^2) scales with the magnitude of h itself, so a
    constant K = sqrt(1/(2*rel_tail)) serves the whole interval.
    """
    if not (0.0 < x < 1.0):
        raise DomainError(f"h is defined on (0,1), got x={x}")
    terms = math.ceil(math.sqrt(1.0 / (2.0 * rel_tail)))
    xs = np.array([x])
    ks = np.array([terms], dtype=np.int64)
    return float(_kernels.h_series_batch(xs, ks)[0])


def h_abs_grid(xs: np.ndarray, rel_tail: float = 1e-9) -> np.ndarray:
    """Vectorized |h| over many points with the fixed-depth truncation."""
    xs = np.asarray(xs, dtype=np.float64)
    if np.any(xs <= 0.0) or np.any(xs >= 1.0):
        raise DomainError("h is defined on (0,1)")
    terms = math.ceil(math.sqrt(1.0 / (2.0 * rel_tail)))
    ks = np.full(len(xs), terms, dtype=np.int64)
    return _kernels.h_series_batch(xs, ks)


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-8      # per geometric panel
    max_depth: int = 42        # adaptive bisection depth within a panel
    max_panels: int = 1200

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_QUAD = QuadConfig()


def _adaptive_simpson(f, a, fa, b, fb, m, fm, whole, tol, depth, cfg):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth >= cfg.max_depth:
        raise QuadratureNotConverged(
            f"panel [{a}, {b}] did not converge at depth {depth}")
    if abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (_adaptive_simpson(f, a, fa, m, fm, lm, flm, left, tol / 2.0,
                              depth + 1, cfg)
            + _adaptive_simpson(f, m, fm, b, fb, rm, frm, right, tol / 2.0,
                                depth + 1, cfg))


def _simpson_panel(f, a, b, cfg: QuadConfig) -> float:
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive_simpson(f, a, fa, b, fb, m, fm, whole, cfg.abs_tol, 0, cfg)


def lp_norm(fn: Callable[[float], float], p: float, a: float, b: float,
            quad: QuadConfig = DEFAULT_QUAD) -> float:
    """(integral_a^b |fn|^p dx)^(1/p) by adaptive Simpson quadrature.

    Panels double geometrically away from a, which resolves integrands
    that blow up toward the origin. a = 0 is treated as improper:
    panels descend toward 0 (never evaluating the endpoint itself)
    until a panel contributes less than the tolerance; integrands with
    too-slowly decaying mass exhaust the panel budget and raise
    QuadratureNotConverged.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not a < b:
        raise ValueError("need a < b")

    def g(x: float) -> float:
        return abs(fn(x)) ** p

    total = 0.0
    if a > 0.0:
        lo = a
        panels = 0
        while lo < b:
            hi = min(2.0 * lo, b)
            total += _simpson_panel(g, lo, hi, quad)
            lo = hi
            panels += 1
            if panels > quad.max_panels:
                raise QuadratureNotConverged(
                    f"exceeded {quad.max_panels} geometric panels")
        return total ** (1.0 / p)

    # improper lower endpoint: descend b, b/2, b/4, ... toward 0
    hi = b
    for _ in range(quad.max_panels):
        lo = hi / 2.0
        if lo <= 0.0 or lo == hi:
            break
        contribution = _simpson_panel(g, lo, hi, quad)
        total += contribution
        if contribution < quad.abs_tol:
            return total ** (1.0 / p)
        hi = lo
    raise QuadratureNotConverged(
        "mass near the singular endpoint decays too slowly for the panel budget")


def divergence_probe(p: float, deltas: Sequence[float],
                     quad: QuadConfig = DEFAULT_QUAD,
                     rel_tail: float = 1e-9) -> List[float]:
    """|h|_{p,[delta,1/2]} along a shrinking ladder of deltas.

    For p > 1 the values grow without bound as delta -> 0; the ladder
    renders that divergence as strict monotone growth.
    """
    if p <= 1:
        raise ValueError("the divergence probe needs p > 1")
    deltas = list(deltas)
    if any(not (0.0 < d < 0.5) for d in deltas):
        raise ValueError("every delta must lie in (0, 0.5)")
    if any(nxt >= prev for prev, nxt in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    fn = lambda x: h_abs(x, rel_tail)
    return [lp_norm(fn, p, d, 0.5, quad) for d in deltas]


def gn_gap(n: int, p: float, a: float, b: float,
           quad: QuadConfig = DEFAULT_QUAD, rel_tail: float = 1e-9) -> float:
    """|g_n - Id|_{p,[a,b]} where g_n = Id + h/n.

    The identity cancels exactly, so this is |h|_{p,[a,b]} / n. The
    open domain of h is respected by sampling one ulp inside when an
    endpoint lands on 0 or 1 after rounding.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    b = min(b, float(np.nextafter(1.0, 0.0)))
    return lp_norm(lambda x: h_abs(x, rel_tail), p, a, b, quad) / n


def h_l1_termwise(a: float, b: float, terms: int = 1_000_000) -> float:
    """Term-wise exact integral of |h| over [a,b]: each series term
    x^(1/k-1)/k^3 integrates to (b^(1/k) - a^(1/k))/k^2."""
    if not (0.0 <= a < b <= 1.0):
        raise DomainError("need 0 <= a < b <= 1")
    k = np.arange(1, terms + 1, dtype=np.float64)
    return float(np.sum((b ** (1.0 / k) - a ** (1.0 / k)) / (k * k)))


# exact L^1 mass of h over the full interval: sum_k 1/k^2 = pi^2/6
H_L1_FULL = math.pi * math.pi / 6.0


def l1_gap_full_interval(n: int) -> float:
    """|g_n - Id|_{1,[0,1]} computed from the exact series mass."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return H_L1_FULL / n
