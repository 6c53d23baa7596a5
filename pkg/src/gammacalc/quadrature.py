"""Adaptive quadrature and sup-norm evaluation used by the weighted norms.

The integrator is a global-adaptive Gauss-Kronrod (G7, K15) scheme working on
vectorized integrands: a segment list is seeded from the caller's breakpoints
(weight/kink locations), every segment gets a K15 estimate in one batched
call, and the worst segment is bisected until the error budget is met.
Semi-infinite upper limits are truncated by interval doubling once the tail
segments stop contributing at the requested tolerance; this relies on the
exponential weight dominating every integrand in the catalog.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, QuadratureWarning

# Kronrod-15 abscissae/weights with the embedded Gauss-7 rule (odd positions).
_XGK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
])

_K15_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # ascending, 15 nodes
_K15_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G7_IDX = np.arange(1, 15, 2)                                   # Gauss-7 positions
_G7_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budgets shared by all norm computations."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000
    singular_points: tuple[float, ...] = ()
    sup_grid_density: int = 200

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        object.__setattr__(
            self, "singular_points", tuple(float(v) for v in self.singular_points)
        )

    def with_breakpoints(self, points) -> "QuadratureConfig":
        merged = sorted(set(self.singular_points) | {float(p) for p in points})
        return QuadratureConfig(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_subdivisions=self.max_subdivisions,
            singular_points=tuple(merged),
            sup_grid_density=self.sup_grid_density,
        )


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gl_nodes(lo, hi, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to [lo, hi]; lo/hi may be arrays."""
    x, w = gauss_legendre(n)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid[..., None] + half[..., None] * x, half[..., None] * w


def _batch_k15(fn, los: np.ndarray, his: np.ndarray):
    """K15 and error estimates for a batch of segments in one integrand call."""
    mid = 0.5 * (los + his)
    half = 0.5 * (his - los)
    nodes = mid[:, None] + half[:, None] * _K15_NODES
    vals = np.asarray(fn(nodes.ravel()), dtype=float).reshape(nodes.shape)
    if not np.all(np.isfinite(vals)):
        bad = np.unravel_index(int(np.argmax(~np.isfinite(vals))), vals.shape)
        raise DomainError(f"non-finite integrand value at x={nodes[bad]!r}")
    k = half * (vals @ _K15_WEIGHTS)
    gvals = vals[:, _G7_IDX]
    g = half * (gvals @ _G7_WEIGHTS)
    diff = np.abs(k - g)
    scale = np.maximum(np.abs(k), 1e-300)
    rel = diff / scale
    err = scale * np.minimum(rel, (200.0 * rel) ** 1.5)
    return k, err


def integrate(
    fn,
    lo: float,
    hi: float,
    cfg: QuadratureConfig | None = None,
    breakpoints=(),
) -> tuple[float, float]:
    """Integral of the vectorized callable fn over (lo, hi) with error estimate.

    Interior breakpoints (plus cfg.singular_points) seed the segment list, so
    integrable endpoint/kink singularities never receive a quadrature node.
    hi = inf is truncated by doubling once the tail stops contributing.
    """
    cfg = cfg or QuadratureConfig()
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    pts = sorted(
        p for p in set(cfg.singular_points) | {float(b) for b in breakpoints}
        if lo < p < hi
    )
    if math.isinf(hi):
        hi = _truncation_point(fn, lo, pts, cfg)
        pts = [p for p in pts if p < hi]
    edges = np.array([lo, *pts, hi])
    los, his = edges[:-1], edges[1:]
    k, err = _batch_k15(fn, los, his)

    heap = [(-err[i], los[i], his[i], k[i], err[i]) for i in range(len(k))]
    heapq.heapify(heap)
    total = float(np.sum(k))
    total_err = float(np.sum(err))
    splits = 0
    while (
        total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total))
        and splits < cfg.max_subdivisions
        and heap
    ):
        _, a, b, kv, ev = heapq.heappop(heap)
        if b - a <= 1e-15 * max(abs(a), abs(b), 1.0):
            total_err -= ev        # segment cannot shrink further
            continue
        m = 0.5 * (a + b)
        k2, e2 = _batch_k15(fn, np.array([a, m]), np.array([m, b]))
        total += float(k2.sum() - kv)
        total_err += float(e2.sum() - ev)
        heapq.heappush(heap, (-e2[0], a, m, k2[0], e2[0]))
        heapq.heappush(heap, (-e2[1], m, b, k2[1], e2[1]))
        splits += 1
    if total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        warnings.warn(
            f"quadrature stopped after {splits} subdivisions with error "
            f"estimate {total_err:.3e} (target {max(cfg.abs_tol, cfg.rel_tol * abs(total)):.3e})",
            QuadratureWarning,
            stacklevel=2,
        )
    return total, total_err


def _truncation_point(fn, lo: float, pts, cfg: QuadratureConfig) -> float:
    """Doubling cutoff for a decaying integrand on (lo, inf)."""
    b = max(1.0, 2.0 * abs(lo), *(2.0 * abs(p) for p in pts)) if pts else max(1.0, 2.0 * abs(lo))
    start = max(b, lo + 1.0)
    k0, _ = _batch_k15(fn, np.array([lo]), np.array([start]))
    acc = abs(float(k0[0]))
    b = start
    for _ in range(60):
        k, _ = _batch_k15(fn, np.array([b]), np.array([2.0 * b]))
        seg = abs(float(k[0]))
        if seg <= 0.5 * max(cfg.abs_tol, cfg.rel_tol * acc):
            return 2.0 * b
        acc += seg
        b *= 2.0
    warnings.warn(
        f"tail truncation did not converge by x={b:.3e}",
        QuadratureWarning,
        stacklevel=2,
    )
    return b


def refine_sup(
    fn,
    lo: float,
    hi: float,
    cfg: QuadratureConfig | None = None,
    breakpoints=(),
    rounds: int = 4,
) -> float:
    """Pointwise sup of |fn| over (lo, hi) on an adaptively refined grid.

    Stands in for the essential sup: every function fed to it is continuous
    off the listed breakpoints, near which the grid is densified.
    """
    cfg = cfg or QuadratureConfig()
    pts = sorted(
        p for p in set(cfg.singular_points) | {float(b) for b in breakpoints}
        if lo < p < hi
    )
    if math.isinf(hi):
        hi = _sup_truncation(fn, lo, pts)
        pts = [p for p in pts if p < hi]
    edges = [lo, *pts, hi]
    chunks = []
    for a, b in zip(edges[:-1], edges[1:]):
        n = int(min(max(24, cfg.sup_grid_density * (b - a)), 1200))
        inner = np.linspace(a, b, n + 2)[1:-1]
        chunks.append(inner)
        if b / max(a, 1e-12) > 50.0:       # long segment: resolve the decades too
            chunks.append(np.geomspace(max(a, 1e-12), b, 200)[1:-1])
        # densify toward the edges, where kinks/singular weights live
        w = (b - a) * 1e-3
        chunks.append(a + w * np.linspace(1e-3, 1.0, 25))
        chunks.append(b - w * np.linspace(1e-3, 1.0, 25))
    grid = np.unique(np.concatenate(chunks))
    vals = np.abs(np.asarray(fn(grid), dtype=float))
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        raise DomainError(f"non-finite value at x={grid[bad]!r}")
    best_x = grid[int(np.argmax(vals))]
    best = float(np.max(vals))
    span = (hi - lo) / max(len(grid), 1)
    for _ in range(rounds):
        local = np.linspace(max(lo, best_x - span), min(hi, best_x + span), 81)
        local = local[(local > lo) & (local < hi)]
        if local.size == 0:
            break
        lv = np.abs(np.asarray(fn(local), dtype=float))
        i = int(np.argmax(lv))
        if lv[i] > best:
            best = float(lv[i])
            best_x = local[i]
        span *= 0.1
    return best


def _sup_truncation(fn, lo: float, pts) -> float:
    b = max(1.0, 2.0 * abs(lo), *(2.0 * abs(p) for p in pts)) if pts else max(1.0, 2.0 * abs(lo))
    b = max(b, lo + 1.0)
    probe = np.abs(np.asarray(fn(np.linspace(lo + 1e-9, b, 64)), dtype=float))
    peak = float(np.max(probe)) if probe.size else 0.0
    for _ in range(40):
        seg = np.abs(np.asarray(fn(np.linspace(b, 2 * b, 32)), dtype=float))
        m = float(np.max(seg))
        peak = max(peak, m)
        if m <= 1e-13 * max(peak, 1e-300):
            return 2.0 * b
        b *= 2.0
    warnings.warn(f"sup truncation did not converge by x={b:.3e}", QuadratureWarning, stacklevel=2)
    return b
