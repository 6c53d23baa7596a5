"""Constructive upper bounds for the weighted K-functionals.

The candidate the equivalence proofs build is assembled here: a covering
partition t_0 < ... < t_{j+1} of the window whose steps track
gamma^{-1}(h) sqrt(t_i), smooth bumps psi_k warped through gamma, per-cell
Steklov averages

    F_k(x) = (2a/h) int_{h/2a}^{h/a} f_{tau, sqrt(t_{k-1})}(x) dtau,

and their blend G = sum_k F_k psi_{k-1} (1 - psi_k).  The inner Steklov
function is an r-fold moving average of forward differences; its classical
derivatives collapse to finite-difference formulas, so the gamma-derivatives
of G come out analytically (difference formulas + Bell-polynomial conversion
through gamma^{-1}) instead of by differencing nested quadratures.

The r-fold box average is evaluated as a single integral against the density
of a sum of r independent uniforms on (0, 1/r) (an Irwin-Hall density in
disguise); the identity is exact because r^r (1/r)^r = 1.

K-functional upper bounds then take the best of a small candidate set per
step h (the Steklov blend, the zero function, the best polynomial in gamma,
and f itself when its r-th gamma-derivative is supplied), mirroring how the
two directions of the equivalence argue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .bell import bell_polynomial, faa_di_bruno
from .calculus import GammaPolynomial, RealFunction, gamma_poly_derivative
from .errors import (
    DomainError,
    GammaCalcError,
    InadmissibleStepError,
    PartitionSizeError,
)
from .gamma import GammaFunction, PiecewiseRootGamma, tangent_slope_at_zero
from .modulus import (
    DEFAULT_H_POINTS,
    DEFAULT_H_RATIO,
    best_gamma_poly_error,
    geometric_h_grid,
    _forward_difference_step,
)
from .quadrature import QuadratureConfig, gl_nodes, integrate, refine_sup
from .weights import (
    LaguerreWeight,
    NormSpec,
    max_time_horizon,
    weighted_lp_norm,
    window_interval,
)

_PSI_PLATEAU = 1e-6          # distance from {0,1} treated as exact plateau
_CHUNK = 2048                # x-points per batched Steklov evaluation


# ---------------------------------------------------------------------------
# partition and bumps


@dataclass(frozen=True)
class Partition:
    """Covering points t_0..t_{j+1} of the window with the step-ratio law."""

    points: tuple[float, ...]
    j: int
    M: int
    A: float
    h: float
    r: int
    A1: float
    A2: float

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points)


def estimate_partition_cells(g: GammaFunction, r: int, h: float, A1: float, A2: float) -> int:
    win = window_interval(g, r, h, A1, A2)
    s = float(g.eval_inverse(h))
    return int(2.0 * (math.sqrt(win.hi) - math.sqrt(win.lo)) / s) + 2


def build_partition(
    g: PiecewiseRootGamma,
    r: int,
    h: float,
    A1: float,
    A2: float,
    max_cells: Optional[int] = None,
) -> Partition:
    """Greedy covering with unit step ratio: t_{i+1} = t_i + gamma^{-1}(h) sqrt(t_i).

    The unit ratio lies in [1/(2r), r] for every r >= 1 and pushes the cell
    growth factor below (1 + 2 sqrt(A1))/(2 sqrt(A1)) automatically; the first
    point past the window top becomes t_{j+1}.
    """
    win = window_interval(g, r, h, A1, A2)
    s = float(g.eval_inverse(h))
    if max_cells is not None:
        est = estimate_partition_cells(g, r, h, A1, A2)
        if est > max_cells:
            raise PartitionSizeError(
                f"partition for h={h:g} needs ~{est} cells (budget {max_cells})"
            )
    pts = [win.lo]
    while pts[-1] < win.hi:
        t = pts[-1]
        pts.append(t + s * math.sqrt(t))
        if max_cells is not None and len(pts) > max_cells + 2:
            raise PartitionSizeError(f"partition for h={h:g} exceeded {max_cells} cells")
    points = np.asarray(pts)
    j = len(pts) - 2
    if j < 3:
        raise InadmissibleStepError(
            f"h={h:g} leaves only j={j} cells; the index bracketing needs j >= 3"
        )
    _check_partition_laws(points, s, r, A1, win.hi)
    x_lin = g.x_lin
    idx = int(np.searchsorted(points, x_lin, side="left"))
    m_idx = idx - 1
    if not 1 <= m_idx <= j - 2 or not (points[m_idx] < x_lin <= points[m_idx + 1]):
        raise InadmissibleStepError(
            f"h={h:g}: the linear joint {x_lin} is not bracketed strictly inside "
            f"the partition (index {m_idx}, need 1..{j - 2})"
        )
    return Partition(
        points=tuple(points),
        j=j,
        M=m_idx,
        A=float(points[-1] * s * s / A2),
        h=h,
        r=r,
        A1=A1,
        A2=A2,
    )


def _check_partition_laws(points: np.ndarray, s: float, r: int, A1: float, win_hi: float):
    steps = np.diff(points)
    ratio = steps / (s * np.sqrt(points[:-1]))
    if np.any(ratio < 1.0 / (2.0 * r) - 1e-12) or np.any(ratio > r + 1e-12):
        bad = int(np.argmax((ratio < 1.0 / (2.0 * r)) | (ratio > r)))
        raise GammaCalcError(f"step-ratio law violated at cell {bad}: ratio={ratio[bad]}")
    growth = points[1:] / points[:-1]
    bound = (1.0 + 2.0 * math.sqrt(A1)) / (2.0 * math.sqrt(A1))
    if np.any(growth > bound + 1e-12) or np.any(growth < 1.0 - 1e-15):
        bad = int(np.argmax(growth > bound))
        raise GammaCalcError(f"cell growth law violated at cell {bad}: {growth[bad]} > {bound}")
    if not (points[-2] < win_hi <= points[-1]):
        raise GammaCalcError("final point does not bracket the window top")


@dataclass(frozen=True)
class BumpFamily:
    """gamma-warped smooth steps psi_k anchored at the cell midpoints y_k."""

    partition: Partition
    gamma_points: tuple[float, ...]      # gamma(t_k)
    gamma_mid: tuple[float, ...]         # (gamma(t_k) + gamma(t_{k+1}))/2 = gamma(y_k)
    midpoints: tuple[float, ...]         # y_k


def build_bumps(g: GammaFunction, partition: Partition) -> BumpFamily:
    gp = np.asarray(g.eval(partition.array))
    gm = 0.5 * (gp[:-1] + gp[1:])
    mids = np.asarray(g.eval_inverse(gm))
    return BumpFamily(
        partition=partition,
        gamma_points=tuple(gp),
        gamma_mid=tuple(gm),
        midpoints=tuple(mids),
    )


# logistic-derivative polynomials: d^l/du^l [1/(1+e^u)] as polynomials in the value
_SIGMOID_POLYS = (
    (0.0, -1.0, 1.0),                     # y' = y^2 - y
    (0.0, 1.0, -3.0, 2.0),                # y'' = 2y^3 - 3y^2 + y
    (0.0, -1.0, 7.0, -12.0, 6.0),         # y''' = 6y^4 - 12y^3 + 7y^2 - y
    (0.0, 1.0, -15.0, 50.0, -60.0, 24.0), # y'''' = 24y^5 - 60y^4 + 50y^3 - 15y^2 + y
)


def psi_eval(s, order: int = 0):
    """The fixed smooth step e(s)/(e(s) + e(1-s)) with e(u) = exp(-1/u), u > 0.

    Equals sigma(w(s)) with sigma(u) = 1/(1 + e^u) and w(s) = 1/s - 1/(1-s);
    derivatives up to order 4 come from the logistic-derivative polynomials
    composed through the Bell machinery.  Outside (0, 1) everything is an
    exact plateau.
    """
    if order < 0 or order > 4:
        raise ValueError("psi derivatives are implemented for orders 0..4")
    arr = np.asarray(s, dtype=float)
    out = np.zeros(arr.shape)
    if order == 0:
        out = np.where(arr >= 1.0 - _PSI_PLATEAU, 1.0, out)
    core = (arr > _PSI_PLATEAU) & (arr < 1.0 - _PSI_PLATEAU)
    if np.any(core):
        sc = arr[core]
        w = 1.0 / sc - 1.0 / (1.0 - sc)
        sig = expit(-w)
        if order == 0:
            out[core] = sig
        else:
            outer = []
            for l in range(1, order + 1):
                poly = _SIGMOID_POLYS[l - 1]
                acc = np.zeros_like(sig)
                for c in reversed(poly):
                    acc = acc * sig + c
                outer.append(acc)
            inner = [
                (-1.0) ** i * math.factorial(i) / sc ** (i + 1)
                - math.factorial(i) / (1.0 - sc) ** (i + 1)
                for i in range(1, order + 1)
            ]
            out[core] = faa_di_bruno(outer, inner)
    return float(out) if np.isscalar(s) else out


def psi_k_gamma_derivative(
    bumps: BumpFamily, k: int, x, order: int, g: GammaFunction
):
    """(psi_k)_gamma^(order)(x): the step warped through gamma, differentiated.

    psi_0 is identically 1 and psi_j identically 0; interior bumps are
    psi((gamma(x) - gamma(y_k)) / (gamma(t_{k+1}) - gamma(y_k))) whose
    order-th gamma-derivative just rescales by the gamma-width.
    """
    if order < 0 or order > 4:
        raise ValueError("orders 0..4 supported")
    arr = np.asarray(x, dtype=float)
    j = bumps.partition.j
    if k == 0:
        out = np.ones(arr.shape) if order == 0 else np.zeros(arr.shape)
        return float(out) if np.isscalar(x) else out
    if k == j:
        out = np.zeros(arr.shape)
        return float(out) if np.isscalar(x) else out
    anchor = bumps.gamma_mid[k]
    width = bumps.gamma_points[k + 1] - bumps.gamma_mid[k]
    sarg = (np.asarray(g.eval(arr)) - anchor) / width
    out = psi_eval(sarg, order) / width ** order
    return float(out) if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# Steklov averages


@lru_cache(maxsize=None)
def _uniform_sum_rule(n: int, per_segment: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Quadrature against the density of a sum of n uniforms on (0, 1/n)...

    ...expressed in the sum variable v in (0, 1): nodes and weights such that
    E[g(V)] = sum_i w_i g(v_i).  The density r * IrwinHall_n(n v) has kinks at
    multiples of 1/n, so each unit piece gets its own Gauss rule.
    """
    nodes, weights = [], []
    for seg in range(n):
        a, b = seg / n, (seg + 1) / n
        xs, ws = gl_nodes(np.array([a]), np.array([b]), per_segment)
        xs, ws = xs.ravel(), ws.ravel()
        dens = n * _irwin_hall_density(n, n * xs)
        nodes.extend(xs.tolist())
        weights.extend((ws * dens).tolist())
    return tuple(nodes), tuple(weights)


def _irwin_hall_density(n: int, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < n)
    ti = t[inside]
    acc = np.zeros_like(ti)
    for k in range(n + 1):
        # the sum runs over k < t only; an explicit indicator is needed since
        # the n = 1 term carries power zero (0**0 would sneak in as 1)
        acc += np.where(
            ti > k,
            (-1.0) ** k * math.comb(n, k) * np.maximum(ti - k, 0.0) ** (n - 1),
            0.0,
        )
    out[inside] = acc / math.factorial(n - 1)
    return out


def irwin_hall_density(n: int, t):
    """Density of a sum of n independent uniforms on (0, 1), at t."""
    if n < 1:
        raise ValueError("n must be >= 1")
    arr = _irwin_hall_density(n, t)
    return float(arr) if np.isscalar(t) else arr


def steklov_value(
    f: RealFunction,
    g: GammaFunction,
    r: int,
    tau: float,
    s: float,
    x,
    per_segment: int = 16,
):
    """The smoothing average f_{tau,s}(x): an r-fold box mean of differences.

    Reduced to one dimension against the sum-of-uniforms density; exact
    because the box volume normalization cancels (r^r (1/r)^r = 1).
    """
    if tau <= 0 or s <= 0:
        raise ValueError("tau and s must be positive")
    c = float(g.eval_inverse(tau)) * s
    u, uw = _uniform_sum_rule(r, per_segment)
    u = np.asarray(u)
    uw = np.asarray(uw)
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    ls = np.arange(1, r + 1)
    nodes = arr[:, None, None] + c * ls[None, :, None] * u[None, None, :]
    f.require_inside(nodes)
    fv = np.asarray(f.eval(nodes.reshape(-1)), dtype=float).reshape(nodes.shape)
    lcoef = np.array([(-1.0) ** (l + 1) * math.comb(r, l) for l in ls])
    out = np.einsum("nlu,l,u->n", fv, lcoef, uw)
    return float(out[0]) if np.isscalar(x) else out.reshape(np.shape(x))


def steklov_classical_derivative(
    f: RealFunction,
    g: GammaFunction,
    r: int,
    tau: float,
    s: float,
    x,
    m: int,
    per_segment: int = 16,
):
    """m-th classical derivative of the Steklov average, 1 <= m <= r.

    For m = r the average collapses to a weighted sum of r-th forward
    differences at steps l c / r; for m < r the remaining r - m box variables
    stay averaged, again reduced to a one-dimensional density integral.
    """
    if not 1 <= m <= r:
        raise ValueError(f"need 1 <= m <= r, got m={m}")
    if tau <= 0 or s <= 0:
        raise ValueError("tau and s must be positive (the step divides by them)")
    c = float(g.eval_inverse(tau)) * s
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    val = _steklov_deriv_batch(f, r, np.full(arr.shape, c), arr, m, per_segment)
    return float(val[0]) if np.isscalar(x) else val.reshape(np.shape(x))


def _steklov_deriv_batch(f, r, c, x, m, per_segment=16):
    """Vectorized (f_{tau,s})^(m)(x) with per-point step scale c."""
    if m == r:
        v = np.array([0.0])
        vw = np.array([1.0])
    else:
        # leftover sum of (r-m) uniforms on (0, 1/r) = ((r-m)/r) * the
        # normalized sum the cached rule integrates against
        vt, vwt = _uniform_sum_rule(r - m, per_segment)
        v = np.asarray(vt) * (r - m) / r
        vw = np.asarray(vwt)
    ls = np.arange(1, r + 1)
    ii = np.arange(m + 1)
    icoef = np.array([(-1.0) ** (m - i) * math.comb(m, i) for i in ii])
    lcoef = np.array([(-1.0) ** (l + 1) * math.comb(r, l) for l in ls])
    # nodes: x + l*c*v + (l*c/r)*i    -> (N, L, V, m+1)
    lc = ls[None, :] * c[:, None]                             # (N, L)
    nodes = (
        x[:, None, None, None]
        + lc[:, :, None, None] * v[None, None, :, None]
        + (lc / r)[:, :, None, None] * ii[None, None, None, :]
    )
    f.require_inside(nodes)
    fv = np.asarray(f.eval(nodes.reshape(-1)), dtype=float).reshape(nodes.shape)
    diffs = np.einsum("nlvi,i,v->nl", fv, icoef, vw)
    pref = r ** m * lcoef[None, :] / lc ** m
    return np.sum(diffs * pref, axis=1)


def steklov_parameter_bound(g: PiecewiseRootGamma, r: int) -> float:
    """Strict lower bound for the averaging parameter a (node containment)."""
    a1 = g.spec.a[0]
    return max(1.0, 2.0 * r * r * float(g.eval(a1)) / (a1 * tangent_slope_at_zero(g)))


def default_steklov_parameter(g: PiecewiseRootGamma, r: int) -> float:
    """Twice the strict bound; the margin feeds the containment estimates."""
    return 2.0 * steklov_parameter_bound(g, r)


class SteklovApproximant:
    """The assembled blend G with analytic value and gamma-derivative access.

    Immutable after construction; evaluation chunks its x-batches so the
    intermediate node tensors stay small.
    """

    def __init__(
        self,
        f: RealFunction,
        g: GammaFunction,
        r: int,
        h: float,
        partition: Partition,
        bumps: BumpFamily,
        parameter: float,
        q_tau: int = 6,
        per_segment: int = 8,
    ):
        self.f = f
        self.g = g
        self.r = r
        self.h = h
        self.partition = partition
        self.bumps = bumps
        self.parameter = parameter
        self.per_segment = per_segment
        lo, hi = h / (2.0 * parameter), h / parameter
        tn, tw = gl_nodes(np.array([lo]), np.array([hi]), q_tau)
        self.tau_nodes = tn.ravel()
        self.tau_weights = tw.ravel() * (2.0 * parameter / h)   # averaged measure
        self.s_tau = np.array([float(g.eval_inverse(t)) for t in self.tau_nodes])
        self.sqrt_t = np.sqrt(partition.array)
        u, uw = _uniform_sum_rule(r, per_segment)
        self.u_nodes = np.asarray(u)
        self.u_weights = np.asarray(uw)
        self.lcoef = np.array([(-1.0) ** (l + 1) * math.comb(r, l) for l in range(1, r + 1)])

    # -- per-cell averages -------------------------------------------------

    def steklov_F(self, k, x, m: int = 0):
        """(F_k)^(m)(x) classical; k may be an int or a per-point index array."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        kidx = np.full(arr.shape, k, dtype=int) if np.isscalar(k) else np.asarray(k)
        out = np.empty(arr.shape)
        for start in range(0, arr.size, _CHUNK):
            sl = slice(start, min(start + _CHUNK, arr.size))
            out[sl] = self._F_chunk(arr[sl], kidx[sl], m)
        return float(out[0]) if np.isscalar(x) else out.reshape(np.shape(x))

    def _F_chunk(self, x, kidx, m):
        s = self.sqrt_t[kidx - 1]                       # phi(t_{k-1})
        if m == 0:
            ls = np.arange(1, self.r + 1)
            c = self.s_tau[None, :] * s[:, None]        # (N, Q)
            nodes = (
                x[:, None, None, None]
                + c[:, :, None, None] * ls[None, None, :, None] * self.u_nodes[None, None, None, :]
            )
            self.f.require_inside(nodes)
            fv = np.asarray(self.f.eval(nodes.reshape(-1)), dtype=float).reshape(nodes.shape)
            inner = np.einsum("nqlu,l,u->nq", fv, self.lcoef, self.u_weights)
            return inner @ self.tau_weights
        total = np.zeros_like(x)
        for q, (tau_s, tw) in enumerate(zip(self.s_tau, self.tau_weights)):
            c = tau_s * s
            total += tw * _steklov_deriv_batch(self.f, self.r, c, x, m, self.per_segment)
        return total

    # -- blend -------------------------------------------------------------

    def _locate(self, x):
        pts = self.partition.array
        idx = np.searchsorted(pts, x, side="right") - 1
        return np.clip(idx, 0, self.partition.j)

    def value(self, x):
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self._locate(arr)
        left = np.clip(idx, 1, self.partition.j)
        out = self.steklov_F(left, arr)
        interior = (idx >= 1) & (idx <= self.partition.j - 1)
        if np.any(interior):
            xi = arr[interior]
            ki = idx[interior]
            right = self.steklov_F(ki + 1, xi)
            psi = self._psi_at(xi, ki, 0)
            out[interior] = out[interior] + psi * (right - out[interior])
        return float(out[0]) if np.isscalar(x) else out.reshape(np.shape(x))

    def _psi_at(self, x, kidx, order):
        anchors = np.asarray(self.bumps.gamma_mid)[kidx]
        widths = np.asarray(self.bumps.gamma_points)[kidx + 1] - anchors
        sarg = (np.asarray(self.g.eval(x)) - anchors) / widths
        return psi_eval(sarg, order) / widths ** order

    def _gamma_derivs_of_F(self, x, kidx, upto, inv):
        """(F_k)_gamma^(n)(x) for n = 0..upto via Bell conversion of m-derivatives."""
        classical = [self.steklov_F(kidx, x, m) for m in range(1, upto + 1)]
        rows = [self.steklov_F(kidx, x, 0)]
        for n in range(1, upto + 1):
            acc = np.zeros_like(rows[0])
            for m in range(1, n + 1):
                acc = acc + classical[m - 1] * bell_polynomial(n, m, [inv[i] for i in range(n - m + 1)])
            rows.append(acc)
        return rows

    def gamma_derivative(self, x, order: int):
        """(G)_gamma^(order)(x) through the Leibniz expansion of the blend."""
        if order < 0:
            raise ValueError("order must be >= 0")
        if order == 0:
            return self.value(x)
        if order > self.r:
            raise ValueError(f"orders above r={self.r} are not assembled")
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self._locate(arr)
        left = np.clip(idx, 1, self.partition.j)
        inv = self.g.inverse_derivs_at(arr, order)
        out = np.empty(arr.shape)
        edge = ~((idx >= 1) & (idx <= self.partition.j - 1))
        if np.any(edge):
            rows = self._gamma_derivs_of_F(arr[edge], left[edge], order, inv[:, edge])
            out[edge] = rows[order]
        interior = ~edge
        if np.any(interior):
            xi = arr[interior]
            ki = idx[interior]
            inv_i = inv[:, interior]
            rows_l = self._gamma_derivs_of_F(xi, ki, order, inv_i)
            rows_r = self._gamma_derivs_of_F(xi, ki + 1, order, inv_i)
            acc = rows_l[order].copy()
            for k in range(order + 1):
                psi_d = self._psi_at(xi, ki, order - k)
                acc += math.comb(order, k) * (rows_r[k] - rows_l[k]) * psi_d
            out[interior] = acc
        return float(out[0]) if np.isscalar(x) else out.reshape(np.shape(x))


def assemble_G(
    f: RealFunction,
    g: PiecewiseRootGamma,
    r: int,
    h: float,
    partition: Optional[Partition] = None,
    bumps: Optional[BumpFamily] = None,
    steklov_parameter: Optional[float] = None,
    A1: float = 1.0,
    A2: float = 0.125,
    max_cells: Optional[int] = None,
) -> SteklovApproximant:
    """Build the blended candidate for step h (partition/bumps built if absent)."""
    bound = steklov_parameter_bound(g, r)
    if steklov_parameter is None:
        steklov_parameter = default_steklov_parameter(g, r)
    if steklov_parameter <= bound:
        raise ValueError(
            f"averaging parameter must exceed {bound:g}, got {steklov_parameter:g}"
        )
    if partition is None:
        partition = build_partition(g, r, h, A1, A2, max_cells=max_cells)
    if bumps is None:
        bumps = build_bumps(g, partition)
    return SteklovApproximant(f, g, r, h, partition, bumps, steklov_parameter)


# ---------------------------------------------------------------------------
# K-functional upper bounds


@dataclass(frozen=True)
class KEstimate:
    """An upper bound for a K-functional with its achieving candidate."""

    t: float
    value: float
    approx_error_term: float
    seminorm_term: float
    candidate_id: str
    variant: str

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("K estimates are nonnegative")


def _norm_piece(fn, p, lo, hi, cfg):
    if math.isinf(p):
        return refine_sup(fn, lo, hi, cfg)
    val, _ = integrate(lambda x: np.abs(np.asarray(fn(x), dtype=float)) ** p, lo, hi, cfg)
    return val ** (1.0 / p)


def _window_cfg(cfg: QuadratureConfig, g: GammaFunction, lo: float, hi: float, extra=()):
    pts = [b for b in g.breakpoints if lo < b < hi]
    pts.extend(b for b in extra if lo < b < hi)
    return cfg.with_breakpoints(pts)


def restricted_k_upper(
    f: RealFunction,
    g: PiecewiseRootGamma,
    r: int,
    t: float,
    p: float,
    alpha: float,
    cfg: QuadratureConfig,
    A1: float = 1.0,
    A2: float = 0.125,
    n_h: int = DEFAULT_H_POINTS,
    rho: float = DEFAULT_H_RATIO,
    h_grid=None,
    f_gamma_rth: Optional[Callable] = None,
    steklov_parameter: Optional[float] = None,
    max_partition_cells: int = 6000,
    per_h_cache: Optional[dict] = None,
    cache_key=None,
) -> KEstimate:
    """Upper bound for the restricted K-functional at scale t.

    For each h on the grid the candidate set is scored on the window I(r,h):
    approximation error + h^r seminorm; the per-h minimum is then maximized
    over the grid (the sup in the definition).  Every candidate is a genuine
    member of the Sobolev class on the window, so the bound is sound:
    f itself participates only when its r-th gamma-derivative is supplied by
    the caller.
    """
    horizon = max_time_horizon(g, r, A1, A2, "upper_construction")
    if not 0 < t <= horizon:
        raise InadmissibleStepError(f"t={t:g} exceeds the construction horizon {horizon:g}")
    grid = tuple(h_grid) if h_grid is not None else geometric_h_grid(t, n_h, rho)
    if any(h > t * (1 + 1e-12) or h <= 0 for h in grid):
        raise ValueError("h grid must lie in (0, t]")
    # keep the lattice steps whose covering partition fits the cell budget:
    # below that the blended candidate is unbuildable and the remaining
    # candidates plateau, which would pollute the grid max (the kept range
    # always contains h ~ t, which dominates the sup)
    grid = tuple(
        h for h in grid
        if estimate_partition_cells(g, r, h, A1, A2) <= max_partition_cells
    )
    if not grid:
        raise PartitionSizeError(
            f"no step in (0, {t:g}] fits the partition budget {max_partition_cells}"
        )
    best = None
    for h in grid:
        key = (cache_key, r, p, alpha, A1, A2, h)
        if per_h_cache is not None and key in per_h_cache:
            cand = per_h_cache[key]
        else:
            cand = _restricted_candidates_at_h(
                f, g, r, h, p, alpha, cfg, A1, A2,
                f_gamma_rth, steklov_parameter, max_partition_cells,
            )
            if per_h_cache is not None:
                per_h_cache[key] = cand
        if best is None or cand[0] > best[0]:
            best = cand
    value, approx, semi, cid = best
    return KEstimate(
        t=t, value=value, approx_error_term=approx, seminorm_term=semi,
        candidate_id=cid, variant="restricted",
    )


def _restricted_candidates_at_h(
    f, g, r, h, p, alpha, cfg, A1, A2, f_gamma_rth, steklov_parameter, max_cells
):
    win = window_interval(g, r, h, A1, A2)
    w = LaguerreWeight(alpha)
    local = _window_cfg(cfg, g, win.lo, win.hi)
    scored = []

    norm_fw = weighted_lp_norm(f, w, NormSpec(p, win.bounds), local)
    scored.append((norm_fw + 0.0, norm_fw, 0.0, "zero"))

    err, _poly = best_gamma_poly_error(f, g, r - 1, p, alpha, win.bounds, cfg)
    scored.append((err + 0.0, err, 0.0, "gamma_poly"))

    if f_gamma_rth is not None:
        def semi_fn(x):
            xv = np.asarray(x, dtype=float)
            return np.asarray(f_gamma_rth(xv), dtype=float) * xv ** (r / 2.0) * w.eval(xv)

        semi = h ** r * _norm_piece(semi_fn, p, win.lo, win.hi, local)
        scored.append((semi, 0.0, semi, "f_itself"))

    try:
        G = assemble_G(
            f, g, r, h,
            steklov_parameter=steklov_parameter, A1=A1, A2=A2, max_cells=max_cells,
        )
    except PartitionSizeError:
        G = None
    if G is not None:
        cells = G.partition.points
        cell_cfg = _window_cfg(cfg, g, win.lo, win.hi, extra=cells)

        def diff_fn(x):
            xv = np.asarray(x, dtype=float)
            return (np.asarray(f.eval(xv), dtype=float) - G.value(xv)) * w.eval(xv)

        def semi_fn(x):
            xv = np.asarray(x, dtype=float)
            return G.gamma_derivative(xv, r) * xv ** (r / 2.0) * w.eval(xv)

        approx = _norm_piece(diff_fn, p, win.lo, win.hi, cell_cfg)
        semi = h ** r * _norm_piece(semi_fn, p, win.lo, win.hi, cell_cfg)
        scored.append((approx + semi, approx, semi, f"steklov[h={h:.6g}]"))

    scored.sort(key=lambda row: row[0])
    return scored[0]


def full_k_upper(
    f: RealFunction,
    g: PiecewiseRootGamma,
    r: int,
    t: float,
    p: float,
    alpha: float,
    cfg: QuadratureConfig,
    A1: float = 1.0,
    A2: float = 0.125,
    f_gamma_rth: Optional[Callable] = None,
    steklov_parameter: Optional[float] = None,
    max_partition_cells: int = 6000,
) -> KEstimate:
    """Upper bound for the full K-functional on (0, inf) at scale t.

    The main candidate glues a near-zero polynomial, the Steklov blend at
    h = t, and a tail polynomial with two gamma-warped steps; the simple
    candidates (zero, f itself, one global polynomial) keep the bound finite
    when the glue is unavailable and exact when f is itself polynomial in
    gamma.
    """
    w = LaguerreWeight(alpha)
    full = NormSpec(p, (0.0, math.inf))
    base_cfg = cfg.with_breakpoints(g.breakpoints)
    scored = []

    norm_fw = weighted_lp_norm(f, w, full, base_cfg)
    scored.append((norm_fw, norm_fw, 0.0, "zero"))

    err, _poly = best_gamma_poly_error(f, g, r - 1, p, alpha, (0.0, math.inf), cfg)
    scored.append((err, err, 0.0, "global_poly"))

    if f_gamma_rth is not None:
        def semi_fn(x):
            xv = np.asarray(x, dtype=float)
            return np.asarray(f_gamma_rth(xv), dtype=float) * xv ** (r / 2.0) * w.eval(xv)

        semi = t ** r * _norm_piece(semi_fn, p, 0.0, math.inf, base_cfg)
        scored.append((semi, 0.0, semi, "f_itself"))

    glue = _glued_candidate_terms(
        f, g, r, t, p, alpha, cfg, A1, A2, steklov_parameter, max_partition_cells
    )
    if glue is not None:
        scored.append(glue)

    scored.sort(key=lambda row: row[0])
    value, approx, semi, cid = scored[0]
    return KEstimate(
        t=t, value=value, approx_error_term=approx, seminorm_term=semi,
        candidate_id=cid, variant="full",
    )


def _glued_candidate_terms(
    f, g, r, t, p, alpha, cfg, A1, A2, steklov_parameter, max_cells
):
    try:
        G = assemble_G(
            f, g, r, t,
            steklov_parameter=steklov_parameter, A1=A1, A2=A2, max_cells=max_cells,
        )
    except (PartitionSizeError, InadmissibleStepError):
        return None
    pts = G.partition.array
    t0, t1 = pts[0], pts[1]
    tj, tj1 = pts[-2], pts[-1]
    w = LaguerreWeight(alpha)
    _, g1 = best_gamma_poly_error(f, g, r - 1, p, alpha, (0.0, t1), cfg)
    _, g3 = best_gamma_poly_error(f, g, r - 1, p, alpha, (tj, math.inf), cfg)
    y = [float(g.eval(v)) for v in (t0, t1, tj, tj1)]
    lo_anchor, lo_width = y[0], y[1] - y[0]
    hi_anchor, hi_width = y[2], y[3] - y[2]

    def poly_derivs(poly, x, upto):
        return [gamma_poly_derivative(poly, k).eval(x) for k in range(upto + 1)]

    def blend_value(x, left_vals, right_vals, anchor, width):
        sarg = (np.asarray(g.eval(x)) - anchor) / width
        psi = psi_eval(sarg, 0)
        return left_vals[0] + psi * (right_vals[0] - left_vals[0])

    def blend_rth(x, left_vals, right_vals, anchor, width):
        sarg = (np.asarray(g.eval(x)) - anchor) / width
        acc = np.asarray(left_vals[r], dtype=float).copy()
        for k in range(r + 1):
            psi_d = psi_eval(sarg, r - k) / width ** (r - k)
            acc = acc + math.comb(r, k) * (np.asarray(right_vals[k]) - np.asarray(left_vals[k])) * psi_d
        return acc

    def G_derivs(x, upto):
        return [G.gamma_derivative(x, k) for k in range(upto + 1)]

    regions = []          # (lo, hi, value_fn, rth_fn, extra breakpoints)
    regions.append((0.0, t0, lambda x: g1.eval(x), lambda x: np.zeros(np.shape(x)), ()))
    regions.append((
        t0, t1,
        lambda x: blend_value(x, poly_derivs(g1, x, 0), [G.value(x)], lo_anchor, lo_width),
        lambda x: blend_rth(x, poly_derivs(g1, x, r), G_derivs(x, r), lo_anchor, lo_width),
        (),
    ))
    regions.append((t1, tj, lambda x: G.value(x), lambda x: G.gamma_derivative(x, r), tuple(pts)))
    regions.append((
        tj, tj1,
        lambda x: blend_value(x, [G.value(x)], poly_derivs(g3, x, 0), hi_anchor, hi_width),
        lambda x: blend_rth(x, G_derivs(x, r), poly_derivs(g3, x, r), hi_anchor, hi_width),
        (),
    ))
    regions.append((tj1, math.inf, lambda x: g3.eval(x), lambda x: np.zeros(np.shape(x)), ()))

    approx_acc, semi_acc = [], []
    for lo, hi, val_fn, rth_fn, extra in regions:
        local = _window_cfg(cfg, g, lo, hi, extra=extra)

        def diff_fn(x, val_fn=val_fn):
            xv = np.asarray(x, dtype=float)
            return (np.asarray(f.eval(xv), dtype=float) - val_fn(xv)) * w.eval(xv)

        def semi_fn(x, rth_fn=rth_fn):
            xv = np.asarray(x, dtype=float)
            return np.asarray(rth_fn(xv), dtype=float) * xv ** (r / 2.0) * w.eval(xv)

        if math.isinf(p):
            approx_acc.append(refine_sup(diff_fn, lo, hi, local))
            semi_acc.append(refine_sup(semi_fn, lo, hi, local))
        else:
            av, _ = integrate(lambda x: np.abs(diff_fn(x)) ** p, lo, hi, local)
            sv, _ = integrate(lambda x: np.abs(semi_fn(x)) ** p, lo, hi, local)
            approx_acc.append(av)
            semi_acc.append(sv)
    if math.isinf(p):
        approx = max(approx_acc)
        semi = t ** r * max(semi_acc)
    else:
        approx = sum(approx_acc) ** (1.0 / p)
        semi = t ** r * sum(semi_acc) ** (1.0 / p)
    return approx + semi, approx, semi, f"glued[h={t:.6g}]"


# ---------------------------------------------------------------------------
# the difference-integral identity (corrected form)


def difference_integral_identity_check(
    f: RealFunction,
    g: GammaFunction,
    r: int,
    h: float,
    x: float,
    cfg: QuadratureConfig | None = None,
) -> tuple[float, float]:
    """Both sides of the forward-difference / iterated-integral identity.

    For r = 1 the exact identity is D^1 f(x) = int_0^s f_gamma'(x+u)
    gamma'(x+u) du with s = gamma^{-1}(h) sqrt(x) (the slope factor must ride
    at x + u, not at u); for r = 2 the uniform-step difference matches the
    classical nested integral of f'' over (0, s)^2, which is evaluated
    exactly as a one-dimensional integral against the triangular cross
    section.  No general-r gamma-weighted form is attempted.
    """
    if r not in (1, 2):
        raise ValueError("the identity check covers r in {1, 2}")
    if f.classical_derivs is None:
        raise GammaCalcError("the check needs closed-form classical derivatives")
    cfg = cfg or QuadratureConfig(rel_tol=1e-10, abs_tol=1e-14)
    s = float(g.eval_inverse(h)) * math.sqrt(x)
    lhs = float(_forward_difference_step(f, r, float(g.eval_inverse(h)), x))
    breaks = [b - x for b in g.breakpoints if x < b < x + r * s]
    if r == 1:
        def integrand(u):
            xv = x + np.asarray(u, dtype=float)
            fp = np.asarray(f.classical_derivs(xv, 1), dtype=float)
            gp = np.asarray(g.derivative(xv, 1), dtype=float)
            return (fp / gp) * gp

        rhs, _ = integrate(integrand, 0.0, s, cfg, breakpoints=breaks)
    else:
        def integrand(v):
            xv = x + np.asarray(v, dtype=float)
            cross = np.minimum(np.asarray(v, dtype=float), 2.0 * s - np.asarray(v, dtype=float))
            return np.asarray(f.classical_derivs(xv, 2), dtype=float) * cross

        rhs, _ = integrate(integrand, 0.0, 2.0 * s, cfg, breakpoints=[s, *breaks])
    return lhs, rhs
