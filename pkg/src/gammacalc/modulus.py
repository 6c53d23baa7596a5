"""Forward differences in the gamma scale and the moduli of smoothness.

The r-th forward difference uses the step s = gamma^{-1}(h) sqrt(x):

    D^r f(x) = sum_k (-1)^(r-k) C(r,k) f(x + k s),

the main part of the modulus is the sup over 0 < h <= t of the weighted
window norm of D^r f, and the complete modulus adds the best approximation
errors by polynomials in gamma (degree r-1) on the leftover near-zero and
tail intervals.  The sup is discretized by a geometric grid h_i = t rho^i;
the grid max is a controlled lower bound of the sup and is stable under
refinement, which the verification suite checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .calculus import GammaPolynomial, RealFunction, gamma_poly_derivative
from .errors import ApproximationError, DomainError
from .gamma import GammaFunction
from .quadrature import QuadratureConfig, gl_nodes, integrate, refine_sup
from .weights import LaguerreWeight, NormSpec, weighted_lp_norm, window_interval

DEFAULT_H_POINTS = 24
DEFAULT_H_RATIO = 0.75


@dataclass(frozen=True)
class ModulusResult:
    """All components of the complete modulus at one scale t."""

    t: float
    omega_main: float
    tail_zero: float
    tail_infinity: float
    omega_complete: float
    h_grid: tuple[float, ...]
    per_h_norms: tuple[float, ...]
    achieving_polys: tuple[GammaPolynomial, GammaPolynomial]

    def __post_init__(self):
        if any(v < 0 for v in (self.omega_main, self.tail_zero, self.tail_infinity)):
            raise ValueError("modulus components must be nonnegative")


def geometric_h_grid(t: float, n_h: int = DEFAULT_H_POINTS, rho: float = DEFAULT_H_RATIO):
    return tuple(t * rho ** i for i in range(n_h))


def forward_difference(f: RealFunction, g: GammaFunction, r: int, h: float, x):
    """D^r f(x); every node x + k gamma^{-1}(h) sqrt(x) must lie in f's domain."""
    s_unit = float(g.eval_inverse(h))
    return _forward_difference_step(f, r, s_unit, x)


def _forward_difference_step(f: RealFunction, r: int, s_unit: float, x):
    arr = np.asarray(x, dtype=float)
    step = s_unit * np.sqrt(arr)
    lo, hi = f.domain
    out = np.zeros_like(arr)
    for k in range(r + 1):
        nodes = arr + k * step
        if np.any(nodes <= lo) or np.any(nodes >= hi):
            bad = nodes[(nodes <= lo) | (nodes >= hi)]
            raise DomainError(
                f"stencil node k={k} leaves the domain ({lo}, {hi}): x+k*step={bad[:3]!r}"
            )
        out = out + (-1) ** (r - k) * math.comb(r, k) * np.asarray(f.eval(nodes), dtype=float)
    return float(out) if np.isscalar(x) else out


def _stencil_breakpoints(g: GammaFunction, r: int, s_unit: float, lo: float, hi: float):
    """Window points where some stencil node crosses a gamma kink.

    Solving x + k s sqrt(x) = b gives sqrt(x) = (-k s + sqrt(k^2 s^2 + 4 b))/2.
    """
    pts = []
    for b in g.breakpoints:
        for k in range(r + 1):
            disc = k * k * s_unit * s_unit + 4.0 * b
            root = 0.5 * (-k * s_unit + math.sqrt(disc))
            if root > 0:
                x = root * root
                if lo < x < hi:
                    pts.append(x)
    return pts


def windowed_difference_norm(
    f: RealFunction,
    g: GammaFunction,
    r: int,
    h: float,
    p: float,
    alpha: float,
    cfg: QuadratureConfig,
    A1: float,
    A2: float,
) -> float:
    """|| w_a D^r f ||_{L^p(I(r,h))} for a single step h."""
    win = window_interval(g, r, h, A1, A2)
    s_unit = float(g.eval_inverse(h))
    w = LaguerreWeight(alpha)
    breaks = _stencil_breakpoints(g, r, s_unit, win.lo, win.hi)

    def integrand(x):
        return _forward_difference_step(f, r, s_unit, x) * w.eval(x)

    local = cfg.with_breakpoints(breaks)
    if math.isinf(p):
        return refine_sup(integrand, win.lo, win.hi, local)
    val, _ = integrate(lambda x: np.abs(integrand(x)) ** p, win.lo, win.hi, local)
    return val ** (1.0 / p)


def main_modulus(
    f: RealFunction,
    g: GammaFunction,
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
    norm_cache: Optional[dict] = None,
    cache_key=None,
):
    """Main part of the modulus: grid max over h <= t of the window norms.

    Returns (omega, h_grid, per_h_norms).  An explicit h_grid overrides the
    default geometric one (the harness passes a lattice shared across t so
    per-h norms are reused); entries above t are rejected.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    window_interval(g, r, t, A1, A2)          # validates admissibility of every h <= t
    grid = tuple(h_grid) if h_grid is not None else geometric_h_grid(t, n_h, rho)
    if any(h > t * (1 + 1e-12) or h <= 0 for h in grid):
        raise ValueError("h grid must lie in (0, t]")
    norms = []
    for h in grid:
        key = None
        if norm_cache is not None:
            key = (cache_key, r, p, alpha, A1, A2, h)
            if key in norm_cache:
                norms.append(norm_cache[key])
                continue
        val = windowed_difference_norm(f, g, r, h, p, alpha, cfg, A1, A2)
        if key is not None:
            norm_cache[key] = val
        norms.append(val)
    return max(norms), grid, tuple(norms)


# ---------------------------------------------------------------------------
# best approximation by polynomials in gamma


def _fit_nodes(f, w, g, lo, hi, cfg, n_per_piece=40):
    """Quadrature nodes/weights covering (lo, hi), tail-truncated if needed."""
    if math.isinf(hi):
        # place nodes where the weighted envelope still matters
        probe_hi = max(2.0 * lo, 1.0)
        from .quadrature import _sup_truncation

        def env(x):
            return np.asarray(f.eval(x), dtype=float) * w.eval(x)

        hi = max(_sup_truncation(env, lo, list(cfg.singular_points)), probe_hi)
    pts = sorted(p for p in cfg.singular_points if lo < p < hi)
    edges = np.array([lo, *pts, hi])
    xs, qs = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n, wq = gl_nodes(np.array([a]), np.array([b]), n_per_piece)
        xs.append(n.ravel())
        qs.append(wq.ravel())
    return np.concatenate(xs), np.concatenate(qs)


def _coeffs_from_scaled(cc: np.ndarray, mid: float, half: float) -> tuple[float, ...]:
    """Convert coefficients in u = (y - mid)/half back to plain powers of y."""
    comp = np.polynomial.Polynomial([-mid / half, 1.0 / half])
    out = np.polynomial.Polynomial(cc)(comp)
    return tuple(out.coef)


def best_gamma_poly_error(
    f: RealFunction,
    g: GammaFunction,
    deg: int,
    p: float,
    alpha: float,
    interval: tuple[float, float],
    cfg: QuadratureConfig,
) -> tuple[float, GammaPolynomial]:
    """inf over polynomials q of degree <= deg of || w_a (f - q o gamma) ||_{L^p(interval)}.

    p = 2 is a weighted least-squares solve on quadrature nodes; p = inf runs a
    discrete multiple-exchange iteration started from the L^2 fit; p = 1
    descends the discretized objective coordinate-wise from the L^2 fit.  The
    basis is rescaled to [-1, 1] in the gamma coordinate before the solve, so
    near-collinear powers on tiny intervals stay workable.  The reported error
    is always recomputed by full quadrature, so any fit only ever weakens the
    upper bound, never invalidates it.
    """
    if deg < 0:
        raise ValueError("degree must be >= 0")
    lo, hi = interval
    if not 0 <= lo < hi:
        raise ValueError(f"empty interval {interval}")
    w = LaguerreWeight(alpha)
    xs, qs = _fit_nodes(f, w, g, lo, hi, cfg)
    ys = np.asarray(g.eval(xs), dtype=float)
    wv = w.eval(xs)
    fv = np.asarray(f.eval(xs), dtype=float)
    y_lo, y_hi = float(ys.min()), float(ys.max())
    mid, half = 0.5 * (y_lo + y_hi), 0.5 * max(y_hi - y_lo, 1e-300)
    u = (ys - mid) / half
    vander = np.vander(u, deg + 1, increasing=True)

    # weighted least squares: the p = 2 minimizer and the seed for p != 2
    sq = np.sqrt(qs)
    design = vander * (wv * sq)[:, None]
    rhs = fv * wv * sq
    cc, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    if not np.all(np.isfinite(cc)):
        raise ApproximationError(
            f"least-squares fit failed; basis condition ~ {np.linalg.cond(design):.3e}"
        )

    if math.isinf(p):
        cc = _exchange_minimax(vander, fv, wv, cc)
    elif p != 2:
        cc = _coordinate_descent_lp(vander, fv, wv, qs, p, cc)

    poly = GammaPolynomial(_coeffs_from_scaled(cc, mid, half), g)
    resid = RealFunction(eval=lambda x: np.asarray(f.eval(x), dtype=float) - poly.eval(x),
                         domain=f.domain)
    err = weighted_lp_norm(resid, w, NormSpec(p, interval), cfg)
    return err, poly


def _exchange_minimax(vander, fv, wv, cc, max_iter=40):
    """Discrete weighted minimax by multiple exchange on the node set."""
    n, m = vander.shape
    deg = m - 1
    best_cc = cc
    best_sup = float(np.max(np.abs((fv - vander @ cc) * wv)))
    if best_sup < 1e-14 * max(1.0, float(np.max(np.abs(fv * wv)))):
        return best_cc
    ref = np.unique(np.linspace(0, n - 1, deg + 2).astype(int))
    if len(ref) < deg + 2:
        return best_cc
    for _ in range(max_iter):
        signs = np.array([(-1.0) ** j for j in range(deg + 2)])
        a = np.concatenate([vander[ref] * wv[ref, None], signs[:, None]], axis=1)
        b = fv[ref] * wv[ref]
        try:
            sol = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            break
        cand = sol[:-1]
        level = abs(sol[-1])
        resid = (fv - vander @ cand) * wv
        sup = float(np.max(np.abs(resid)))
        if sup < best_sup:
            best_sup, best_cc = sup, cand
        if sup <= level * (1.0 + 1e-9) or level == 0.0:
            break
        new_ref = _alternating_extrema(resid, deg + 2)
        if new_ref is None or np.array_equal(new_ref, ref):
            break
        ref = new_ref
    return best_cc


def _alternating_extrema(resid, count):
    """Pick `count` sign-alternating local maxima of |resid| along the grid."""
    sign = np.sign(resid)
    sign[sign == 0] = 1.0
    runs = []
    start = 0
    for i in range(1, len(resid)):
        if sign[i] != sign[start]:
            runs.append((start, i))
            start = i
    runs.append((start, len(resid)))
    picks = [a + int(np.argmax(np.abs(resid[a:b]))) for a, b in runs]
    if len(picks) < count:
        return None
    # keep the strongest consecutive window of the required length
    mags = np.abs(resid[picks])
    best_i = 0
    best_m = -1.0
    for i in range(len(picks) - count + 1):
        m = float(np.min(mags[i : i + count]))
        if m > best_m:
            best_m, best_i = m, i
    return np.array(picks[best_i : best_i + count])


def _coordinate_descent_lp(vander, fv, wv, qs, p, cc, sweeps=4):
    """Cyclic coordinate descent on the discretized L^p objective."""
    cc = np.array(cc, dtype=float)

    def objective(c):
        return float(np.sum(qs * (np.abs(fv - vander @ c) * wv) ** p))

    for _ in range(sweeps):
        for k in range(len(cc)):
            base = cc.copy()

            def along(v):
                base[k] = v
                return objective(base)

            width = 1.0 + abs(cc[k])
            res = minimize_scalar(
                along, bounds=(cc[k] - width, cc[k] + width), method="bounded"
            )
            if res.fun <= objective(cc):
                cc[k] = float(res.x)
    return cc


def primed_constants(A1: float, A2: float) -> tuple[float, float]:
    """The shifted window constants the splitting argument introduces."""
    s1 = math.sqrt(A1)
    return 0.5 * s1 * (1.0 + 2.0 * s1), 2.0 * s1 * A2 / (1.0 + 2.0 * s1)


def complete_modulus(
    f: RealFunction,
    g: GammaFunction,
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
    norm_cache: Optional[dict] = None,
    cache_key=None,
) -> ModulusResult:
    """Main part plus the two best-approximation tails at scale t."""
    omega, grid, norms = main_modulus(
        f, g, r, t, p, alpha, cfg, A1, A2, n_h, rho, h_grid, norm_cache, cache_key
    )
    win = window_interval(g, r, t, A1, A2)
    tail_zero, poly_zero = best_gamma_poly_error(
        f, g, r - 1, p, alpha, (0.0, win.lo), cfg
    )
    tail_inf, poly_inf = best_gamma_poly_error(
        f, g, r - 1, p, alpha, (win.hi, math.inf), cfg
    )
    return ModulusResult(
        t=t,
        omega_main=omega,
        tail_zero=tail_zero,
        tail_infinity=tail_inf,
        omega_complete=omega + tail_zero + tail_inf,
        h_grid=grid,
        per_h_norms=norms,
        achieving_polys=(poly_zero, poly_inf),
    )
