"""Laguerre weights, weighted L^p norms, window intervals and time horizons.

The weight is w_a(x) = x^a e^{-x} on (0, inf).  Norms over subintervals use
the adaptive quadrature from :mod:`gammacalc.quadrature` with forced
breakpoints at the gamma kinks; the essential sup (p = inf) is approximated
by the pointwise sup of the continuous representative on a refined grid.

The h-dependent window is

    I(r, h) = [4 A1 r^2 (gamma^{-1}(h))^2,  A2 / (gamma^{-1}(h))^2],

valid only while h <= gamma((A2/A1)^(1/4) / sqrt(2r)).  Inside it the weight
is equivalent along difference stencils: for |x - y| <= r gamma^{-1}(h) sqrt(x),

    e^(-r sqrt(A2)) ((2 sqrt(A1) - 1)/(2 sqrt(A1)))^a
        <= w_a(y)/w_a(x) <=
    e^(r sqrt(A2)) ((2 sqrt(A1) + 1)/(2 sqrt(A1)))^a,

which is what makes the whole construction work on one window at a time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .calculus import RealFunction
from .errors import DomainError, GammaCalcError, InadmissibleStepError
from .gamma import GammaFunction, PiecewiseRootGamma, tangent_slope_at_zero
from .quadrature import QuadratureConfig, integrate, refine_sup


@dataclass(frozen=True)
class LaguerreWeight:
    """w_a(x) = x^a e^{-x}."""

    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            warnings.warn(
                f"alpha={self.alpha} < 0 is outside the acceptance regime; "
                "norms remain valid only while alpha > -1/p",
                UserWarning,
                stacklevel=3,
            )

    def eval(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or (self.alpha <= 0 and np.any(arr == 0.0)):
            raise DomainError(f"weight defined for x > 0 (x >= 0 when alpha > 0), got {x}")
        if self.alpha == 0:
            out = np.exp(-arr)
        else:
            out = np.where(arr > 0, arr, 1.0) ** self.alpha * np.exp(-arr)
            out = np.where(arr > 0, out, 0.0)
        return float(out) if np.isscalar(x) else out

    __call__ = eval


def weight_eval(w: LaguerreWeight, x):
    return w.eval(x)


@dataclass(frozen=True)
class NormSpec:
    """Exponent and interval of a weighted norm; p = math.inf means the sup norm."""

    p: float
    interval: tuple[float, float]

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"need p >= 1, got {self.p}")
        lo, hi = self.interval
        if not (0 <= lo < hi):
            raise ValueError(f"need 0 <= lo < hi, got {self.interval}")

    @property
    def is_sup(self) -> bool:
        return math.isinf(self.p)


def weighted_lp_norm(
    f: RealFunction,
    w: LaguerreWeight,
    spec: NormSpec,
    cfg: QuadratureConfig | None = None,
) -> float:
    """|| f w ||_{L^p(interval)} with singularity-aware adaptive quadrature."""
    cfg = cfg or QuadratureConfig()
    if w.alpha < 0 and not spec.is_sup and w.alpha * spec.p <= -1.0:
        raise GammaCalcError(
            f"alpha={w.alpha} <= -1/p makes the weighted norm divergent near 0"
        )
    lo, hi = spec.interval

    def weighted(x):
        return np.asarray(f.eval(x), dtype=float) * w.eval(x)

    if spec.is_sup:
        return refine_sup(weighted, lo, hi, cfg)
    p = spec.p

    def integrand(x):
        return np.abs(weighted(x)) ** p

    val, _ = integrate(integrand, lo, hi, cfg)
    return val ** (1.0 / p)


@dataclass(frozen=True)
class WindowInterval:
    """The h-dependent interval on which the weight is locally equivalent."""

    r: int
    h: float
    A1: float
    A2: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate window [{self.lo}, {self.hi}]")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def step_admissibility_bound(g: GammaFunction, r: int, A1: float, A2: float) -> float:
    """Largest admissible h for the window at order r."""
    return float(g.eval((A2 / A1) ** 0.25 / math.sqrt(2.0 * r)))


def window_interval(g: GammaFunction, r: int, h: float, A1: float, A2: float) -> WindowInterval:
    if r < 1:
        raise ValueError("r must be a positive integer")
    if A1 <= 0 or A2 <= 0:
        raise ValueError("A1 and A2 must be positive")
    bound = step_admissibility_bound(g, r, A1, A2)
    if not 0 < h <= bound:
        raise InadmissibleStepError(
            f"h={h:g} is outside (0, {bound:.6g}], the admissibility bound for r={r}"
        )
    s = float(g.eval_inverse(h))
    return WindowInterval(r=r, h=h, A1=A1, A2=A2, lo=4.0 * A1 * r * r * s * s, hi=A2 / (s * s))


def weight_equivalence_bounds(
    r: int, A1: float, A2: float, alpha: float
) -> tuple[float, float]:
    """(c_low, c_high) framing w_a(y)/w_a(x) for admissible stencil pairs."""
    if A1 < 0.25:
        raise ValueError(f"need A1 >= 1/4, got {A1}")
    if alpha < 0:
        raise ValueError("the ratio bounds require alpha >= 0")
    s1 = 2.0 * math.sqrt(A1)
    root = r * math.sqrt(A2)
    c_low = math.exp(-root) * ((s1 - 1.0) / s1) ** alpha
    c_high = math.exp(root) * ((s1 + 1.0) / s1) ** alpha
    return c_low, c_high


def default_constants(g: PiecewiseRootGamma) -> tuple[float, float]:
    """A1 = 1 and A2 = a_1^2 / 8, satisfying every constraint the proofs place."""
    if not isinstance(g, PiecewiseRootGamma):
        raise GammaCalcError("window constants are tied to the piecewise construction")
    return 1.0, g.spec.a[0] ** 2 / 8.0


def max_time_horizon(
    g: PiecewiseRootGamma,
    r: int,
    A1: float,
    A2: float,
    variant: str = "upper_construction",
) -> float:
    """Largest usable t for the two regimes of the constructive argument.

    ``upper_construction`` is the eight-way minimum under which the partition,
    index bracketing and Steklov node containment all hold; ``lower_bound`` is
    the much laxer pair needed for the window/weight equivalence alone.
    """
    if not isinstance(g, PiecewiseRootGamma):
        raise GammaCalcError("time horizons are tied to the piecewise construction")
    a1 = g.spec.a[0]
    x_lin = g.x_lin
    s1 = math.sqrt(A1)
    q = 2.0 * s1 / (1.0 + 2.0 * s1)
    admissible = (A2 / A1) ** 0.25 / math.sqrt(2.0 * r)
    if variant == "lower_bound":
        return float(min(g.eval(admissible), g.eval(a1)))
    if variant != "upper_construction":
        raise ValueError(f"unknown variant {variant!r}")
    entries = (
        0.5,
        a1,
        float(g.eval(1.0)),
        float(g.eval(admissible)),
        float(g.eval(a1 * s1 / (r * (1.0 + 2.0 * s1)) * math.sqrt(q))),
        float(g.eval(math.sqrt(q / x_lin))),
        float(g.eval(math.sqrt(x_lin) / (4.0 * A1 * r))),
        float(g.eval(q * math.sqrt(A2 / x_lin))),
    )
    return min(entries)


def full_k_time_horizon(g: PiecewiseRootGamma, r: int, A1: float, A2: float) -> float:
    """Horizon for the glued construction: adds the near-zero/tail splitting terms."""
    a1 = g.spec.a[0]
    s1 = math.sqrt(A1)
    extra = min(
        float(g.eval(a1)),
        float(g.eval(math.sqrt(a1 / (4.0 * r * r * s1 * (1.0 + 2.0 * s1))))),
    )
    return min(max_time_horizon(g, r, A1, A2, "upper_construction"), extra)


def equivalence_time_horizon(
    g: PiecewiseRootGamma, r: int, A1: float, A2: float, alpha: float
) -> float:
    """Horizon for two-sided diagnostics; the alpha-term applies only for alpha > 0."""
    a1 = g.spec.a[0]
    vals = [
        max_time_horizon(g, r, A1, A2, "lower_bound"),
        float(g.eval(math.sqrt(a1 / (8.0 * A1 * r * r)))),
        float(g.eval(math.sqrt(A2 / g.x_lin))),
    ]
    if alpha > 0:
        vals.append(float(g.eval(math.sqrt(A2 / (2.0 * alpha)))))
    return min(vals)


def experiment_time_horizon(
    g: PiecewiseRootGamma, r: int, A1: float, A2: float, alpha: float
) -> float:
    """Strictest horizon: every quantity the harness computes is in regime."""
    return min(
        full_k_time_horizon(g, r, A1, A2),
        equivalence_time_horizon(g, r, A1, A2, alpha),
    )
