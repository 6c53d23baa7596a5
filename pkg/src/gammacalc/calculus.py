"""Gamma-relative differentiation and the polynomial calculus built on it.

The r-th gamma-derivative of f at x is the classical r-th derivative of
F = f o gamma^{-1} at y = gamma(x); all numeric routes go through that
equivalence because nesting the defining difference quotients directly is
unstable.  Three interchangeable methods are provided and cross-validate each
other:

* ``difference_quotient`` -- nested quotient limits realized as divided
  differences of f against the actual gamma increments, on nodes uniform in
  the gamma coordinate, Richardson-extrapolated over four step sizes;
* ``via_inverse_composition`` -- central finite-difference stencil for F on a
  uniform gamma grid, Richardson-extrapolated the same way;
* ``via_faa_di_bruno`` -- exact combination of f's classical derivatives with
  the closed-form derivatives of gamma^{-1}.

Gamma-polynomials (p o gamma) differentiate formally and exactly; their
(m+1)-th gamma-derivative vanishes, which pins down every numeric method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bell import bell_polynomial, faa_di_bruno
from .errors import DomainError, GammaCalcError, SingularPointError
from .gamma import GammaFunction
from .quadrature import QuadratureConfig, integrate

_METHODS = ("difference_quotient", "via_inverse_composition", "via_faa_di_bruno")


@dataclass(frozen=True)
class RealFunction:
    """An evaluable scalar function on a subinterval of (0, inf).

    ``eval`` must accept numpy arrays.  ``classical_derivs(x, order)`` returns
    the order-th classical derivative where it exists (order >= 1), also
    vectorized; it is optional and unlocks the exact Faa di Bruno route.
    """

    eval: Callable
    classical_derivs: Optional[Callable] = None
    domain: tuple[float, float] = (0.0, math.inf)

    def __call__(self, x):
        return self.eval(x)

    def require_inside(self, x):
        lo, hi = self.domain
        arr = np.asarray(x, dtype=float)
        if np.any(arr <= lo) or np.any(arr >= hi):
            raise DomainError(f"point outside domain ({lo}, {hi})")


@dataclass(frozen=True)
class GammaJet:
    """Base point plus gamma-derivative values d_0..d_n at that point."""

    base_point: float
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("a jet needs at least the order-0 value")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def order(self) -> int:
        return len(self.values) - 1

    def to_array(self) -> np.ndarray:
        return np.array([self.base_point, *self.values])

    @classmethod
    def from_array(cls, arr) -> "GammaJet":
        arr = np.asarray(arr, dtype=float)
        return cls(base_point=float(arr[0]), values=tuple(arr[1:]))


@dataclass(frozen=True)
class GammaPolynomial:
    """x -> sum_k c_k (gamma(x) - center)^k, the polynomial class of the calculus."""

    coefficients: tuple[float, ...]
    gamma: GammaFunction
    center: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        if not coeffs:
            coeffs = (0.0,)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def eval(self, x):
        u = np.asarray(self.gamma.eval(x), dtype=float) - self.center
        out = np.zeros_like(u)
        for c in reversed(self.coefficients):
            out = out * u + c
        return float(out) if np.isscalar(x) else out

    __call__ = eval

    def eval_at_gamma(self, y):
        """Value as a function of the gamma coordinate y."""
        u = np.asarray(y, dtype=float) - self.center
        out = np.zeros_like(u)
        for c in reversed(self.coefficients):
            out = out * u + c
        return out

    def as_real_function(self) -> RealFunction:
        return RealFunction(eval=self.eval)

    def to_array(self) -> np.ndarray:
        return np.array([self.center, *self.coefficients])

    @classmethod
    def from_array(cls, arr, gamma: GammaFunction) -> "GammaPolynomial":
        arr = np.asarray(arr, dtype=float)
        return cls(coefficients=tuple(arr[1:]), gamma=gamma, center=float(arr[0]))


def gamma_poly_derivative(p: GammaPolynomial, r: int) -> GammaPolynomial:
    """Formal r-th gamma-derivative of a gamma-polynomial (exact)."""
    if r < 0:
        raise ValueError("order must be >= 0")
    if r == 0:
        return p
    if r > p.degree:
        return GammaPolynomial((0.0,), p.gamma, p.center)
    coeffs = [
        p.coefficients[k] * math.factorial(k) / math.factorial(k - r)
        for k in range(r, p.degree + 1)
    ]
    return GammaPolynomial(tuple(coeffs), p.gamma, p.center)


def leibniz_gamma(jf: GammaJet, jg: GammaJet) -> GammaJet:
    """Jet of the product f*g from the jets of the factors."""
    if jf.base_point != jg.base_point:
        raise ValueError(
            f"jets must share the base point, got {jf.base_point} != {jg.base_point}"
        )
    if jf.order != jg.order:
        raise ValueError("jets must have the same length")
    n = jf.order
    vals = [
        sum(math.comb(m, k) * jf.values[k] * jg.values[m - k] for k in range(m + 1))
        for m in range(n + 1)
    ]
    return GammaJet(base_point=jf.base_point, values=tuple(vals))


def taylor_gamma(jet: GammaJet, g: GammaFunction) -> GammaPolynomial:
    """Generalized Taylor polynomial sum_k d_k / k! (gamma(x) - gamma(x0))^k."""
    coeffs = tuple(d / math.factorial(k) for k, d in enumerate(jet.values))
    return GammaPolynomial(coeffs, g, center=float(g.eval(jet.base_point)))


# ---------------------------------------------------------------------------
# numeric gamma-derivatives


def _check_off_singular(g: GammaFunction, x: float):
    for ak in g.singular_points:
        if abs(x - ak) < 1e-12:
            raise SingularPointError(
                f"gamma-derivative at x={x} sits on the singular point a={ak}"
            )


def _divided_difference(ys, fs) -> float:
    dd = list(fs)
    n = len(dd)
    for level in range(1, n):
        for i in range(n - level):
            dd[i] = (dd[i + 1] - dd[i]) / (ys[i + level] - ys[i])
    return dd[0]


_RICHARDSON_RATIO = math.sqrt(2.0)   # mild ratio keeps the finest step off rounding noise


def _richardson_even(estimate, delta0: float, levels: int = 4) -> float:
    """Extrapolate an even-power error series over delta0 / ratio^k."""
    table = [estimate(delta0 / _RICHARDSON_RATIO ** k) for k in range(levels)]
    for m in range(1, levels):
        fac = _RICHARDSON_RATIO ** (2 * m)
        table = [
            (fac * table[k + 1] - table[k]) / (fac - 1.0)
            for k in range(levels - m)
        ]
    return table[0]


def _auto_step(g: GammaFunction, y0: float, r: int, base_step: float | None) -> float:
    if base_step is not None:
        return base_step
    step = 0.08 * max(1.0, abs(y0))
    if y0 > 0:
        step = min(step, 1.8 * y0 / (r + 1.0))   # keep every node at y > 0
    # keep the stencil (half-width r/2 * step) inside one smooth piece of
    # f o gamma^{-1} where possible: across gamma(a_k) the (r+1)-th derivative
    # blows up and across the linear joint the second derivative jumps; the
    # absolute floor concedes kink-crossing right next to a kink rather than
    # drown the quotients in rounding noise
    kinks = [float(g.eval(b)) for b in g.breakpoints]
    if kinks:
        dist = min(abs(y0 - yk) for yk in kinks)
        step = min(step, max(1.6 * dist / r, 0.02))
    return max(step, 1e-12)

def _quotient_stencil(f: RealFunction, g: GammaFunction, y0: float, r: int, delta: float) -> float:
    offs = np.arange(r + 1) - r / 2.0
    ys_nominal = y0 + offs * delta
    xs = [g.eval_inverse(float(y)) for y in ys_nominal]
    ys = [float(g.eval(x)) for x in xs]          # actual increments, not nominal
    fs = [float(f.eval(x)) for x in xs]
    return math.factorial(r) * _divided_difference(ys, fs)


def _central_stencil(f: RealFunction, g: GammaFunction, y0: float, r: int, delta: float) -> float:
    ks = np.arange(r + 1)
    ys = y0 + (ks - r / 2.0) * delta
    coeffs = [(-1) ** (r - k) * math.comb(r, k) for k in ks]
    total = 0.0
    for c, y in zip(coeffs, ys):
        total += c * float(f.eval(g.eval_inverse(float(y))))
    return total / delta ** r


def _faa_gamma_deriv(f: RealFunction, g: GammaFunction, x, r: int):
    """Vectorized exact route: f's classical derivatives + inverse derivatives."""
    if f.classical_derivs is None:
        raise GammaCalcError("via_faa_di_bruno requires classical derivatives")
    arr = np.asarray(x, dtype=float)
    inv = g.inverse_derivs_at(arr, r)
    outer = [np.asarray(f.classical_derivs(arr, l), dtype=float) for l in range(1, r + 1)]
    inner = [inv[i] for i in range(r)]
    return faa_di_bruno(outer, inner)


def gamma_derivative(
    f: RealFunction,
    g: GammaFunction,
    x: float,
    r: int,
    method: str = "difference_quotient",
    base_step: float | None = None,
) -> float:
    """r-th gamma-relative derivative of f at x."""
    if r < 1:
        raise ValueError("order must be >= 1")
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {_METHODS}")
    _check_off_singular(g, x)
    f.require_inside(x)
    if method == "via_faa_di_bruno":
        if r > g.r_max:
            raise ValueError(f"order {r} exceeds the gamma r_max = {g.r_max}")
        return float(_faa_gamma_deriv(f, g, np.float64(x), r))
    y0 = float(g.eval(x))
    delta0 = _auto_step(g, y0, r, base_step)
    if method == "difference_quotient":
        est = lambda d: _quotient_stencil(f, g, y0, r, d)
    else:
        est = lambda d: _central_stencil(f, g, y0, r, d)
    return _richardson_even(est, delta0)


def gamma_derivative_fn(f: RealFunction, g: GammaFunction, r: int) -> Callable:
    """Vectorized x -> f_gamma^(r)(x) for f with classical derivatives."""
    if f.classical_derivs is None:
        raise GammaCalcError("needs classical derivatives")

    def rth(x):
        return _faa_gamma_deriv(f, g, x, r)

    return rth


def taylor_remainder(
    f: RealFunction,
    g: GammaFunction,
    x0: float,
    x: float,
    r: int,
    gamma_rth: Callable | None = None,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Integral form of the Taylor error f(x) - T_{r-1}(x).

    Computed in the gamma coordinate, where the measure d(gamma) is flat:
    int_{gamma(x0)}^{gamma(x)} F_r(y) (gamma(x) - y)^(r-1)/(r-1)! dy with
    F_r(y) the r-th gamma-derivative at gamma^{-1}(y).  The substitution
    removes the infinite-slope factor from the integrand; crossing a singular
    point only inserts a breakpoint.
    """
    if r < 1:
        raise ValueError("order must be >= 1")
    if x == x0:
        return 0.0
    cfg = cfg or QuadratureConfig(rel_tol=1e-9, abs_tol=1e-13)
    y0 = float(g.eval(x0))
    y1 = float(g.eval(x))
    if gamma_rth is None:
        if f.classical_derivs is not None:
            gamma_rth = gamma_derivative_fn(f, g, r)
        else:
            gamma_rth = np.vectorize(
                lambda xv: gamma_derivative(f, g, float(xv), r, "difference_quotient")
            )

    fact = math.factorial(r - 1)

    def integrand(y):
        xv = np.asarray(g.eval_inverse(y), dtype=float)
        return np.asarray(gamma_rth(xv), dtype=float) * (y1 - y) ** (r - 1) / fact

    lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
    breaks = [float(g.eval(ak)) for ak in g.singular_points if lo < g.eval(ak) < hi]
    val, _ = integrate(integrand, lo, hi, cfg, breakpoints=breaks)
    return val if y0 < y1 else -val
