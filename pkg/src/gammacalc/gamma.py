"""The change of variable gamma on the semiaxis and its calculus.

The working object is a strictly increasing map built from fractional powers:
given singular points 0 < a_1 < ... < a_N and exponents 0 < beta_k < 1/r_max,

    gamma0(x) = sum_k |x - a_k|^beta_k * sgn(x - a_k) + sum_k a_k^beta_k,

continued linearly as c1*x + c2 for x >= a_N + 1, with c1, c2 chosen so the
join is C^1.  gamma0 has infinite slope exactly at the a_k, which is what
repairs fractional-power kinks of functions composed through it.  An affine
variant gamma(x) = a*x + b is kept as the exactness oracle for all
gamma-derivative code (there the r-th gamma-derivative is f^(r)/a^r).

Higher derivatives of the inverse are closed-form: with B(n, l) the partial
Bell polynomials in gamma', gamma'', ... the Cramer-rule solution of the
Faa di Bruno system for gamma^{-1}(gamma(x)) = x gives, for r >= 2,

    (gamma^{-1})^(r)(y) = (-1)^(r+1) det(B) / gamma'(x)^(r(r+1)/2),

with B the lower-Hessenberg matrix [B(i+1, j)]_{i,j=1..r-1}.  Under
beta_k < 1/r these derivatives tend to 0 at y = gamma(a_k).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .bell import bell_polynomial
from .errors import BreakpointWarning, DomainError, GammaCalcError, SingularPointError

_BISECT_WIDTH = 1e-8       # bracket width before Newton polish
_OFFSET_SWITCH = 1e-6      # predicted |x - a_k| below which the offset coordinate is used


@dataclass(frozen=True)
class GammaSpec:
    """Parameters of the piecewise fractional-power construction."""

    a: tuple[float, ...]
    beta: tuple[float, ...]
    r_max: int = 3

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        if len(self.a) < 1:
            raise ValueError("need at least one singular point")
        if len(self.a) != len(self.beta):
            raise ValueError("a and beta must have the same length")
        if self.a[0] <= 0 or any(x >= y for x, y in zip(self.a, self.a[1:])):
            raise ValueError(f"singular points must be strictly increasing and positive: {self.a}")
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")
        bound = 1.0 / self.r_max
        if any(not (0.0 < b < bound) for b in self.beta):
            raise ValueError(
                f"exponents must lie in (0, 1/r_max) = (0, {bound:g}): {self.beta}"
            )

    @property
    def n_points(self) -> int:
        return len(self.a)

    def to_dict(self) -> dict:
        return {"a": list(self.a), "beta": list(self.beta), "r_max": self.r_max}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaSpec":
        return cls(a=tuple(d["a"]), beta=tuple(d["beta"]), r_max=int(d.get("r_max", 3)))


def _maybe_scalar(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


class _GammaBase:
    """Shared plumbing for the two gamma variants."""

    def __call__(self, x):
        return self.eval(x)

    def inverse_derivs_at(self, x, max_order: int) -> np.ndarray:
        """(gamma^{-1})^(i)(gamma(x)) for i = 1..max_order, from x directly.

        Vectorized over x; avoids any numerical inversion, so it is the fast
        path used inside quadratures.  x must stay off the singular points.
        """
        x = np.asarray(x, dtype=float)
        derivs = [self.derivative(x, j) for j in range(1, max_order + 1)]
        out = np.empty((max_order,) + x.shape)
        for n in range(1, max_order + 1):
            out[n - 1] = _inverse_deriv_from_gamma_derivs(derivs[:n], n)
        return out


def _inverse_deriv_from_gamma_derivs(derivs: Sequence, r: int):
    """Cramer-rule value of (gamma^{-1})^(r) from gamma', ..., gamma^(r) at x."""
    g1 = derivs[0]
    if r == 1:
        return 1.0 / g1
    size = r - 1
    g1_arr = np.asarray(g1, dtype=float)
    mat = np.zeros(g1_arr.shape + (size, size))
    for i in range(1, size + 1):        # row i holds B(i+1, .)
        n = i + 1
        for j in range(1, min(i + 1, size) + 1):
            mat[..., i - 1, j - 1] = bell_polynomial(n, j, derivs[: n - j + 1])
    det = np.linalg.det(mat)
    sign = -1.0 if r % 2 == 0 else 1.0
    return sign * det / g1_arr ** (r * (r + 1) // 2)


@dataclass(frozen=True)
class AffineGamma(_GammaBase):
    """gamma(x) = a*x + b with a != 0; the classical-calculus oracle."""

    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("affine slope must be nonzero")

    @property
    def singular_points(self) -> tuple[float, ...]:
        return ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    @property
    def r_max(self) -> int:
        return 64            # inverse is affine; any order is exact

    def eval(self, x):
        arr = np.asarray(x, dtype=float)
        return _maybe_scalar(self.a * arr + self.b, np.isscalar(x))

    def eval_inverse(self, y):
        arr = np.asarray(y, dtype=float)
        return _maybe_scalar((arr - self.b) / self.a, np.isscalar(y))

    def derivative(self, x, j: int):
        if j < 1:
            raise ValueError("derivative order must be >= 1")
        arr = np.asarray(x, dtype=float)
        val = np.full(arr.shape, self.a if j == 1 else 0.0)
        return _maybe_scalar(val, np.isscalar(x))

    def inverse_derivative(self, y, r: int) -> float:
        if r < 1:
            raise ValueError("derivative order must be >= 1")
        return 1.0 / self.a if r == 1 else 0.0


@dataclass(frozen=True)
class PiecewiseRootGamma(_GammaBase):
    """The fractional-power construction; build through :func:`build_gamma`."""

    spec: GammaSpec
    c1: float
    c2: float
    x_lin: float

    @property
    def singular_points(self) -> tuple[float, ...]:
        return self.spec.a

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.spec.a + (self.x_lin,)

    @property
    def r_max(self) -> int:
        return self.spec.r_max

    @property
    def y_lin(self) -> float:
        """gamma value at the linear joint."""
        return self.c1 * self.x_lin + self.c2

    def _gamma0(self, arr: np.ndarray) -> np.ndarray:
        a = np.asarray(self.spec.a)
        b = np.asarray(self.spec.beta)
        d = arr[..., None] - a
        return np.sum(np.abs(d) ** b * np.sign(d), axis=-1) + np.sum(a ** b)

    def eval(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0):
            raise DomainError(f"gamma is defined on [0, inf), got x={x}")
        out = np.where(arr <= self.x_lin, self._gamma0(np.minimum(arr, self.x_lin)),
                       self.c1 * arr + self.c2)
        return _maybe_scalar(out, np.isscalar(x))

    def derivative(self, x, j: int):
        """Closed-form gamma^(j)(x); infinite-slope points a_k are rejected."""
        if j < 1:
            raise ValueError("derivative order must be >= 1")
        if j > self.spec.r_max + 1:
            raise ValueError(f"order {j} exceeds r_max + 1 = {self.spec.r_max + 1}")
        arr = np.asarray(x, dtype=float)
        d = arr[..., None] - np.asarray(self.spec.a)
        if np.any(d == 0.0):
            raise SingularPointError(
                "gamma' is infinite at the singular points; requested x hits one"
            )
        if np.any(arr == self.x_lin):
            if j >= 2:
                warnings.warn(
                    "derivative order >= 2 at the linear joint is one-sided; "
                    "returning the linear-branch value",
                    BreakpointWarning,
                    stacklevel=2,
                )
        b = np.asarray(self.spec.beta)
        fall = np.ones_like(b)
        for i in range(j):
            fall = fall * (b - i)
        nonlin = np.sum(
            fall * np.abs(d) ** (b - j) * np.sign(d) ** (j + 1), axis=-1
        )
        lin = self.c1 if j == 1 else 0.0
        out = np.where(arr < self.x_lin, nonlin, lin)
        return _maybe_scalar(out, np.isscalar(x))

    def eval_inverse(self, y):
        if np.isscalar(y):
            return self._inverse_scalar(float(y))
        arr = np.asarray(y, dtype=float)
        out = np.array([self._inverse_scalar(float(v)) for v in arr.ravel()])
        return out.reshape(arr.shape)

    def _inverse_scalar(self, y: float) -> float:
        if y < 0:
            raise DomainError(f"gamma^(-1) is defined on [0, inf), got y={y}")
        if y == 0.0:
            return 0.0
        y_lin = self.y_lin
        if y >= y_lin:
            return (y - self.c2) / self.c1
        lo, hi = 0.0, self.x_lin
        while hi - lo > _BISECT_WIDTH:
            mid = 0.5 * (lo + hi)
            if self._gamma0(np.asarray(mid)) < y:
                lo = mid
            else:
                hi = mid
        # Safeguarded Newton polish: near the a_k the fractional power makes
        # raw Newton diverge (step factor 1 - 1/beta), so a candidate is kept
        # only if it stays inside the bracket and reduces the residual;
        # otherwise the step degrades to a bisection step.
        x = 0.5 * (lo + hi)
        res = float(self._gamma0(np.asarray(x))) - y
        for _ in range(80):
            if res == 0.0 or hi - lo <= 4e-16 * max(1.0, abs(x)):
                break
            if res < 0.0:
                lo = x
            else:
                hi = x
            cand = None
            if min(abs(x - ak) for ak in self.spec.a) > 0.0:
                slope = float(self.derivative(x, 1))
                if math.isfinite(slope) and slope > 0.0:
                    cand = x - res / slope
            if cand is None or not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
            cand_res = float(self._gamma0(np.asarray(cand))) - y
            if abs(cand_res) < abs(res):
                x, res = cand, cand_res
            else:
                mid = 0.5 * (lo + hi)
                mid_res = float(self._gamma0(np.asarray(mid))) - y
                if abs(mid_res) < abs(res):
                    x, res = mid, mid_res
                elif mid_res < 0.0:
                    lo = mid
                else:
                    hi = mid
        return x

    def inverse_derivative(self, y: float, r: int) -> float:
        """(gamma^{-1})^(r)(y) via the Cramer/Bell closed form.

        Exactly at y = gamma(a_k) the limit value 0 is returned for every
        order (the beta_k < 1/r_max condition makes the limits vanish); very
        close to gamma(a_k) the offset x - a_k is reconstructed from y in the
        offset coordinate, since the absolute position loses it to rounding.
        """
        if r < 1:
            raise ValueError("derivative order must be >= 1")
        if r > self.spec.r_max:
            raise ValueError(f"order {r} exceeds r_max = {self.spec.r_max}")
        if y <= 0:
            raise DomainError(f"need y > 0, got y={y}")
        y_lin = self.y_lin
        if y == y_lin:
            warnings.warn(
                "inverse derivative at the linear joint is one-sided for "
                "orders >= 2; returning the linear-branch value",
                BreakpointWarning,
                stacklevel=2,
            )
            return 1.0 / self.c1 if r == 1 else 0.0
        if y > y_lin:
            return 1.0 / self.c1 if r == 1 else 0.0

        a = self.spec.a
        beta = self.spec.beta
        gamma_at_a = [float(self.eval(ak)) for ak in a]
        k_star = min(range(len(a)), key=lambda k: abs(y - gamma_at_a[k]))
        dy = y - gamma_at_a[k_star]
        if dy == 0.0:
            return 0.0
        if abs(dy) ** (1.0 / beta[k_star]) < _OFFSET_SWITCH:
            # The offset x - a_k is far below what the numeric inversion can
            # resolve; reconstruct it from dy in the offset coordinate.
            offset = self._offset_from_dy(k_star, dy)
        else:
            offset = self._inverse_scalar(y) - a[k_star]
        derivs = [
            self._derivs_near(k_star, offset, j) for j in range(1, r + 1)
        ]
        return float(_inverse_deriv_from_gamma_derivs(derivs, r))

    def _offset_from_dy(self, k_star: int, dy: float) -> float:
        """Solve gamma(a_k + d) - gamma(a_k) = dy for a tiny offset d.

        The |d|^beta_k term dominates; the contribution of the other summands
        is folded in by fixed-point correction (it matters only for N > 1 and
        moderate offsets).
        """
        bk = self.spec.beta[k_star]
        ak = self.spec.a[k_star]
        d = math.copysign(abs(dy) ** (1.0 / bk), dy)
        for _ in range(3):
            corr = 0.0
            for k, (aj, bj) in enumerate(zip(self.spec.a, self.spec.beta)):
                if k == k_star:
                    continue
                u1 = ak + d - aj
                u0 = ak - aj
                corr += abs(u1) ** bj * math.copysign(1.0, u1) - abs(u0) ** bj * math.copysign(1.0, u0)
            core = dy - corr
            if core * math.copysign(1.0, dy) <= 0.0:
                break
            d = math.copysign(abs(core) ** (1.0 / bk), dy)
        return d

    def _derivs_near(self, k_star: int, offset: float, j: int) -> float:
        """gamma^(j)(a_{k_star} + offset) evaluated in the offset coordinate."""
        total = 0.0
        for k, (ak, bk) in enumerate(zip(self.spec.a, self.spec.beta)):
            d = offset if k == k_star else (self.spec.a[k_star] - ak) + offset
            fall = 1.0
            for i in range(j):
                fall *= bk - i
            total += fall * abs(d) ** (bk - j) * math.copysign(1.0, d) ** (j + 1)
        return total


GammaFunction = Union[PiecewiseRootGamma, AffineGamma]


def build_gamma(spec: GammaSpec) -> PiecewiseRootGamma:
    """Assemble the piecewise map with the C^1 linear continuation."""
    x_lin = spec.a[-1] + 1.0
    c1 = sum(b * (x_lin - ak) ** (b - 1.0) for ak, b in zip(spec.a, spec.beta))
    c2 = (
        sum((x_lin - ak) ** b for ak, b in zip(spec.a, spec.beta))
        - c1 * x_lin
        + sum(ak ** b for ak, b in zip(spec.a, spec.beta))
    )
    return PiecewiseRootGamma(spec=spec, c1=c1, c2=c2, x_lin=x_lin)


def tangent_slope_at_zero(g: PiecewiseRootGamma) -> float:
    """sum_k beta_k a_k^(beta_k - 1), the slope bounding gamma from below on [0, a_1]."""
    if not isinstance(g, PiecewiseRootGamma):
        raise GammaCalcError("tangent slope is defined for the piecewise construction")
    return sum(b * ak ** (b - 1.0) for ak, b in zip(g.spec.a, g.spec.beta))
