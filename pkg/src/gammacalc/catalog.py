"""The test-function catalog the experiment harness runs over.

Entries span the regimes the theory cares about: polynomials in gamma
(exact-zero cases for every modulus and K-bound), fractional powers
|x - a_1|^delta singular exactly where gamma repairs smoothness, and smooth
exponential decay.  Every entry is evaluable on (0, inf) with sub-exponential
growth, so all weighted norms are finite.

``weak_gamma_order`` records up to which r the function genuinely belongs to
the gamma-Sobolev class (so it may serve as its own K-functional candidate);
for |x - a_1|^delta this is governed by m = delta / beta_1: the m-th
gamma-derivative near a_1 scales like |x - a_1|^((m - k) beta_1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import GammaPolynomial, RealFunction, gamma_derivative_fn, gamma_poly_derivative
from .gamma import PiecewiseRootGamma

_MAX_ORDER = 3


@dataclass(frozen=True)
class CatalogFunction:
    """A named, evaluable test function with derivative availability flags."""

    id: str
    kind: str
    parameters: dict
    fn: RealFunction
    classical_order: int
    weak_gamma_order: int
    exact_poly: Optional[GammaPolynomial] = None

    def gamma_rth(self, g: PiecewiseRootGamma, r: int) -> Optional[Callable]:
        """Vectorized r-th gamma-derivative, or None when f leaves the class."""
        if r > self.weak_gamma_order:
            return None
        if self.exact_poly is not None:
            return gamma_poly_derivative(self.exact_poly, r).eval
        if self.fn.classical_derivs is not None and r <= min(self.classical_order, g.r_max):
            return gamma_derivative_fn(self.fn, g, r)
        return None


def make_gamma_poly(g: PiecewiseRootGamma, coefficients, fid: str | None = None) -> CatalogFunction:
    poly = GammaPolynomial(tuple(coefficients), g)
    return CatalogFunction(
        id=fid or f"gpoly{poly.degree}",
        kind="gamma_poly",
        parameters={"coefficients": list(poly.coefficients)},
        fn=poly.as_real_function(),
        classical_order=0,
        weak_gamma_order=_MAX_ORDER,
        exact_poly=poly,
    )


def make_piecewise_power(g: PiecewiseRootGamma, delta: float, fid: str) -> CatalogFunction:
    a1 = g.spec.a[0]
    beta1 = g.spec.beta[0]

    def fval(x):
        return np.abs(np.asarray(x, dtype=float) - a1) ** delta

    def fder(x, k):
        u = np.asarray(x, dtype=float) - a1
        coef = 1.0
        for i in range(k):
            coef *= delta - i
        if coef == 0.0:
            return np.zeros_like(u)
        return coef * np.abs(u) ** (delta - k) * np.sign(u) ** k

    m = delta / beta1
    if abs(m - round(m)) < 1e-12:
        m_int = int(round(m))
        if m_int % 2 == 0 and g.spec.n_points == 1:
            weak = _MAX_ORDER          # exactly (gamma - gamma(a1))^m below the joint
        else:
            weak = min(_MAX_ORDER, m_int)
    else:
        weak = min(_MAX_ORDER, int(math.floor(m)))
    return CatalogFunction(
        id=fid,
        kind="piecewise_power",
        parameters={"delta": delta, "a1": a1},
        fn=RealFunction(eval=fval, classical_derivs=fder),
        classical_order=_MAX_ORDER,
        weak_gamma_order=weak,
    )


def make_exp_decay() -> CatalogFunction:
    def fval(x):
        return np.exp(-np.asarray(x, dtype=float))

    def fder(x, k):
        return (-1.0) ** k * np.exp(-np.asarray(x, dtype=float))

    return CatalogFunction(
        id="exp_decay",
        kind="exp_decay",
        parameters={},
        fn=RealFunction(eval=fval, classical_derivs=fder),
        classical_order=_MAX_ORDER,
        weak_gamma_order=_MAX_ORDER,
    )


def make_x_exp_half() -> CatalogFunction:
    def fval(x):
        arr = np.asarray(x, dtype=float)
        return arr * np.exp(-arr / 2.0)

    def fder(x, k):
        arr = np.asarray(x, dtype=float)
        return (-0.5) ** k * (arr - 2.0 * k) * np.exp(-arr / 2.0)

    return CatalogFunction(
        id="x_exp_half",
        kind="smooth_classical",
        parameters={},
        fn=RealFunction(eval=fval, classical_derivs=fder),
        classical_order=_MAX_ORDER,
        weak_gamma_order=_MAX_ORDER,
    )


def make_custom_sum(fid: str, parts: list[tuple[float, CatalogFunction]]) -> CatalogFunction:
    """coef-weighted sum of existing entries; derivative flags take the worst case."""

    def fval(x):
        return sum(c * np.asarray(p.fn.eval(x), dtype=float) for c, p in parts)

    have_derivs = all(p.fn.classical_derivs is not None for _, p in parts)
    fder = None
    if have_derivs:
        def fder(x, k):
            return sum(c * np.asarray(p.fn.classical_derivs(x, k), dtype=float) for c, p in parts)

    return CatalogFunction(
        id=fid,
        kind="custom_sum",
        parameters={"parts": [(c, p.id) for c, p in parts]},
        fn=RealFunction(eval=fval, classical_derivs=fder),
        classical_order=min(p.classical_order for _, p in parts) if have_derivs else 0,
        weak_gamma_order=min(p.weak_gamma_order for _, p in parts),
    )


_GAMMA_POLY_COEFFS = {
    0: (1.0,),
    1: (0.5, 1.0),
    2: (0.3, -0.7, 0.5),
    3: (0.2, 0.4, -0.3, 0.25),
}


def default_catalog(g: PiecewiseRootGamma, max_r: int) -> list[CatalogFunction]:
    """Polynomials in gamma up to degree max_r, the singular powers, smooth decay."""
    beta1 = g.spec.beta[0]
    entries = [make_gamma_poly(g, _GAMMA_POLY_COEFFS[d]) for d in range(min(max_r, 3) + 1)]
    entries.extend(
        [
            make_piecewise_power(g, beta1, "power_beta1"),
            make_piecewise_power(g, 2.0 * beta1, "power_2beta1"),
            make_piecewise_power(g, 1.0, "power_lin"),
            make_exp_decay(),
            make_x_exp_half(),
        ]
    )
    return entries


def catalog_by_id(entries: list[CatalogFunction]) -> dict[str, CatalogFunction]:
    return {e.id: e for e in entries}
