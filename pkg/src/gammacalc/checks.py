"""Invariant verification suites behind the `verify` subcommand.

Each check returns its measured margin so a near-miss is visible, and the
suites accept an externally supplied gamma so fault injection (e.g. a flipped
continuation constant) is exercisable from tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bell import bell_polynomial
from .calculus import (
    GammaJet,
    GammaPolynomial,
    RealFunction,
    gamma_derivative,
    gamma_derivative_fn,
    gamma_poly_derivative,
    taylor_gamma,
    taylor_remainder,
)
from .catalog import default_catalog, make_exp_decay
from .gamma import AffineGamma, GammaSpec, PiecewiseRootGamma, build_gamma, tangent_slope_at_zero
from .modulus import (
    best_gamma_poly_error,
    forward_difference,
    main_modulus,
    windowed_difference_norm,
)
from .quadrature import QuadratureConfig, integrate
from .steklov import (
    assemble_G,
    build_bumps,
    build_partition,
    difference_integral_identity_check,
    psi_eval,
    psi_k_gamma_derivative,
    restricted_k_upper,
    steklov_value,
)
from .weights import (
    LaguerreWeight,
    NormSpec,
    default_constants,
    max_time_horizon,
    weight_equivalence_bounds,
    weighted_lp_norm,
    window_interval,
)

SUITES = ("calculus", "weights", "modulus", "kfunctional", "all")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    margin: float          # how far inside the tolerance the check landed (>= 1 is comfortable)
    detail: str


def _result(suite, name, measured, tolerance, detail=""):
    margin = math.inf if measured == 0 else tolerance / measured
    return CheckResult(
        suite=suite,
        name=name,
        passed=measured <= tolerance,
        margin=margin,
        detail=detail or f"measured {measured:.3e} vs tolerance {tolerance:.3e}",
    )


def _default_gamma() -> PiecewiseRootGamma:
    return build_gamma(GammaSpec(a=(1.0,), beta=(0.25,), r_max=3))


def _smooth_f() -> RealFunction:
    return make_exp_decay().fn


# ---------------------------------------------------------------------------


def check_calculus(g: Optional[PiecewiseRootGamma] = None) -> list[CheckResult]:
    g = g or _default_gamma()
    out = []
    rng = np.random.default_rng(20250810)

    xs = np.sort(rng.uniform(0.0, 4.0, 60))
    vals = g.eval(xs)
    out.append(_result("calculus", "gamma_monotone",
                       max(float(np.max(-np.diff(vals))), 0.0), 0.0,
                       "max adjacent decrease"))

    a1 = g.spec.a[0]
    slope0 = tangent_slope_at_zero(g)
    grid = np.linspace(1e-6, a1, 40)
    gv = g.eval(grid)
    viol = max(
        float(np.max(slope0 * grid - gv)),
        float(np.max(gv - g.eval(a1) / a1 * grid)),
    )
    out.append(_result("calculus", "tangent_secant_sandwich", max(viol, 0.0), 1e-12))

    ys = np.linspace(1e-6, float(g.eval(a1)), 40)
    inv = g.eval_inverse(ys)
    viol = max(
        float(np.max(a1 / g.eval(a1) * ys - inv)),
        float(np.max(inv - ys / slope0)),
    )
    out.append(_result("calculus", "inverse_sandwich", max(viol, 0.0), 1e-12))

    join_err = abs(float(g.derivative(g.x_lin - 1e-12, 1)) - g.c1)
    out.append(_result("calculus", "c1_join", join_err, 1e-9))

    worst = 0.0
    for y0 in (0.3, 0.55, 1.4):
        for r in (2, 3):
            hstep = 2e-4
            if r == 2:
                fd = (g.eval_inverse(y0 + hstep) - 2 * g.eval_inverse(y0)
                      + g.eval_inverse(y0 - hstep)) / hstep ** 2
            else:
                fd = (g.eval_inverse(y0 + 2 * hstep) - 2 * g.eval_inverse(y0 + hstep)
                      + 2 * g.eval_inverse(y0 - hstep)
                      - g.eval_inverse(y0 - 2 * hstep)) / (2 * hstep ** 3)
            cf = g.inverse_derivative(y0, r)
            worst = max(worst, abs(cf - fd) / max(abs(fd), 1e-12))
    out.append(_result("calculus", "inverse_deriv_vs_fd", worst, 1e-4))

    near = max(abs(g.inverse_derivative(float(g.eval(a1)) + 1e-6, r)) for r in (2, 3))
    out.append(_result("calculus", "inverse_deriv_vanishes_at_singular_image", near, 1e-3))

    def bell_rec(n, l, args):
        if l == 0:
            return 1.0 if n == 0 else 0.0
        if n == 0:
            return 0.0
        return sum(
            math.comb(n - 1, i - 1) * args[i - 1] * bell_rec(n - i, l - 1, args)
            for i in range(1, n - l + 2)
        )

    worst = 0.0
    for n in range(1, 9):
        args = rng.uniform(-1.5, 1.5, n)
        for l in range(1, n + 1):
            direct = bell_polynomial(n, l, args[: n - l + 1])
            rec = bell_rec(n, l, args)
            worst = max(worst, abs(direct - rec) / max(abs(rec), 1.0))
    out.append(_result("calculus", "bell_recurrence", worst, 1e-10))

    fe = _smooth_f()
    worst = 0.0
    for x in (0.45, 1.6, 3.1):
        for r in (1, 2, 3):
            vals = [
                gamma_derivative(fe, g, x, r, m)
                for m in ("difference_quotient", "via_inverse_composition", "via_faa_di_bruno")
            ]
            scale = max(abs(v) for v in vals)
            worst = max(worst, (max(vals) - min(vals)) / scale)
    out.append(_result("calculus", "method_agreement", worst, 1e-4))

    worst = 0.0
    for deg in (0, 1, 2):
        poly = GammaPolynomial(tuple(rng.uniform(0.3, 1.0, deg + 1)), g)
        fp = poly.as_real_function()
        for x in np.linspace(0.3, 3.0, 9):
            if abs(x - a1) < 1e-3:
                continue
            worst = max(worst, abs(gamma_derivative(fp, g, float(x), deg + 1)))
    out.append(_result("calculus", "gamma_poly_annihilation", worst, 1e-6))

    aff = AffineGamma(2.0, 1.0)
    cube = RealFunction(
        eval=lambda x: np.asarray(x, float) ** 3,
        classical_derivs=lambda x, k: {
            1: 3.0 * np.asarray(x, float) ** 2,
            2: 6.0 * np.asarray(x, float),
            3: 6.0 * np.ones_like(np.asarray(x, float)),
        }.get(k, np.zeros_like(np.asarray(x, float))),
    )
    worst = 0.0
    for x in np.linspace(0.2, 3.0, 10):
        for r in (1, 2, 3):
            exact = {1: 3 * x ** 2, 2: 6 * x, 3: 6.0}[r] / 2.0 ** r
            for m in ("difference_quotient", "via_inverse_composition", "via_faa_di_bruno"):
                v = gamma_derivative(cube, aff, float(x), r, m)
                worst = max(worst, abs(v - exact) / abs(exact))
    out.append(_result("calculus", "affine_reduction", worst, 1e-6))

    # composition laws: gamma-derivs of f o gamma^{-1} at y vs classical, and
    # (q o gamma) differentiating to q' o gamma
    poly = GammaPolynomial((0.2, -0.4, 1.0), g)
    fp = poly.as_real_function()
    worst = 0.0
    for x in (0.5, 1.7, 2.8):
        lhs = gamma_derivative(fp, g, x, 1)
        rhs = gamma_poly_derivative(poly, 1).eval(x)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-12))
    out.append(_result("calculus", "composition_laws", worst, 1e-6))

    # partial integration on a kink-free interval
    q = QuadratureConfig(rel_tol=1e-10, abs_tol=1e-14)
    a, b = 1.2, 1.9
    fe_rth = gamma_derivative_fn(fe, g, 1)
    gp = GammaPolynomial((0.0, 1.0), g)

    def int1(x):
        return np.asarray(fe_rth(x)) * gp.eval(x) * np.asarray(g.derivative(x, 1))

    def int2(x):
        return np.asarray(fe.eval(x)) * gamma_poly_derivative(gp, 1).eval(x) * np.asarray(g.derivative(x, 1))

    lhs = integrate(int1, a, b, q)[0] + integrate(int2, a, b, q)[0]
    rhs = fe.eval(b) * gp.eval(b) - fe.eval(a) * gp.eval(a)
    out.append(_result("calculus", "partial_integration", abs(lhs - rhs), 1e-8))

    # Taylor consistency at order 2
    x0, x1 = 0.5, 2.2
    jet = GammaJet(x0, (float(fe.eval(x0)), gamma_derivative(fe, g, x0, 1, "via_faa_di_bruno")))
    T = taylor_gamma(jet, g)
    rem = taylor_remainder(fe, g, x0, x1, 2)
    direct = float(fe.eval(x1)) - T.eval(x1)
    out.append(_result("calculus", "taylor_consistency", abs(rem - direct), 1e-6))
    return out


def check_weights(g: Optional[PiecewiseRootGamma] = None) -> list[CheckResult]:
    g = g or _default_gamma()
    out = []
    rng = np.random.default_rng(42)
    cfg = QuadratureConfig(rel_tol=1e-9, abs_tol=1e-13, singular_points=g.breakpoints)

    join_err = abs(float(g.derivative(g.x_lin - 1e-12, 1)) - g.c1)
    out.append(_result("weights", "c1_join", join_err, 1e-9))

    one = RealFunction(eval=lambda x: np.ones_like(np.asarray(x, float)))
    n1 = weighted_lp_norm(one, LaguerreWeight(0.0), NormSpec(2.0, (0.0, math.inf)), cfg)
    n2 = weighted_lp_norm(one, LaguerreWeight(1.0), NormSpec(1.0, (0.0, math.inf)), cfg)
    err = max(abs(n1 - 2 ** -0.5) / 2 ** -0.5, abs(n2 - 1.0))
    out.append(_result("weights", "closed_form_norms", err, 1e-8))

    fe = _smooth_f()
    w = LaguerreWeight(0.5)
    na = weighted_lp_norm(fe, w, NormSpec(2.0, (0.5, 2.0)), cfg)
    nb = weighted_lp_norm(fe, w, NormSpec(2.0, (0.2, 3.0)), cfg)
    out.append(_result("weights", "norm_monotone_in_domain", max(na - nb, 0.0), 1e-12))

    c = 3.7
    scaled = RealFunction(eval=lambda x: c * np.asarray(fe.eval(x)))
    nc = weighted_lp_norm(scaled, w, NormSpec(2.0, (0.2, 3.0)), cfg)
    out.append(_result("weights", "homogeneity", abs(nc - c * nb) / (c * nb), 1e-8))

    g2 = RealFunction(eval=lambda x: np.sqrt(np.asarray(x, float)))
    nsum = weighted_lp_norm(
        RealFunction(eval=lambda x: np.asarray(fe.eval(x)) + g2.eval(x)), w,
        NormSpec(2.0, (0.2, 3.0)), cfg,
    )
    ng = weighted_lp_norm(g2, w, NormSpec(2.0, (0.2, 3.0)), cfg)
    out.append(_result("weights", "triangle_inequality", max(nsum - nb - ng, 0.0), 1e-10))

    A1, A2 = default_constants(g)
    worst = 0.0
    for alpha in (0.0, 1.0):
        wA = LaguerreWeight(alpha)
        for r in (1, 2):
            c_lo, c_hi = weight_equivalence_bounds(r, A1, A2, alpha)
            h = 0.8 * max_time_horizon(g, r, A1, A2, "lower_bound")
            win = window_interval(g, r, h, A1, A2)
            s = float(g.eval_inverse(h))
            xs = np.exp(rng.uniform(np.log(win.lo), np.log(win.hi), 250))
            ys = xs + rng.uniform(-1.0, 1.0, xs.shape) * r * s * np.sqrt(xs)
            ratio = wA.eval(ys) / wA.eval(xs)
            worst = max(
                worst,
                float(np.max(c_lo - ratio)),
                float(np.max(ratio - c_hi)),
            )
    out.append(_result("weights", "weight_equivalence_sampled", max(worst, 0.0), 1e-12))

    coarse = QuadratureConfig(rel_tol=1e-5, abs_tol=1e-9, singular_points=g.breakpoints)
    fine = QuadratureConfig(rel_tol=5e-6, abs_tol=5e-10, singular_points=g.breakpoints)
    va = weighted_lp_norm(fe, w, NormSpec(2.0, (0.0, math.inf)), coarse)
    vb = weighted_lp_norm(fe, w, NormSpec(2.0, (0.0, math.inf)), fine)
    out.append(_result("weights", "quadrature_convergence", abs(va - vb) / vb, 1e-5))
    return out


def check_modulus(g: Optional[PiecewiseRootGamma] = None) -> list[CheckResult]:
    g = g or _default_gamma()
    out = []
    A1, A2 = default_constants(g)
    cfg = QuadratureConfig(rel_tol=1e-7, abs_tol=1e-11, singular_points=g.breakpoints)
    fe = _smooth_f()

    # D^r annihilates x-polynomials of degree < r (uniform step in x)
    worst = 0.0
    h = 0.5 * max_time_horizon(g, 1, A1, A2, "lower_bound")
    for r, coeffs in ((1, (2.0,)), (2, (1.0, -0.5)), (3, (0.3, 1.0, 0.2))):
        fpoly = RealFunction(
            eval=lambda x, c=coeffs: sum(ck * np.asarray(x, float) ** k for k, ck in enumerate(c))
        )
        for x in (0.6, 1.8, 4.0):
            worst = max(worst, abs(forward_difference(fpoly, g, r, h, x)))
    out.append(_result("modulus", "difference_annihilates_low_degree", worst, 1e-10))

    # recursion D^r = D^{r-1}(D^1) at shared fixed step
    s_unit = float(g.eval_inverse(h))
    x = 1.3
    step = s_unit * math.sqrt(x)
    worst = 0.0
    for r in (2, 3):
        direct = sum(
            (-1) ** (r - k) * math.comb(r, k) * float(fe.eval(x + k * step))
            for k in range(r + 1)
        )
        def d1(z):
            return float(fe.eval(z + step)) - float(fe.eval(z))
        if r == 2:
            nested = d1(x + step) - d1(x)
        else:
            nested = (d1(x + 2 * step) - d1(x + step)) - (d1(x + step) - d1(x))
        worst = max(worst, abs(direct - nested))
    out.append(_result("modulus", "difference_recursion", worst, 1e-12))

    T = max_time_horizon(g, 1, A1, A2, "upper_construction")
    t2 = 0.9 * T
    t1 = t2 * 0.75 ** 2          # nested geometric grids
    o1, _, _ = main_modulus(fe, g, 1, t1, 2.0, 0.0, cfg, A1, A2)
    o2, _, _ = main_modulus(fe, g, 1, t2, 2.0, 0.0, cfg, A1, A2)
    out.append(_result("modulus", "omega_monotone_nested", max(o1 - o2, 0.0), 1e-12))

    fsum = RealFunction(eval=lambda x: np.asarray(fe.eval(x)) + np.sqrt(np.asarray(x, float)))
    fsqrt = RealFunction(eval=lambda x: np.sqrt(np.asarray(x, float)))
    os_, _, _ = main_modulus(fsum, g, 1, t2, 2.0, 0.0, cfg, A1, A2)
    oa, _, _ = main_modulus(fe, g, 1, t2, 2.0, 0.0, cfg, A1, A2)
    ob, _, _ = main_modulus(fsqrt, g, 1, t2, 2.0, 0.0, cfg, A1, A2)
    out.append(_result("modulus", "subadditive_in_f", max(os_ - oa - ob, 0.0), 1e-10))

    errs = [
        best_gamma_poly_error(fe, g, d, 2.0, 0.0, (0.3, 4.0), cfg)[0] for d in (0, 1, 2)
    ]
    inc = max(max(errs[i + 1] - errs[i] for i in range(2)), 0.0)
    out.append(_result("modulus", "poly_error_nonincreasing_in_degree", inc, 1e-10))

    # Jackson-direction decay over a decade: fit C at the top, verify at the bottom
    omegas = []
    for t in (t2, t2 * 10 ** -0.5, t2 * 0.1):
        om, _, _ = main_modulus(fe, g, 1, t, 2.0, 0.0, cfg, A1, A2)
        omegas.append((t, om))
    cfit = omegas[0][1] / omegas[0][0]
    tb, ob_ = omegas[-1]
    measured = ob_ / (cfit * tb)
    out.append(
        _result("modulus", "jackson_decay_order", measured, 1.5,
                f"Omega(t)/ (C t) at the decade bottom = {measured:.3f} (C fitted at top)")
    )
    return out


def check_kfunctional(g: Optional[PiecewiseRootGamma] = None) -> list[CheckResult]:
    g = g or _default_gamma()
    out = []
    A1, A2 = default_constants(g)
    cfg = QuadratureConfig(rel_tol=1e-6, abs_tol=1e-10, singular_points=g.breakpoints)
    fe = _smooth_f()

    worst = 0.0
    count = 0
    for r in (1, 2, 3):
        T = max_time_horizon(g, r, A1, A2, "upper_construction")
        for frac in (0.9, 0.6, 0.35, 0.18, 0.08):
            part = build_partition(g, r, frac * T, A1, A2)
            pts = part.array
            s = float(g.eval_inverse(frac * T))
            ratio = np.diff(pts) / (s * np.sqrt(pts[:-1]))
            growth = pts[1:] / pts[:-1]
            bound = (1 + 2 * math.sqrt(A1)) / (2 * math.sqrt(A1))
            worst = max(
                worst,
                float(np.max(1.0 / (2 * r) - ratio)),
                float(np.max(ratio - r)),
                float(np.max(growth - bound)),
            )
            count += 1
    out.append(_result("kfunctional", "partition_laws", max(worst, 0.0), 1e-12,
                       f"{count} partitions checked"))

    r = 1
    T = max_time_horizon(g, r, A1, A2, "upper_construction")
    h = 0.9 * T
    G = assemble_G(fe, g, r, h, A1=A1, A2=A2)
    part, bumps = G.partition, G.bumps
    i = part.j // 2
    xs = np.linspace(part.points[i], part.points[i + 1], 15)
    psi_i = psi_k_gamma_derivative(bumps, i, xs, 0, g)
    pou = np.max(np.abs((1 - psi_i) + psi_i - 1.0))
    f_lo = G.steklov_F(i, xs)
    f_hi = G.steklov_F(i + 1, xs)
    gv = G.value(xs)
    sandwich = max(
        float(np.max(np.minimum(f_lo, f_hi) - gv)),
        float(np.max(gv - np.maximum(f_lo, f_hi))),
    )
    out.append(_result("kfunctional", "bump_partition_of_unity", float(pou), 1e-14))
    out.append(_result("kfunctional", "blend_between_cell_averages", max(sandwich, 0.0), 1e-10))

    # bump derivative bound with S = max |psi^(nu)|
    ss = np.linspace(1e-4, 1 - 1e-4, 2001)
    S = max(float(np.max(np.abs(psi_eval(ss, nu)))) for nu in range(0, r + 1))
    worst = 0.0
    for k in (max(i - 1, 1), i, min(i + 1, part.j - 1)):
        gap = bumps.gamma_points[k + 1] - bumps.gamma_points[k]
        xs = np.linspace(part.points[k], part.points[k + 1], 30)
        for nu in range(0, r + 1):
            vals = np.abs(psi_k_gamma_derivative(bumps, k, xs, nu, g))
            cap = S * 2.0 ** nu / gap ** nu
            worst = max(worst, float(np.max(vals - cap)))
    out.append(_result("kfunctional", "bump_derivative_bound", max(worst, 0.0), 1e-10))

    # Steklov contraction: |f| <= B on sampled window implies |f_steklov| <= (2^r - 1) B
    r2 = 2
    tau = h / 16.0
    s_phi = math.sqrt(part.points[i])
    xs = np.linspace(part.points[1], part.points[-2], 25)
    fb = np.abs(np.asarray(fe.eval(xs)))
    B = float(np.max(np.abs(fe.eval(np.linspace(part.points[0], part.points[-1] * 1.5, 500)))))
    sk = np.abs(steklov_value(fe, g, r2, tau, s_phi, xs))
    out.append(_result(
        "kfunctional", "steklov_contraction",
        max(float(np.max(sk)) - (2 ** r2 - 1) * B, 0.0), 1e-12,
    ))

    # enlarging the candidate set never increases the bound
    t = 0.9 * T
    fe_rth = gamma_derivative_fn(fe, g, 1)
    full = restricted_k_upper(fe, g, 1, t, 2.0, 0.0, cfg, A1, A2, f_gamma_rth=fe_rth)
    reduced = restricted_k_upper(fe, g, 1, t, 2.0, 0.0, cfg, A1, A2, f_gamma_rth=None)
    out.append(_result("kfunctional", "candidate_set_monotone",
                       max(full.value - reduced.value, 0.0), 1e-12))

    worst = 0.0
    fx = RealFunction(
        eval=lambda x: np.asarray(x, float),
        classical_derivs=lambda x, k: np.ones_like(np.asarray(x, float)) if k == 1
        else np.zeros_like(np.asarray(x, float)),
    )
    for f_chk, r_chk in ((fx, 1), (fe, 1)):
        lhs, rhs = difference_integral_identity_check(f_chk, g, r_chk, h, 1.6)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-12))
    out.append(_result("kfunctional", "difference_integral_identity", worst, 1e-6))

    # one-direction fidelity: K_upper(t) <= C sum t^{r-n} Omega^n with C fitted at the top
    ts = [t, t * 0.5, t * 0.25]
    ratios = []
    for tv in ts:
        om, _, _ = main_modulus(fe, g, 1, tv, 2.0, 0.0, cfg, A1, A2)
        kt = restricted_k_upper(fe, g, 1, tv, 2.0, 0.0, cfg, A1, A2, f_gamma_rth=fe_rth)
        ratios.append(kt.value / om)
    measured = max(ratios[1:]) / ratios[0]
    out.append(_result("kfunctional", "upper_bound_fidelity", measured, 1.5,
                       f"ratio drift over t-halvings: {measured:.3f}"))
    return out


def run_suite(suite: str, g: Optional[PiecewiseRootGamma] = None) -> list[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    runners = {
        "calculus": (check_calculus,),
        "weights": (check_weights,),
        "modulus": (check_modulus,),
        "kfunctional": (check_kfunctional,),
        "all": (check_calculus, check_weights, check_modulus, check_kfunctional),
    }
    results = []
    for fn in runners[suite]:
        results.extend(fn(g))
    return results
