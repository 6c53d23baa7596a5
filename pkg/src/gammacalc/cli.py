"""Command line interface: gamma eval/inverse, modulus, kfunc, run, verify."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

from .catalog import catalog_by_id, default_catalog
from .checks import SUITES, run_suite
from .config import ConfigError, load_config
from .errors import GammaCalcError
from .experiment import (
    _fmt,
    emit_reports,
    run_experiment,
    write_kfunc_csv,
    write_modulus_csv,
)
from .gamma import GammaSpec, build_gamma
from .modulus import complete_modulus
from .quadrature import QuadratureConfig
from .steklov import full_k_upper, restricted_k_upper
from .weights import experiment_time_horizon


def _add_quad_flags(parser):
    parser.add_argument("--rel-tol", type=float, default=None, help="quadrature relative tolerance")
    parser.add_argument("--abs-tol", type=float, default=None, help="quadrature absolute tolerance")
    parser.add_argument("--max-subdiv", type=int, default=None, help="adaptive subdivision budget")
    parser.add_argument("--sup-grid", type=int, default=None, help="sup-norm grid density per unit")


def _quad_from(args, base: QuadratureConfig) -> QuadratureConfig:
    kw = {}
    if args.rel_tol is not None:
        kw["rel_tol"] = args.rel_tol
    if args.abs_tol is not None:
        kw["abs_tol"] = args.abs_tol
    if args.max_subdiv is not None:
        kw["max_subdivisions"] = args.max_subdiv
    if args.sup_grid is not None:
        kw["sup_grid_density"] = args.sup_grid
    return replace(base, **kw) if kw else base


def _gamma_from(args):
    if args.config:
        cfg = load_config(args.config)
        return build_gamma(cfg.gamma_spec)
    if not args.a or not args.beta:
        raise ConfigError("provide --config or both --a and --beta")
    return build_gamma(GammaSpec(a=tuple(args.a), beta=tuple(args.beta), r_max=args.r_max))


def _parse_p(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity", "sup") else float(text)


def cmd_gamma(args) -> int:
    g = _gamma_from(args)
    if args.gamma_op == "eval":
        for x in args.x:
            print(f"{_fmt(x)}\t{_fmt(float(g.eval(x)))}")
    else:
        for y in args.y:
            print(f"{_fmt(y)}\t{_fmt(float(g.eval_inverse(y)))}")
    return 0


def _catalog_entry(cfg, g, fid):
    entries = default_catalog(g, max(cfg.r_list))
    table = catalog_by_id(entries)
    if fid not in table:
        raise ConfigError(f"unknown function id {fid!r}; available: {sorted(table)}")
    return table[fid]


def _resolve_t(args, g, r, alpha, A1, A2):
    if args.t is not None:
        return args.t
    return 0.9 * experiment_time_horizon(g, r, A1, A2, alpha)


def cmd_modulus(args) -> int:
    cfg = load_config(args.config)
    quad = replace(_quad_from(args, cfg.quad))
    g = build_gamma(cfg.gamma_spec)
    A1, A2 = cfg.constants()
    entry = _catalog_entry(cfg, g, args.function)
    r, p, alpha = args.r, _parse_p(args.p), args.alpha
    t = _resolve_t(args, g, r, alpha, A1, A2)
    quad = replace(quad, singular_points=g.breakpoints)
    res = complete_modulus(entry.fn, g, r, t, p, alpha, quad, A1, A2,
                           n_h=cfg.n_h, rho=cfg.rho)
    print(f"function={entry.id} r={r} p={_fmt(p)} alpha={_fmt(alpha)} t={_fmt(t)}")
    print(f"omega_main      = {_fmt(res.omega_main)}")
    print(f"tail_zero       = {_fmt(res.tail_zero)}")
    print(f"tail_infinity   = {_fmt(res.tail_infinity)}")
    print(f"omega_complete  = {_fmt(res.omega_complete)}")
    if args.out:
        write_modulus_csv([(entry.id, r, p, alpha, res)], args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_kfunc(args) -> int:
    cfg = load_config(args.config)
    quad = _quad_from(args, cfg.quad)
    g = build_gamma(cfg.gamma_spec)
    A1, A2 = cfg.constants()
    entry = _catalog_entry(cfg, g, args.function)
    r, p, alpha = args.r, _parse_p(args.p), args.alpha
    t = _resolve_t(args, g, r, alpha, A1, A2)
    quad = replace(quad, singular_points=g.breakpoints)
    f_rth = entry.gamma_rth(g, r)
    if args.variant == "restricted":
        k = restricted_k_upper(entry.fn, g, r, t, p, alpha, quad, A1, A2,
                               n_h=cfg.n_h, rho=cfg.rho, f_gamma_rth=f_rth,
                               max_partition_cells=cfg.max_partition_cells)
    else:
        k = full_k_upper(entry.fn, g, r, t, p, alpha, quad, A1, A2,
                         f_gamma_rth=f_rth, max_partition_cells=cfg.max_partition_cells)
    print(f"function={entry.id} variant={k.variant} r={r} p={_fmt(p)} "
          f"alpha={_fmt(alpha)} t={_fmt(t)}")
    print(f"value            = {_fmt(k.value)}")
    print(f"approx_error     = {_fmt(k.approx_error_term)}")
    print(f"seminorm_term    = {_fmt(k.seminorm_term)}")
    print(f"candidate        = {k.candidate_id}")
    if args.out:
        write_kfunc_csv([(entry.id, r, p, alpha, k)], args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = replace(cfg, quad=_quad_from(args, cfg.quad))
    if args.out_csv:
        cfg = replace(cfg, out_csv=args.out_csv)
    if args.out_svg:
        cfg = replace(cfg, out_svg=args.out_svg)
    report = run_experiment(cfg)
    for key, value in sorted(report.metadata.items()):
        print(f"# {key}: {value}")
    written = emit_reports(report, cfg.out_csv, cfg.out_svg)
    n_err = sum(1 for c in report.cells if c.status != "ok")
    print(f"{len(report.cells)} cells ({n_err} with errors) -> {', '.join(written)}")
    for key, entry in sorted(report.ratio_summary().items()):
        fid, r, p, alpha = key
        parts = [
            f"{name} in [{v['min']:.4g}, {v['max']:.4g}] spread {v['spread']:.3g}"
            for name, v in entry.items()
        ]
        if parts:
            print(f"  {fid} r={r} p={_fmt(p)} alpha={_fmt(alpha)}: " + "; ".join(parts))
    return 1 if n_err else 0


def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    width = max(len(r.name) for r in results)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        failed += 0 if res.passed else 1
        margin = "inf" if math.isinf(res.margin) else f"{res.margin:.3g}"
        print(f"[{status}] {res.suite:<12} {res.name:<{width}}  margin={margin}  {res.detail}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gammacalc",
        description="gamma-relative calculus, weighted moduli of smoothness and "
                    "K-functional bounds on the semiaxis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pg = sub.add_parser("gamma", help="evaluate the change of variable or its inverse")
    pg_sub = pg.add_subparsers(dest="gamma_op", required=True)
    for op, vals in (("eval", "x"), ("inverse", "y")):
        sp = pg_sub.add_parser(op)
        sp.add_argument("--config", default=None, help="JSON config supplying the gamma section")
        sp.add_argument("--a", type=float, nargs="+", default=None, help="singular points")
        sp.add_argument("--beta", type=float, nargs="+", default=None, help="exponents")
        sp.add_argument("--r-max", type=int, default=3)
        sp.add_argument(f"--{vals}", type=float, nargs="+", required=True)
        sp.set_defaults(func=cmd_gamma)

    pm = sub.add_parser("modulus", help="complete modulus of smoothness for one grid cell")
    pm.add_argument("--config", required=True)
    pm.add_argument("--function", default="exp_decay")
    pm.add_argument("--r", type=int, default=1)
    pm.add_argument("--p", default="2")
    pm.add_argument("--alpha", type=float, default=0.0)
    pm.add_argument("--t", type=float, default=None, help="scale (default: 0.9 * horizon)")
    pm.add_argument("--out", default=None, help="optional CSV path")
    _add_quad_flags(pm)
    pm.set_defaults(func=cmd_modulus)

    pk = sub.add_parser("kfunc", help="K-functional upper bound for one grid cell")
    pk.add_argument("--config", required=True)
    pk.add_argument("--function", default="exp_decay")
    pk.add_argument("--variant", choices=("restricted", "full"), default="restricted")
    pk.add_argument("--r", type=int, default=1)
    pk.add_argument("--p", default="2")
    pk.add_argument("--alpha", type=float, default=0.0)
    pk.add_argument("--t", type=float, default=None)
    pk.add_argument("--out", default=None)
    _add_quad_flags(pk)
    pk.set_defaults(func=cmd_kfunc)

    pr = sub.add_parser("run", help="run the full experiment grid and emit reports")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out-csv", default=None)
    pr.add_argument("--out-svg", default=None)
    _add_quad_flags(pr)
    pr.set_defaults(func=cmd_run)

    pv = sub.add_parser("verify", help="run the invariant suites")
    pv.add_argument("suite", nargs="?", choices=SUITES, default="all")
    _add_quad_flags(pv)
    pv.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GammaCalcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
