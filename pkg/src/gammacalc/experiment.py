"""Batch runner over (function, r, p, alpha, t) grids with CSV/SVG reports.

Within one (function, r, p, alpha) combination the t-grid shares a geometric
h-lattice anchored at the largest t, so every per-h window norm and per-h
candidate objective is computed once and reused across t; the grid max for a
given t just reads the lattice points below it.  This changes nothing about
any single-t call (those use the plain h_i = t rho^i grid) and makes the
modulus/K ratios comparable on identical h samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .catalog import CatalogFunction, catalog_by_id, default_catalog
from .config import ConfigError, ExperimentConfig
from .errors import GammaCalcError
from .gamma import build_gamma
from .modulus import ModulusResult, complete_modulus, main_modulus
from .steklov import KEstimate, full_k_upper, restricted_k_upper
from .svg import Panel, Series, render_panels
from .weights import experiment_time_horizon

RUN_COLUMNS = (
    "function_id", "r", "p", "alpha", "t",
    "omega_main", "tail_zero", "tail_infinity", "omega_complete",
    "kt_value", "kt_approx_error", "kt_seminorm", "kt_candidate",
    "k_value", "k_approx_error", "k_seminorm", "k_candidate",
    "ratio14", "ratio_equiv", "status",
)
MODULUS_COLUMNS = (
    "function_id", "r", "p", "alpha", "t",
    "omega_main", "tail_zero", "tail_infinity", "omega_complete",
)
KFUNC_COLUMNS = (
    "function_id", "variant", "r", "p", "alpha", "t",
    "value", "approx_error_term", "seminorm_term", "candidate_id",
)

# how the ambiguously typeset horizon entry is read: the fourth-root constant
# divides by the full product 4 * A1 * r
HORIZON_READING = "horizon entry sqrt(a_N + 1)/(4*A1*r): denominator read as the product 4*A1*r"
TAIL_CONSTANTS_NOTE = (
    "complete-modulus tail intervals use the unprimed window constants (A1, A2); "
    "the primed pair from the splitting argument is available as modulus.primed_constants"
)


@dataclass(frozen=True)
class CellResult:
    function_id: str
    r: int
    p: float
    alpha: float
    t: float
    modulus: Optional[ModulusResult]
    omegas: tuple[float, ...]              # main-part moduli of orders 1..r
    k_restricted: Optional[KEstimate]
    k_full: Optional[KEstimate]
    ratio14: Optional[float]
    ratio_equiv: Optional[float]
    status: str


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[CellResult, ...]
    metadata: dict

    def ratio_summary(self) -> dict:
        """min/max/spread of the diagnostics per (function, r, p, alpha)."""
        groups: dict[tuple, dict[str, list[float]]] = {}
        for c in self.cells:
            if c.status != "ok":
                continue
            key = (c.function_id, c.r, c.p, c.alpha)
            slot = groups.setdefault(key, {"ratio14": [], "ratio_equiv": []})
            if c.ratio14 is not None and math.isfinite(c.ratio14):
                slot["ratio14"].append(c.ratio14)
            if c.ratio_equiv is not None and math.isfinite(c.ratio_equiv):
                slot["ratio_equiv"].append(c.ratio_equiv)
        out = {}
        for key, slot in groups.items():
            entry = {}
            for name, vals in slot.items():
                if vals:
                    lo, hi = min(vals), max(vals)
                    entry[name] = {
                        "min": lo,
                        "max": hi,
                        "spread": hi / lo if lo > 0 else math.inf,
                    }
            out[key] = entry
        return out


def t_grid_for(cfg: ExperimentConfig, t_top: float) -> tuple[float, ...]:
    """t_top down `t_decades` decades, `t_per_decade` points per decade."""
    n = cfg.t_decades * (cfg.t_per_decade - 1) + 1
    return tuple(
        t_top * 10.0 ** (-cfg.t_decades * i / (n - 1)) for i in range(n)
    )


def h_lattice_for(cfg: ExperimentConfig, t_top: float, t_bottom: float) -> tuple[float, ...]:
    """Geometric lattice from t_top deep enough that every t keeps n_h points."""
    depth = cfg.n_h + int(math.ceil(math.log(t_top / t_bottom) / -math.log(cfg.rho))) + 1
    return tuple(t_top * cfg.rho ** k for k in range(depth))


def run_experiment(cfg: ExperimentConfig, catalog: Optional[list[CatalogFunction]] = None) -> ExperimentReport:
    g = build_gamma(cfg.gamma_spec)
    A1, A2 = cfg.constants()
    if catalog is None:
        catalog = default_catalog(g, max(cfg.r_list))
    if cfg.function_ids is not None:
        by_id = catalog_by_id(catalog)
        missing = [fid for fid in cfg.function_ids if fid not in by_id]
        if missing:
            raise ConfigError(f"run.functions: unknown catalog ids {missing}")
        catalog = [by_id[fid] for fid in cfg.function_ids]

    cells = []
    norm_cache: dict = {}
    per_h_cache: dict = {}
    for entry in catalog:
        for r in sorted(cfg.r_list):
            for p in cfg.p_list:
                for alpha in cfg.alpha_list:
                    cells.extend(
                        _run_combo(
                            cfg, g, A1, A2, entry, r, p, alpha, norm_cache, per_h_cache
                        )
                    )
    cells.sort(key=lambda c: (c.function_id, c.r, c.p, c.alpha, -c.t))
    metadata = {
        "A1": A1,
        "A2": A2,
        "gamma": cfg.gamma_spec.to_dict(),
        "horizon_reading": HORIZON_READING,
        "tail_constants": TAIL_CONSTANTS_NOTE,
        "n_h": cfg.n_h,
        "rho": cfg.rho,
    }
    return ExperimentReport(cells=tuple(cells), metadata=metadata)


def _run_combo(cfg, g, A1, A2, entry, r, p, alpha, norm_cache, per_h_cache):
    horizon = experiment_time_horizon(g, r, A1, A2, alpha)
    t_top = cfg.t_max if cfg.t_max is not None else 0.9 * horizon
    t_top = min(t_top, 0.999 * horizon)
    ts = t_grid_for(cfg, t_top)
    lattice = h_lattice_for(cfg, t_top, ts[-1])
    f_rth = entry.gamma_rth(g, r)
    out = []
    for t in ts:
        h_grid = tuple(h for h in lattice if h <= t * (1 + 1e-12))[: cfg.n_h]
        try:
            omegas = []
            mod = None
            for n in range(1, r + 1):
                if n == r:
                    mod = complete_modulus(
                        entry.fn, g, n, t, p, alpha, cfg.quad, A1, A2,
                        h_grid=h_grid, norm_cache=norm_cache, cache_key=entry.id,
                    )
                    omegas.append(mod.omega_main)
                else:
                    om, _, _ = main_modulus(
                        entry.fn, g, n, t, p, alpha, cfg.quad, A1, A2,
                        h_grid=h_grid, norm_cache=norm_cache, cache_key=entry.id,
                    )
                    omegas.append(om)
            kt = restricted_k_upper(
                entry.fn, g, r, t, p, alpha, cfg.quad, A1, A2,
                h_grid=h_grid, f_gamma_rth=f_rth,
                max_partition_cells=cfg.max_partition_cells,
                per_h_cache=per_h_cache, cache_key=entry.id,
            )
            kf = None
            if cfg.compute_full_k:
                kf = full_k_upper(
                    entry.fn, g, r, t, p, alpha, cfg.quad, A1, A2,
                    f_gamma_rth=f_rth, max_partition_cells=cfg.max_partition_cells,
                )
            denom = sum(t ** (r - n) * omegas[n - 1] for n in range(1, r + 1))
            ratio14 = kt.value / denom if denom > 0 else None
            ratio_eq = (kt.value / omegas[0]) if (r == 1 and omegas[0] > 0) else None
            out.append(
                CellResult(
                    function_id=entry.id, r=r, p=p, alpha=alpha, t=t,
                    modulus=mod, omegas=tuple(omegas),
                    k_restricted=kt, k_full=kf,
                    ratio14=ratio14, ratio_equiv=ratio_eq, status="ok",
                )
            )
        except GammaCalcError as exc:
            out.append(
                CellResult(
                    function_id=entry.id, r=r, p=p, alpha=alpha, t=t,
                    modulus=None, omegas=(), k_restricted=None, k_full=None,
                    ratio14=None, ratio_equiv=None,
                    status=f"error:{type(exc).__name__}:{exc}",
                )
            )
    return out


# ---------------------------------------------------------------------------
# serialization


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return format(v, ".12g")
    return str(v)


def cell_to_row(c: CellResult) -> list[str]:
    mod = c.modulus
    kt, kf = c.k_restricted, c.k_full
    return [
        c.function_id, _fmt(c.r), _fmt(c.p), _fmt(c.alpha), _fmt(c.t),
        _fmt(mod.omega_main if mod else None),
        _fmt(mod.tail_zero if mod else None),
        _fmt(mod.tail_infinity if mod else None),
        _fmt(mod.omega_complete if mod else None),
        _fmt(kt.value if kt else None),
        _fmt(kt.approx_error_term if kt else None),
        _fmt(kt.seminorm_term if kt else None),
        kt.candidate_id if kt else "",
        _fmt(kf.value if kf else None),
        _fmt(kf.approx_error_term if kf else None),
        _fmt(kf.seminorm_term if kf else None),
        kf.candidate_id if kf else "",
        _fmt(c.ratio14), _fmt(c.ratio_equiv), c.status,
    ]


def write_run_csv(report: ExperimentReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_COLUMNS)
        for c in report.cells:
            writer.writerow(cell_to_row(c))


def write_modulus_csv(rows, path):
    """rows: iterable of (function_id, r, p, alpha, ModulusResult)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MODULUS_COLUMNS)
        for fid, r, p, alpha, m in rows:
            writer.writerow([
                fid, _fmt(r), _fmt(p), _fmt(alpha), _fmt(m.t),
                _fmt(m.omega_main), _fmt(m.tail_zero), _fmt(m.tail_infinity),
                _fmt(m.omega_complete),
            ])


def write_kfunc_csv(rows, path):
    """rows: iterable of (function_id, r, p, alpha, KEstimate)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(KFUNC_COLUMNS)
        for fid, r, p, alpha, k in rows:
            writer.writerow([
                fid, k.variant, _fmt(r), _fmt(p), _fmt(alpha), _fmt(k.t),
                _fmt(k.value), _fmt(k.approx_error_term), _fmt(k.seminorm_term),
                k.candidate_id,
            ])


def report_panels(report: ExperimentReport, max_panels: int = 12) -> list[Panel]:
    """One log-log panel (t vs the computed scales) per leading grid combo."""
    groups: dict[tuple, list[CellResult]] = {}
    for c in report.cells:
        if c.status == "ok":
            groups.setdefault((c.function_id, c.r, c.p, c.alpha), []).append(c)
    panels = []
    for key in sorted(groups)[:max_panels]:
        fid, r, p, alpha = key
        rows = sorted(groups[key], key=lambda c: c.t)
        ts = tuple(c.t for c in rows)
        series = [
            Series("omega_main", ts, tuple(c.omegas[-1] for c in rows)),
            Series("omega_complete", ts, tuple(c.modulus.omega_complete for c in rows)),
            Series("K_restricted", ts, tuple(c.k_restricted.value for c in rows)),
        ]
        if all(c.k_full is not None for c in rows):
            series.append(Series("K_full", ts, tuple(c.k_full.value for c in rows)))
        panels.append(
            Panel(title=f"{fid} r={r} p={_fmt(p)} alpha={_fmt(alpha)}", series=tuple(series))
        )
    return panels


def emit_reports(report: ExperimentReport, csv_path, svg_path=None):
    """Write the run CSV (single source of truth) and the optional SVG view."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_run_csv(report, csv_path)
    written = [str(csv_path)]
    if svg_path is not None:
        svg_path = Path(svg_path)
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        svg_path.write_text(render_panels(report_panels(report)))
        written.append(str(svg_path))
    return written
