"""Experiment configuration: schema, parsing and admissibility validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import GammaCalcError
from .gamma import GammaSpec, build_gamma
from .quadrature import QuadratureConfig
from .weights import default_constants, experiment_time_horizon


class ConfigError(GammaCalcError):
    """Schema or admissibility violation, reported with its key path."""


@dataclass(frozen=True)
class ExperimentConfig:
    gamma_spec: GammaSpec
    r_list: tuple[int, ...] = (1,)
    p_list: tuple[float, ...] = (2.0,)
    alpha_list: tuple[float, ...] = (0.0,)
    t_decades: int = 1
    t_per_decade: int = 8
    t_max: Optional[float] = None          # default: 0.9 * strictest horizon
    A1: Optional[float] = None
    A2: Optional[float] = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    n_h: int = 24
    rho: float = 0.75
    max_partition_cells: int = 6000
    compute_full_k: bool = True
    function_ids: Optional[tuple[str, ...]] = None
    out_csv: str = "report.csv"
    out_svg: Optional[str] = None

    def constants(self):
        g = build_gamma(self.gamma_spec)
        a1, a2 = default_constants(g)
        return (self.A1 if self.A1 is not None else a1,
                self.A2 if self.A2 is not None else a2)


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _parse_p(value, path: str) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity", "sup"):
            return math.inf
        raise ConfigError(f"{path}: p must be a number >= 1 or 'inf', got {value!r}")
    p = float(value)
    _require(p >= 1.0, path, f"p must be >= 1, got {p}")
    return p


def parse_config(data: dict) -> ExperimentConfig:
    gamma = data.get("gamma")
    _require(isinstance(gamma, dict), "gamma", "missing gamma section")
    for key in ("a", "beta"):
        _require(key in gamma, f"gamma.{key}", "required")
    grid = data.get("grid", {})
    r_list = tuple(int(v) for v in grid.get("r", [1]))
    _require(len(r_list) >= 1 and all(v >= 1 for v in r_list), "grid.r", "nonempty positive integers")
    r_max = int(gamma.get("r_max", max(3, max(r_list))))
    _require(
        r_max >= max(r_list),
        "gamma.r_max",
        f"must cover the largest requested order {max(r_list)}",
    )
    try:
        spec = GammaSpec(a=tuple(gamma["a"]), beta=tuple(gamma["beta"]), r_max=r_max)
    except ValueError as exc:
        raise ConfigError(f"gamma: {exc}") from exc
    bound = 1.0 / max(r_list)
    bad_beta = [b for b in spec.beta if not b < bound]
    _require(
        not bad_beta,
        "gamma.beta",
        f"exponents {bad_beta} violate beta < 1/max(r) = {bound:g}, "
        "which the inverse-differentiability condition requires",
    )

    p_list = tuple(_parse_p(v, "grid.p") for v in grid.get("p", [2]))
    alpha_list = tuple(float(v) for v in grid.get("alpha", [0.0]))
    _require(all(a >= 0 for a in alpha_list), "grid.alpha", "acceptance regime needs alpha >= 0")
    t_decades = int(grid.get("t_decades", 1))
    t_per_decade = int(grid.get("t_per_decade", 8))
    _require(t_decades >= 1, "grid.t_decades", "must be >= 1")
    _require(t_per_decade >= 2, "grid.t_per_decade", "must be >= 2")
    t_max = grid.get("t_max")
    t_max = float(t_max) if t_max is not None else None

    constants = data.get("constants", {})
    A1 = constants.get("A1")
    A2 = constants.get("A2")

    quad_d = data.get("quad", {})
    quad = QuadratureConfig(
        rel_tol=float(quad_d.get("rel_tol", 1e-6)),
        abs_tol=float(quad_d.get("abs_tol", 1e-10)),
        max_subdivisions=int(quad_d.get("max_subdiv", 2000)),
        sup_grid_density=int(quad_d.get("sup_grid", 200)),
    )

    run = data.get("run", {})
    out = data.get("out", {})
    cfg = ExperimentConfig(
        gamma_spec=spec,
        r_list=r_list,
        p_list=p_list,
        alpha_list=alpha_list,
        t_decades=t_decades,
        t_per_decade=t_per_decade,
        t_max=t_max,
        A1=float(A1) if A1 is not None else None,
        A2=float(A2) if A2 is not None else None,
        quad=quad,
        n_h=int(run.get("n_h", 24)),
        rho=float(run.get("rho", 0.75)),
        max_partition_cells=int(run.get("max_partition_cells", 6000)),
        compute_full_k=bool(run.get("full_k", True)),
        function_ids=tuple(run["functions"]) if "functions" in run else None,
        out_csv=str(out.get("csv", "report.csv")),
        out_svg=str(out["svg"]) if "svg" in out else None,
    )
    _validate_horizons(cfg)
    return cfg


def _validate_horizons(cfg: ExperimentConfig):
    if cfg.t_max is None:
        return
    g = build_gamma(cfg.gamma_spec)
    A1, A2 = cfg.constants()
    bad = []
    for r in cfg.r_list:
        for alpha in cfg.alpha_list:
            horizon = experiment_time_horizon(g, r, A1, A2, alpha)
            if cfg.t_max > horizon:
                bad.append((r, alpha, horizon))
    if bad:
        listing = "; ".join(f"r={r}, alpha={a:g}: horizon {h:.6g}" for r, a, h in bad)
        raise ConfigError(
            f"grid.t_max: {cfg.t_max:g} exceeds the admissible horizon for {listing}"
        )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    return parse_config(data)
