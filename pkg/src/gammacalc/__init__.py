"""Gamma-relative calculus and weighted smoothness analysis on the semiaxis.

The package computes with a strictly increasing change of variable gamma
whose infinite-slope points repair fractional-power kinks: gamma-relative
derivatives, polynomials in gamma and their Taylor calculus, Laguerre-weighted
L^p norms, moduli of smoothness over h-dependent windows, and constructive
upper bounds for the associated K-functionals via Steklov/bump assemblies.
"""

from .bell import bell_polynomial, faa_di_bruno
from .calculus import (
    GammaJet,
    GammaPolynomial,
    RealFunction,
    gamma_derivative,
    gamma_derivative_fn,
    gamma_poly_derivative,
    leibniz_gamma,
    taylor_gamma,
    taylor_remainder,
)
from .catalog import CatalogFunction, default_catalog
from .config import ExperimentConfig, load_config
from .errors import (
    ApproximationError,
    BreakpointWarning,
    DomainError,
    GammaCalcError,
    InadmissibleStepError,
    PartitionSizeError,
    QuadratureWarning,
    SingularPointError,
)
from .experiment import ExperimentReport, emit_reports, run_experiment
from .gamma import AffineGamma, GammaFunction, GammaSpec, PiecewiseRootGamma, build_gamma
from .modulus import (
    ModulusResult,
    best_gamma_poly_error,
    complete_modulus,
    forward_difference,
    main_modulus,
    windowed_difference_norm,
)
from .quadrature import QuadratureConfig
from .steklov import (
    BumpFamily,
    KEstimate,
    Partition,
    SteklovApproximant,
    assemble_G,
    build_bumps,
    build_partition,
    difference_integral_identity_check,
    full_k_upper,
    irwin_hall_density,
    psi_eval,
    psi_k_gamma_derivative,
    restricted_k_upper,
    steklov_classical_derivative,
    steklov_value,
)
from .weights import (
    LaguerreWeight,
    NormSpec,
    WindowInterval,
    default_constants,
    max_time_horizon,
    weight_equivalence_bounds,
    weight_eval,
    weighted_lp_norm,
    window_interval,
)

__version__ = "0.1.0"
