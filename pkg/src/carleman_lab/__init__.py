"""Numerical laboratory for Carleman classes in Lp quasinorms, 0 < p < 1."""

from .bootstrap import (
    HermiteFunction,
    bootstrap_chain_check,
    bootstrap_step_check,
    hermite_derivative_sup,
    hermite_lp,
    sup_control_bound,
    verify_sup_control,
)
from .chains import BoxChain
from .classify import (
    RegimeReport,
    associated_quasianalyticity,
    quasianalyticity_witness,
    theta_strictness_witness,
)
from .disconnexion import (
    douady_witness,
    lift_beta_witness,
    lift_gamma_witness,
    oscillation_partition,
    sawtooth,
)
from .errors import CarlemanLabError, CertificateFailure, ConfigError
from .mollifier import build_invisible_carleman, build_invisible_sobolev
from .pwpoly import PiecewisePoly, iterated_box, lp_quasinorm, sup_norm
from .weights import WeightSequence, associated_N, kappa, parse_weight_spec, shift

__all__ = [
    "BoxChain",
    "CarlemanLabError",
    "CertificateFailure",
    "ConfigError",
    "HermiteFunction",
    "PiecewisePoly",
    "RegimeReport",
    "WeightSequence",
    "associated_N",
    "associated_quasianalyticity",
    "bootstrap_chain_check",
    "bootstrap_step_check",
    "build_invisible_carleman",
    "build_invisible_sobolev",
    "douady_witness",
    "hermite_derivative_sup",
    "hermite_lp",
    "iterated_box",
    "kappa",
    "lift_beta_witness",
    "lift_gamma_witness",
    "lp_quasinorm",
    "oscillation_partition",
    "parse_weight_spec",
    "quasianalyticity_witness",
    "sawtooth",
    "shift",
    "sup_control_bound",
    "sup_norm",
    "theta_strictness_witness",
    "verify_sup_control",
]
