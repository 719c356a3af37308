"""Achievable type-II error exponents and the searches that evaluate them."""

from .baselines import beta0, multiletter_k1, onebit_exponent, uncoded_exponent, zero_capacity_exponent
from .example1 import example1_instance, example1_report, fig2_curve, f_prime
from .instance import ExponentReport, HTInstance, SearchConfig
from .jhtcc import HybridParams, jhtcc_exponent, jhtcc_objective, uncoded_params
from .shtcc import shtcc_exponent, shtcc_objective
from .taci import check_taci_structure, taci_exponent

__all__ = [
    "ExponentReport", "HTInstance", "HybridParams", "SearchConfig",
    "beta0", "check_taci_structure", "example1_instance", "example1_report", "f_prime", "fig2_curve",
    "jhtcc_exponent", "jhtcc_objective", "multiletter_k1", "onebit_exponent", "shtcc_exponent",
    "shtcc_objective", "taci_exponent", "uncoded_exponent", "uncoded_params", "zero_capacity_exponent",
]
