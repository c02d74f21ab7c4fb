"""Numerical tools for L^r derivates and gauge (Henstock-Kurzweil type) integrals.

Modules:

* :mod:`gaugecalc.funcmodel` - function models and the Cantor-like counterexample;
* :mod:`gaugecalc.quadrature` - L^r mean-deviation integrals;
* :mod:`gaugecalc.derivates` - the four L^r derivates, the L^r-derivative and
  the approximate derivative;
* :mod:`gaugecalc.gauges` - gauges, tagged partitions, Cousin partitions and
  Riemann-type sums;
* :mod:`gaugecalc.checkers` - certificates and refutations (HK_r, AC_r, AC) and
  the counterexample's divergence bound;
* :mod:`gaugecalc.cli` - the ``gaugecalc`` command.
"""

__version__ = "0.1.0"

from .errors import ArgumentError, DomainError, GaugeCalcError, ResourceError
from .funcmodel import (STANDARD_SCHEME, CantorScheme, Counterexample, FunctionModel, Interval,
                        Negation, PiecewiseLinear, PolynomialModel, Reflection, ScaledPower,
                        model_from_spec)
from .quadrature import LrParams, QuadOptions, adaptive_lr_integral, lr_mean_deviation
from .derivates import (HGrid, approx_derivative, four_derivates, lr_derivative,
                        one_sided_derivate, phi_ratio)
from .gauges import (Gauge, TaggedInterval, TaggedPartition, ac_sum, adversarial_small_partition,
                     cousin_partition, is_fine, riemann_lr_sum)
from .checkers import (CheckReport, ac_check, acr_check, counterexample_bound,
                       counterexample_verify, hkr_check)

__all__ = [
    "ArgumentError", "DomainError", "GaugeCalcError", "ResourceError",
    "STANDARD_SCHEME", "CantorScheme", "Counterexample", "FunctionModel", "Interval", "Negation",
    "PiecewiseLinear", "PolynomialModel", "Reflection", "ScaledPower", "model_from_spec",
    "LrParams", "QuadOptions", "adaptive_lr_integral", "lr_mean_deviation",
    "HGrid", "approx_derivative", "four_derivates", "lr_derivative", "one_sided_derivate",
    "phi_ratio",
    "Gauge", "TaggedInterval", "TaggedPartition", "ac_sum", "adversarial_small_partition",
    "cousin_partition", "is_fine", "riemann_lr_sum",
    "CheckReport", "ac_check", "acr_check", "counterexample_bound", "counterexample_verify",
    "hkr_check",
]
