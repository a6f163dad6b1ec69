"""Rate coverage of spectrum-shared mmWave networks with BS coordination.

Two engines compute the same quantities: closed-form and numerically
integrated expressions (:mod:`.order_statistics`, :mod:`.interference`,
:mod:`.coverage`) and a Monte Carlo network simulator (:mod:`.simulator`).
"""

__version__ = "0.1.0"

from .coverage import (AnalyticSettings, CoverageQuery, RateCoverageCurve, median_gain, median_rate,
                       noise_limited_coverage, rate_coverage_analytic, sinr_threshold)
from .interference import InterferenceModel, LaplaceTable
from .order_statistics import (IntensityMeasures, LinkPowerDistribution, cdf_tk, joint_pdf_t1_tk, los_fraction,
                               pdf_tk)
from .propagation import (AntennaParams, LinkState, NetworkConfig, OperatorParams, PropagationParams,
                          dbm_to_watts, db_to_linear)
from .quadrature import QuadratureSettings, QuadratureWarning

__all__ = [
    "AnalyticSettings",
    "AntennaParams",
    "CoverageQuery",
    "IntensityMeasures",
    "InterferenceModel",
    "LaplaceTable",
    "LinkPowerDistribution",
    "LinkState",
    "NetworkConfig",
    "OperatorParams",
    "PropagationParams",
    "QuadratureSettings",
    "QuadratureWarning",
    "RateCoverageCurve",
    "cdf_tk",
    "db_to_linear",
    "dbm_to_watts",
    "joint_pdf_t1_tk",
    "los_fraction",
    "median_gain",
    "median_rate",
    "noise_limited_coverage",
    "pdf_tk",
    "rate_coverage_analytic",
    "sinr_threshold",
]
