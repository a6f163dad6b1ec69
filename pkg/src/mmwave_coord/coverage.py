"""Rate-coverage probability of the typical user under spectrum sharing.

The user is served by the strongest BS of operator 1 with gain ``pG`` and
aggregates the bandwidth of every sharing operator.  With Rayleigh fading
the coverage event reduces to a product of the noise factor and the
interference Laplace transforms, averaged over the serving link power
``T1`` and, when operator 1 coordinates with more than one BS, over its
protection boundary ``TK`` as well.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .interference import EXPONENT_FLOOR, InterferenceModel, LaplaceTable
from .order_statistics import IntensityMeasures, LinkPowerDistribution
from .propagation import NetworkConfig
from .quadrature import QuadratureSettings, QuadratureWarning, integrate

__all__ = [
    "CoverageQuery",
    "RateCoverageCurve",
    "AnalyticSettings",
    "sinr_threshold",
    "rate_coverage_analytic",
    "noise_limited_coverage",
    "median_rate",
    "median_gain",
    "config_hash",
    "coverage_grid",
]

# noise factor exp(-s sigma^2) below e^-50 contributes nothing measurable
_NOISE_CUTOFF = 50.0


def config_hash(config: NetworkConfig) -> str:
    """Stable short hash of a network configuration."""
    text = json.dumps(asdict(config), sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def sinr_threshold(gamma, total_bandwidth):
    """SINR needed to reach rate ``gamma`` (bit/s) over ``total_bandwidth`` (Hz)."""
    gamma = np.asarray(gamma, dtype=float)
    if total_bandwidth <= 0:
        raise ValueError("total_bandwidth must be positive")
    if np.any(gamma < 0):
        raise ValueError("rate threshold must be nonnegative")
    out = np.expm1(gamma / total_bandwidth * np.log(2.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoverageQuery:
    config: NetworkConfig
    rate_thresholds: tuple

    def __post_init__(self):
        g = np.asarray(self.rate_thresholds, dtype=float)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("rate_thresholds must be a nonempty 1-d sequence")
        if np.any(g <= 0):
            raise ValueError("rate thresholds must be positive")
        if np.any(np.diff(g) <= 0):
            raise ValueError("rate thresholds must be strictly increasing")
        object.__setattr__(self, "rate_thresholds", tuple(float(x) for x in g))


@dataclass
class RateCoverageCurve:
    """Coverage probability sampled on a grid of rate thresholds."""

    gamma: np.ndarray
    coverage: np.ndarray
    provenance: str
    metadata: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.coverage = np.asarray(self.coverage, dtype=float)
        if self.gamma.shape != self.coverage.shape or self.gamma.ndim != 1:
            raise ValueError("gamma and coverage must be 1-d arrays of equal length")
        if self.provenance not in ("analytic", "monte_carlo"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.gamma.tolist(), self.coverage.tolist()))

    def __len__(self):
        return self.gamma.size


@dataclass(frozen=True)
class AnalyticSettings:
    """Accuracy knobs for the analytic engine.

    Parameters
    ----------
    outer, inner : QuadratureSettings
        Tolerances of the serving-link integrals and of the interference
        exponents.
    laplace_points_per_decade, laplace_min_points : float, int
        Resolution of the cached Laplace transforms of other operators.
    gap_nodes : int
        Gauss-Laguerre nodes for the protection boundary of operator 1.
    """

    outer: QuadratureSettings = QuadratureSettings(relative_tolerance=1e-5)
    inner: QuadratureSettings = QuadratureSettings(relative_tolerance=1e-7, absolute_floor=EXPONENT_FLOOR)
    laplace_points_per_decade: float = 8.0
    laplace_min_points: int = 64
    gap_nodes: int = 48

    def as_dict(self) -> dict:
        return {
            "outer_rtol": self.outer.relative_tolerance,
            "inner_rtol": self.inner.relative_tolerance,
            "laplace_points_per_decade": self.laplace_points_per_decade,
            "laplace_min_points": self.laplace_min_points,
            "gap_nodes": self.gap_nodes,
        }


def _models(config: NetworkConfig):
    return [InterferenceModel(op, config.propagation, config.antenna) for op in config.operators]


def _laplace_tables(config, models, scale, tilde, dist1, settings):
    """Build one Laplace table per interfering operator covering every ``s`` in use."""
    lo_t, hi_t = dist1.support
    s_lo = tilde.min() * scale / hi_t
    s_hi = tilde.max() * scale / lo_t
    sigma2 = config.noise_power
    if sigma2 > 0:
        s_hi = min(s_hi, _NOISE_CUTOFF / sigma2)
    s_lo = min(s_lo, s_hi * 1e-3)
    tables = [
        LaplaceTable(m, s_lo, s_hi, settings.laplace_points_per_decade, settings.laplace_min_points,
                     outer=settings.outer, inner=settings.inner)
        for m in models[1:]
    ]
    return tables, s_hi


def gap_rule(k: int, n_nodes: int):
    """Quadrature for the measure gap between the strongest and the K-th link.

    Given ``T1``, the gap ``Lambda(TK) - Lambda(T1)`` is Gamma(K-1, 1)
    distributed, so generalized Gauss-Laguerre nodes integrate against it
    exactly for polynomials.  Weights are normalized to sum to one.
    """
    if k < 2:
        raise ValueError("gap rule needs K >= 2")
    x, w = special.roots_genlaguerre(n_nodes, k - 2)
    return x, w / w.sum()


def _own_factor_coordinated(own: InterferenceModel, s, t1, nodes, weights, inner, chunk=4096):
    """``E[L_{I1|TK}(s) | T1]`` for rows of ``s`` of shape ``(n, G)`` sharing ``t1`` per row."""
    lam1 = own.measures.lambda_total(t1)
    tk = own.measures.inverse_total(lam1[:, None] + nodes[None])
    n, n_gamma = s.shape
    boundaries = np.repeat(tk, n_gamma, axis=0)
    flat_s = s.ravel()
    out = np.empty(flat_s.shape)
    for start in range(0, flat_s.size, chunk):
        sl = slice(start, start + chunk)
        expo = own.exponent_profile(flat_s[sl], boundaries[sl], inner)
        out[sl] = np.exp(-expo) @ weights
    return out.reshape(n, n_gamma)


def rate_coverage_analytic(query: CoverageQuery, settings: AnalyticSettings | None = None) -> RateCoverageCurve:
    """Evaluate the coverage probability at every threshold of ``query``."""
    settings = settings or AnalyticSettings()
    config = query.config
    op1 = config.operators[0]
    k1 = op1.coord_size
    if k1 < 1:
        raise ValueError("serving operator must coordinate with at least its serving BS (coord_size >= 1)")
    gamma = np.asarray(query.rate_thresholds)
    tilde = np.asarray(sinr_threshold(gamma, config.total_bandwidth))
    sigma2 = config.noise_power
    # s = tilde * scale / T1
    scale = 1.0 / (op1.tx_power * config.antenna.serving_gain)
    models = _models(config)
    own = models[0]
    measures = own.measures
    dist1 = LinkPowerDistribution(measures, 1)
    tables, s_cap = _laplace_tables(config, models, scale, tilde, dist1, settings)
    lo1, hi1 = dist1.support

    def common_factor(s):
        out = np.exp(-s * sigma2)
        s_eval = np.minimum(s, s_cap)
        for table in tables:
            out = out * table(s_eval)
        return out

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", QuadratureWarning)
        if k1 == 1:
            def integrand(t1):
                s = tilde[None] * scale / t1
                own_factor = np.exp(-own.exponent(s, t1, settings.inner))
                return common_factor(s) * own_factor * dist1.pdf(t1)
        else:
            nodes, weights = gap_rule(k1, settings.gap_nodes)

            def integrand(t1):
                s = tilde[None] * scale / t1
                return common_factor(s) * _own_factor_coordinated(
                    own, s, t1[:, 0], nodes, weights, settings.inner) * dist1.pdf(t1)

        value = integrate(integrand, np.full(gamma.shape, lo1), np.full(gamma.shape, hi1), settings.outer).value
    flagged = [w for w in caught if issubclass(w.category, QuadratureWarning)]
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)

    if np.any(value < -1e-6) or np.any(value > 1 + 1e-6):
        warnings.warn(f"coverage outside [0, 1] beyond quadrature noise: {value}", QuadratureWarning)
        flagged.append(True)
    value = np.clip(value, 0.0, 1.0)
    metadata = {
        "config_hash": config_hash(config),
        "engine": "analytic",
        **settings.as_dict(),
        "numerical_warnings": len(flagged),
    }
    return RateCoverageCurve(gamma, value, "analytic", metadata)


def noise_limited_coverage(config: NetworkConfig, rate_thresholds, settings: QuadratureSettings | None = None):
    """Coverage with every interferer removed, averaged over the serving link power."""
    settings = settings or QuadratureSettings(relative_tolerance=1e-8)
    op1 = config.operators[0]
    tilde = np.atleast_1d(sinr_threshold(rate_thresholds, config.total_bandwidth))
    scale = 1.0 / (op1.tx_power * config.antenna.serving_gain)
    dist1 = LinkPowerDistribution(IntensityMeasures(op1.density, config.propagation), 1)
    lo, hi = dist1.support

    def f(t1):
        return np.exp(-tilde[None] * scale * config.noise_power / t1) * dist1.pdf(t1)

    return integrate(f, np.full(tilde.shape, lo), np.full(tilde.shape, hi), settings).value


def median_rate(curve) -> float:
    """Rate threshold where coverage crosses one half.

    Linear interpolation between the two grid points bracketing 0.5.
    Accepts a :class:`RateCoverageCurve` or a sequence of ``(gamma, p)``.
    """
    if isinstance(curve, RateCoverageCurve):
        g, p = curve.gamma, curve.coverage
    else:
        arr = np.asarray(curve, dtype=float)
        g, p = arr[:, 0], arr[:, 1]
    hits = np.flatnonzero(p == 0.5)
    if hits.size:
        return float(g[hits[0]])
    for i in range(len(p) - 1):
        if p[i] > 0.5 > p[i + 1]:
            w = (p[i] - 0.5) / (p[i] - p[i + 1])
            return float(g[i] + w * (g[i + 1] - g[i]))
    raise ValueError("coverage does not cross 0.5 on this grid; widen the rate-threshold grid")


def median_gain(curve: RateCoverageCurve, baseline: RateCoverageCurve) -> float:
    """Relative median-rate gain of ``curve`` over ``baseline``."""
    return median_rate(curve) / median_rate(baseline) - 1.0


def coverage_grid(config: NetworkConfig, gamma: Sequence[float], settings: AnalyticSettings | None = None):
    """Convenience wrapper returning the analytic curve for a plain threshold list."""
    return rate_coverage_analytic(CoverageQuery(config, tuple(gamma)), settings)
