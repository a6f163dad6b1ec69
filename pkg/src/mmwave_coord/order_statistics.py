"""Distribution of the K-th strongest link power in a two-state PPP.

A homogeneous PPP of density ``lam`` whose links are independently marked
LoS/NLoS maps, through the path-loss law, onto two independent 1-D Poisson
processes on the link-power axis.  Their mean measures ``Lambda_L(t)`` and
``Lambda_N(t)`` (expected number of LoS/NLoS BSs with link power above
``t``) drive every distribution in this module.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy import special

from .propagation import LinkState, PropagationParams
from .quadrature import QuadratureSettings, integrate

__all__ = [
    "IntensityMeasures",
    "LinkPowerDistribution",
    "pdf_tk",
    "cdf_tk",
    "joint_pdf_t1_tk",
    "los_fraction",
    "kth_distance_pdf",
    "joint_distance_pdf",
]

# mass left outside the integration window of a link-power distribution
SUPPORT_EPS = 1e-15


def _nlos_area(x):
    """``int_0^x (1 - exp(-y)) y dy`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1.0
    xs = x[small]
    k = np.arange(3, 31)
    coef = (-1.0) ** (k + 1) * (k - 1) / special.factorial(k)
    out[small] = np.sum(coef * xs[..., None] ** k, axis=-1) if xs.size else xs
    xl = x[~small]
    out[~small] = 0.5 * xl * xl - special.gammainc(2.0, xl)
    return out


def _positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("link power must be positive")
    return t


class IntensityMeasures:
    """Mean measures of the LoS and NLoS link-power processes.

    Parameters
    ----------
    density : float
        BS density in BSs per square meter.
    propagation : PropagationParams
    """

    def __init__(self, density: float, propagation: PropagationParams):
        if not density > 0:
            raise ValueError("density must be positive")
        self.density = float(density)
        self.propagation = propagation

    def __repr__(self):
        return f"IntensityMeasures(density={self.density!r}, propagation={self.propagation!r})"

    def _radius(self, t, state):
        pp = self.propagation
        return (pp.intercept(state) / t) ** (1.0 / pp.alpha(state))

    def lambda_los(self, t):
        """Expected number of LoS BSs with link power above ``t``."""
        t = _positive(t)
        a = self._radius(t, LinkState.LOS)
        pp = self.propagation
        q = pp.constant_los
        if q is not None:
            return np.pi * self.density * q * a * a
        return 2 * np.pi * self.density * pp.mu**2 * special.gammainc(2.0, a / pp.mu)

    def lambda_nlos(self, t):
        """Expected number of NLoS BSs with link power above ``t``."""
        t = _positive(t)
        a = self._radius(t, LinkState.NLOS)
        pp = self.propagation
        q = pp.constant_los
        if q is not None:
            return np.pi * self.density * (1.0 - q) * a * a
        return 2 * np.pi * self.density * pp.mu**2 * _nlos_area(a / pp.mu)

    def lambda_total(self, t):
        return self.lambda_los(t) + self.lambda_nlos(t)

    def measure(self, t, state: LinkState):
        return self.lambda_los(t) if LinkState(state) == LinkState.LOS else self.lambda_nlos(t)

    def lambda_deriv(self, t, state: LinkState):
        """d/dt of the ``state`` measure; always negative."""
        t = _positive(t)
        state = LinkState(state)
        pp = self.propagation
        a = self._radius(t, state)
        weight = pp.state_probability(a, state)
        return -2 * np.pi * self.density * weight * a * a / (pp.alpha(state) * t)

    def density_total(self, t):
        """Intensity ``-Lambda'_L(t) - Lambda'_N(t)`` of the link-power process."""
        return -(self.lambda_deriv(t, LinkState.LOS) + self.lambda_deriv(t, LinkState.NLOS))

    def differential(self, t_k, t_1, state: LinkState):
        """Expected number of ``state`` BSs with link power in ``(t_k, t_1)``."""
        return self.measure(t_k, state) - self.measure(t_1, state)

    def inverse_total(self, value):
        """Link power ``t`` with ``lambda_total(t) == value``, elementwise.

        Bisection on ``log lambda_total`` against ``log10 t``, which is
        monotone; 120 halvings of a 500-decade bracket reach machine precision.
        """
        value = np.asarray(value, dtype=float)
        if np.any(~(value > 0)):
            raise ValueError("measure value must be positive")
        target = np.log(value)
        lo = np.full(value.shape, -250.0)
        hi = np.full(value.shape, 250.0)
        with np.errstate(divide="ignore"):
            for _ in range(120):
                mid = 0.5 * (lo + hi)
                above = np.log(self.lambda_total(10.0**mid)) > target
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
        out = 10.0 ** (0.5 * (lo + hi))
        return float(out) if out.ndim == 0 else out


def _check_rank(k, minimum=1):
    if int(k) != k or k < minimum:
        raise ValueError(f"rank K must be an integer >= {minimum}")
    return int(k)


def pdf_tk(t, k: int, measures: IntensityMeasures):
    """Density of the ``k``-th strongest link power, evaluated in log space."""
    k = _check_rank(k)
    t = _positive(t)
    lam = measures.lambda_total(t)
    rate = measures.density_total(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = -lam + np.log(rate) + special.xlogy(k - 1, lam) - special.gammaln(k)
    out = np.exp(log_f)
    return np.where(np.isnan(out), 0.0, out)


def cdf_tk(t, k: int, measures: IntensityMeasures):
    """``P[T_K < t]``: fewer than ``k`` BSs (LoS or NLoS) stronger than ``t``.

    Evaluated as the double Poisson sum over the LoS count ``i`` and NLoS
    count ``j`` with ``i + j < k``.
    """
    k = _check_rank(k)
    t = _positive(t)
    lam_l = np.asarray(measures.lambda_los(t))[..., None]
    lam_n = np.asarray(measures.lambda_nlos(t))[..., None]
    i, j = np.array([(i, j) for i in range(k) for j in range(k - i)]).T
    log_terms = (special.xlogy(i, lam_l) - special.gammaln(i + 1)
                 + special.xlogy(j, lam_n) - special.gammaln(j + 1))
    return np.exp(special.logsumexp(log_terms, axis=-1) - lam_l[..., 0] - lam_n[..., 0])


def joint_pdf_t1_tk(t1, tk, k: int, measures: IntensityMeasures):
    """Joint density of the strongest (``t1``) and ``k``-th strongest (``tk``) link powers.

    The cross-derivative prefactor is the product of the two total
    intensities, i.e. the sum of the four LoS/NLoS cross terms.  Zero when
    ``tk >= t1``.
    """
    k = _check_rank(k, minimum=2)
    t1, tk = np.broadcast_arrays(_positive(t1), _positive(tk))
    between = (measures.differential(tk, t1, LinkState.LOS)
               + measures.differential(tk, t1, LinkState.NLOS))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = (np.log(measures.density_total(tk)) + np.log(measures.density_total(t1))
                 - measures.lambda_total(tk)
                 + special.xlogy(k - 2, np.maximum(between, 0.0)) - special.gammaln(k - 1))
        out = np.exp(log_f)
    return np.where((tk < t1) & ~np.isnan(out), out, 0.0)


class LinkPowerDistribution:
    """Law of the ``k``-th strongest link power of one operator."""

    def __init__(self, measures: IntensityMeasures, k: int):
        self.measures = measures
        self.k = _check_rank(k)

    @classmethod
    def of(cls, density, propagation, k):
        return cls(IntensityMeasures(density, propagation), k)

    def pdf(self, t):
        return pdf_tk(t, self.k, self.measures)

    def cdf(self, t):
        return cdf_tk(t, self.k, self.measures)

    def quantile(self, q):
        """Link power below which a fraction ``q`` of the mass lies."""
        if not 0 < q < 1:
            raise ValueError("q must lie in (0, 1)")
        # T_K < t  <=>  Poisson(Lambda(t)) <= k - 1
        return self.measures.inverse_total(float(special.gammainccinv(self.k, q)))

    @cached_property
    def support(self) -> tuple[float, float]:
        """Window holding all but ``~2 * SUPPORT_EPS`` of the probability mass."""
        lo = self.measures.inverse_total(float(special.gammainccinv(self.k, SUPPORT_EPS)))
        hi = self.measures.inverse_total(float(special.gammaincinv(self.k, SUPPORT_EPS)))
        return lo, hi

    def expect(self, g, settings: QuadratureSettings | None = None):
        """``E[g(T_K)]`` by log-domain quadrature over :attr:`support`."""
        lo, hi = self.support
        return integrate(lambda t: g(t) * self.pdf(t), lo, hi, settings)


def los_fraction(k: int, measures: IntensityMeasures, settings: QuadratureSettings | None = None) -> float:
    """Expected share of LoS links among the ``k`` strongest BSs.

    Given the (k+1)-th strongest power ``t``, the ``k`` stronger points split
    binomially with LoS probability ``Lambda_L(t) / Lambda(t)``; averaging
    over ``T_{k+1}`` gives the expected LoS count, divided here by ``k``.
    """
    k = _check_rank(k)
    dist = LinkPowerDistribution(measures, k + 1)
    ratio = lambda t: measures.lambda_los(t) / measures.lambda_total(t)  # noqa: E731
    settings = settings or QuadratureSettings(relative_tolerance=1e-9)
    return float(dist.expect(ratio, settings).value)


def kth_distance_pdf(r, k: int, density: float):
    """Density of the distance to the ``k``-th nearest point of a planar PPP."""
    k = _check_rank(k)
    r = np.asarray(r, dtype=float)
    x = np.pi * density * r * r
    return 2.0 * np.exp(k * np.log(x) - x - special.gammaln(k)) / r


def joint_distance_pdf(r1, rk, k: int, density: float):
    """Joint density of the nearest and ``k``-th nearest distances of a planar PPP."""
    k = _check_rank(k, minimum=2)
    r1, rk = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(rk, dtype=float))
    lp = density * np.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (4.0 * lp**k / math.factorial(k - 2) * r1 * rk
               * np.maximum(rk * rk - r1 * r1, 0.0) ** (k - 2) * np.exp(-lp * rk * rk))
    return np.where(r1 <= rk, val, 0.0)
