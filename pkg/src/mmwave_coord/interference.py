"""Laplace transform of the interference from BSs outside a coordination set.

Given the protection boundary ``T`` (the weakest coordinated link power),
the out-of-set BSs of an operator form a Poisson process on link powers
below ``T``.  Each carries unit-mean exponential fading and, independently,
the main-lobe gain with probability ``1/N`` (side-lobe gain otherwise), so
the process splits into two independently thinned copies.  The exponent of
the conditional transform is evaluated in the radius domain, separately
for LoS and NLoS links, where the integrands are smooth.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .order_statistics import IntensityMeasures, LinkPowerDistribution
from .propagation import AntennaParams, LinkState, OperatorParams, PropagationParams
from .quadrature import QuadratureSettings, integrate

__all__ = ["InterferenceModel", "LaplaceTable", "laplace_conditional", "laplace_marginal"]

# exponents below the floor are indistinguishable from zero after exp(); the
# floor stops the adaptive rule from chasing subnormal pieces
EXPONENT_FLOOR = 1e-250
INNER = QuadratureSettings(relative_tolerance=1e-8, absolute_floor=EXPONENT_FLOOR)
OUTER = QuadratureSettings(relative_tolerance=1e-6)

# log-radius extent (decades) beyond which algebraic tails fall below 1e-15
_TAIL_DECADES = 15.0
# decades below the saturation radius ignored when there is no boundary
_CORE_DECADES = 8.0


class InterferenceModel:
    """Interference statistics of one operator seen by the typical user."""

    def __init__(self, operator: OperatorParams, propagation: PropagationParams, antenna: AntennaParams):
        self.operator = operator
        self.propagation = propagation
        self.antenna = antenna
        self.measures = IntensityMeasures(operator.density, propagation)
        n = antenna.n_antennas
        self.gains = np.array([antenna.main_lobe, antenna.side_lobe])
        self.gain_weights = np.array([1.0 / n, 1.0 - 1.0 / n])

    @property
    def coord_size(self) -> int:
        return self.operator.coord_size

    def main_lobe_measure(self, t):
        """Mean number of out-of-set BSs above ``t`` hitting the user with the main lobe."""
        return self.gain_weights[0] * self.measures.lambda_total(t)

    def side_lobe_measure(self, t):
        return self.gain_weights[1] * self.measures.lambda_total(t)

    def _h(self, s, t):
        # sum_j w_j * a_j t / (1 + a_j t) with a_j = s P gain_j
        out = 0.0
        for w, gain in zip(self.gain_weights, self.gains):
            at = (s * self.operator.tx_power * gain) * t
            out = out + w * at / (1.0 + at)
        return out

    def _state_bounds(self, s, boundary, state):
        pp = self.propagation
        c, alpha = pp.intercept(state), pp.alpha(state)
        a_max = s * self.operator.tx_power * self.gains.max()
        a_min = s * self.operator.tx_power * self.gains.min()
        x_sat_hi = (a_max * c) ** (1.0 / alpha)
        x_sat_lo = (a_min * c) ** (1.0 / alpha)
        finite = np.isfinite(boundary)
        with np.errstate(divide="ignore"):
            psi = np.where(finite, (c / np.where(finite, boundary, 1.0)) ** (1.0 / alpha), 0.0)
        lower = np.where(finite, psi, x_sat_lo * 10.0**-_CORE_DECADES)
        exponential = state == LinkState.LOS and pp.constant_los is None
        if exponential:
            upper = np.maximum(lower, x_sat_hi) + 60.0 * pp.mu
        elif alpha <= 2.0:
            upper = np.full_like(lower, np.inf)
        else:
            scale = np.maximum.reduce([lower, x_sat_hi, np.full_like(lower, min(pp.mu, 1e6))])
            upper = scale * 10.0 ** (_TAIL_DECADES / (alpha - 2.0))
        return lower, np.minimum(upper, 1e250) if exponential or alpha > 2.0 else upper

    def _state_integrand(self, s, state):
        pp = self.propagation
        c, alpha = pp.intercept(state), pp.alpha(state)
        two_pi_lam = 2 * np.pi * self.measures.density
        log_c = math.log(c)

        def f(x):
            t = np.exp(log_c - alpha * np.log(x))
            return two_pi_lam * pp.state_probability(x, state) * x * self._h(s, t)

        return f

    def exponent(self, s, boundary, settings: QuadratureSettings | None = None):
        """``-log`` of the conditional Laplace transform; broadcasts ``s`` and ``boundary``."""
        settings = settings or INNER
        s, boundary = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(boundary, dtype=float))
        if np.any(s < 0):
            raise ValueError("Laplace variable s must be nonnegative")
        if np.any(boundary <= 0):
            raise ValueError("protection boundary must be positive (use inf for none)")
        shape = s.shape
        s, boundary = s.ravel(), boundary.ravel()
        out = np.zeros(s.shape)
        active = s > 0
        if np.any(active):
            sa, ba = s[active], boundary[active]
            total = np.zeros(sa.shape)
            for state in LinkState:
                lo, hi = self._state_bounds(sa, ba, state)
                if np.any(~np.isfinite(hi)):
                    total = np.where(~np.isfinite(hi), np.inf, total)
                    hi = np.where(np.isfinite(hi), hi, lo)
                f = self._state_integrand(sa[None], state)
                total = total + integrate(f, lo, hi, settings).value
            out[active] = total
        return out.reshape(shape)

    def exponent_profile(self, s, boundaries, settings: QuadratureSettings | None = None):
        """Exponent for many finite boundaries per ``s`` value.

        ``s`` has shape ``(R,)`` and ``boundaries`` shape ``(R, P)``.  The
        integral from each boundary radius outwards is assembled as a
        reverse cumulative sum of short segments between sorted radii plus
        one tail integral per row, so the cost is one segment per boundary
        rather than one full integral.
        """
        settings = settings or INNER
        s = np.asarray(s, dtype=float)
        boundaries = np.asarray(boundaries, dtype=float)
        if boundaries.ndim != 2 or s.shape != boundaries.shape[:1]:
            raise ValueError("expected s of shape (R,) and boundaries of shape (R, P)")
        if np.any(~np.isfinite(boundaries)) or np.any(boundaries <= 0):
            raise ValueError("exponent_profile needs finite positive boundaries")
        rows, n_pts = boundaries.shape
        out = np.zeros(boundaries.shape)
        active = s > 0
        if not np.any(active) or n_pts == 0:
            return out
        sa, ba = s[active], boundaries[active]
        total = np.zeros(ba.shape)
        for state in LinkState:
            pp = self.propagation
            c, alpha = pp.intercept(state), pp.alpha(state)
            radius = (c / ba) ** (1.0 / alpha)
            order = np.argsort(radius, axis=1)
            r_sorted = np.take_along_axis(radius, order, axis=1)
            lo_tail, hi_tail = self._state_bounds(sa, np.take_along_axis(ba, order, axis=1)[:, -1], state)
            if np.any(~np.isfinite(hi_tail)):
                total[:] = np.where(~np.isfinite(hi_tail)[:, None], np.inf, total)
                hi_tail = np.where(np.isfinite(hi_tail), hi_tail, lo_tail)
            tail = integrate(self._state_integrand(sa[None], state), lo_tail, hi_tail, settings).value
            if n_pts > 1:
                seg_settings = replace(settings, initial_panels=1)
                seg = integrate(self._state_integrand(sa[None, :, None], state),
                                r_sorted[:, :-1], r_sorted[:, 1:], seg_settings).value
            else:
                seg = np.zeros((len(sa), 0))
            # integral from r_sorted[:, i] to the upper cut
            upward = tail[:, None] + np.concatenate(
                [np.cumsum(seg[:, ::-1], axis=1)[:, ::-1], np.zeros((len(sa), 1))], axis=1)
            unsorted = np.empty_like(upward)
            np.put_along_axis(unsorted, order, upward, axis=1)
            total = total + unsorted
        out[active] = total
        return out

    def laplace_conditional(self, s, boundary, settings: QuadratureSettings | None = None):
        """``E[exp(-s I) | T = boundary]``; ``boundary = inf`` means no coordination."""
        return np.exp(-self.exponent(s, boundary, settings))

    def laplace_marginal(self, s, outer: QuadratureSettings | None = None,
                         inner: QuadratureSettings | None = None):
        """Conditional transform averaged over the ``K_m``-th strongest link power."""
        k = self.coord_size
        if k < 1:
            raise ValueError(
                "laplace_marginal needs coord_size >= 1; for an uncoordinated operator "
                "use laplace_conditional(s, inf)")
        outer = outer or OUTER
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < 0):
            raise ValueError("Laplace variable s must be nonnegative")
        dist = LinkPowerDistribution(self.measures, k)
        lo, hi = dist.support

        def integrand(t):
            # t has shape (n, R) with identical columns
            cond = np.exp(-self.exponent_profile(s, t.T, inner).T)
            return cond * dist.pdf(t)

        lows = np.full(s.shape, lo)
        return integrate(integrand, lows, np.full(s.shape, hi), outer).value

    def laplace(self, s, outer=None, inner=None):
        """Unconditional transform, whatever the coordination size."""
        s = np.asarray(s, dtype=float)
        if self.coord_size == 0:
            return self.laplace_conditional(s, np.inf, inner)
        return self.laplace_marginal(s, outer, inner).reshape(s.shape)


def laplace_conditional(s, boundary, model: InterferenceModel, settings=None):
    return model.laplace_conditional(s, boundary, settings)


def laplace_marginal(s, model: InterferenceModel, outer=None, inner=None):
    return model.laplace_marginal(s, outer, inner)


class LaplaceTable:
    """Monotone cubic interpolant of ``s -> L_I(s)`` on a log-spaced grid.

    ``log(-log L)`` is interpolated against ``log s``; it is close to linear
    for small ``s``.  Queries outside the grid extend it in steps of the
    same spacing.
    """

    def __init__(self, model: InterferenceModel, s_min: float, s_max: float,
                 points_per_decade: float = 8.0, min_points: int = 64, outer=None, inner=None):
        if not 0 < s_min < s_max:
            raise ValueError("need 0 < s_min < s_max")
        self.model = model
        self._outer, self._inner = outer, inner
        n = max(min_points, int(math.ceil(points_per_decade * math.log10(s_max / s_min))) + 1)
        self.log_s = np.linspace(math.log(s_min), math.log(s_max), n)
        self.step = self.log_s[1] - self.log_s[0]
        self.values = self._evaluate(self.log_s)
        self._fit()

    def _evaluate(self, log_s):
        return np.asarray(self.model.laplace(np.exp(log_s), self._outer, self._inner), dtype=float)

    def _fit(self):
        z = np.log(np.maximum(-np.log(np.clip(self.values, 1e-300, 1.0)), 1e-300))
        self._interp = PchipInterpolator(self.log_s, z, extrapolate=True)

    def _extend(self, log_lo, log_hi):
        add_lo = np.arange(self.log_s[0] - self.step, log_lo - self.step, -self.step)[::-1]
        add_hi = np.arange(self.log_s[-1] + self.step, log_hi + self.step, self.step)
        new = np.concatenate([add_lo, add_hi])
        if new.size == 0:
            return
        vals = self._evaluate(new)
        self.log_s = np.concatenate([add_lo, self.log_s, add_hi])
        self.values = np.concatenate([vals[: add_lo.size], self.values, vals[add_lo.size:]])
        self._fit()

    @property
    def s_grid(self):
        return np.exp(self.log_s)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        pos = s > 0
        if np.any(pos):
            ls = np.log(s[pos])
            if ls.min() < self.log_s[0] - 1e-12 or ls.max() > self.log_s[-1] + 1e-12:
                self._extend(min(ls.min(), self.log_s[0]), max(ls.max(), self.log_s[-1]))
        out = np.ones(s.shape)
        if np.any(pos):
            out[pos] = np.exp(-np.exp(self._interp(np.log(s[pos]))))
        return out
