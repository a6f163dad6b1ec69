"""Adaptive Gauss-Kronrod quadrature for batched, wide-dynamic-range integrands.

The integrators here are vectorised over a *batch* of integrals that share
one integrand callable: ``f(x)`` receives nodes of shape ``(n, *batch)`` and
must return values of the same shape.  Each batch element may carry its own
integration bounds.  Panels are refined jointly, so one hard element costs
the whole batch some extra evaluations; in exchange every evaluation is a
single numpy call.

Link powers and radii span many decades, so the default transform maps the
integration variable to its logarithm.  Open ends (0 or infinity) are cut
where the integrand, measured in the log variable, drops below
``truncation`` times its peak.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "QuadratureSettings",
    "QuadratureWarning",
    "IntegrandError",
    "QuadResult",
    "integrate",
    "integrate_semi_infinite",
    "integrate_triangular",
    "log_domain_bounds",
]

TRANSFORMS = ("log_domain", "radius_domain", "identity")

# 15-point Kronrod extension of the 7-point Gauss rule (abscissae on [-1, 1]).
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (counting from the ends)
GAUSS[[1, 3, 5]] = _WG[:3]
GAUSS[7] = _WG[3]
GAUSS[[13, 11, 9]] = _WG[:3]

_STEP_DECADES = 0.25


class QuadratureWarning(RuntimeWarning):
    """Emitted when the tolerance was not reached within the panel budget."""


class IntegrandError(FloatingPointError):
    """The integrand returned a non-finite value."""

    def __init__(self, point):
        self.point = point
        super().__init__(f"integrand is not finite at x = {point!r}")


class QuadResult(NamedTuple):
    value: np.ndarray | float
    error: np.ndarray | float


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances and variable transform for one integration axis.

    Attributes
    ----------
    relative_tolerance : float
        Target ``error <= relative_tolerance * |value|``.
    absolute_floor : float
        Absolute error below which an integral counts as converged.
    max_subdivisions : int
        Panel budget on the transformed axis.
    transform : {"log_domain", "radius_domain", "identity"}
    truncation : float
        Relative integrand level at which open ends are cut.
    initial_panels : int
        Equal panels of the first pass; short smooth pieces need only one.
    """

    relative_tolerance: float = 1e-8
    absolute_floor: float = 0.0
    max_subdivisions: int = 400
    transform: str = "log_domain"
    truncation: float = 1e-14
    initial_panels: int = 8

    def __post_init__(self):
        if not 1e-12 < self.relative_tolerance < 1e-2:
            raise ValueError("relative_tolerance must lie in (1e-12, 1e-2)")
        if self.max_subdivisions < 8:
            raise ValueError("max_subdivisions must be at least 8")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}")
        if not 1 <= self.initial_panels <= self.max_subdivisions:
            raise ValueError("initial_panels must lie in [1, max_subdivisions]")
        if self.absolute_floor < 0:
            raise ValueError("absolute_floor must be nonnegative")


DEFAULT = QuadratureSettings()


def _check_finite(y, x):
    if not np.all(np.isfinite(y)):
        bad = np.argwhere(~np.isfinite(y))[0]
        raise IntegrandError(float(np.asarray(x)[tuple(bad)]) if np.ndim(x) else float(x))


def _gauss_kronrod(g: Callable, batch_shape: tuple, settings: QuadratureSettings, atol=None):
    """Adaptive GK15 of ``g`` over u in [0, 1]; ``g(u)`` maps (n,) -> (n, *batch)."""
    rtol = settings.relative_tolerance
    floor = settings.absolute_floor if atol is None else np.maximum(atol, settings.absolute_floor)
    edges = np.linspace(0.0, 1.0, settings.initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    kron = np.empty((0,) + batch_shape)
    err = np.empty((0,) + batch_shape)
    bounds = np.empty((0, 2))
    new = np.column_stack([lo, hi])
    extra = (None,) * len(batch_shape)
    while True:
        center = 0.5 * (new[:, 0] + new[:, 1])
        half = 0.5 * (new[:, 1] - new[:, 0])
        u = (center[:, None] + half[:, None] * NODES[None, :]).ravel()
        y = np.asarray(g(u), dtype=float).reshape((len(new), 15) + batch_shape)
        hw = half[(slice(None),) + extra]
        k = hw * np.tensordot(y, KRONROD, axes=([1], [0])) if batch_shape else hw * (y @ KRONROD)
        gs = hw * np.tensordot(y, GAUSS, axes=([1], [0])) if batch_shape else hw * (y @ GAUSS)
        kron = np.concatenate([kron, k])
        err = np.concatenate([err, np.abs(k - gs)])
        bounds = np.concatenate([bounds, new])

        total = kron.sum(axis=0)
        total_err = err.sum(axis=0)
        tol = np.maximum(rtol * np.abs(total), floor)
        unconverged = total_err > tol
        if not np.any(unconverged):
            return total, total_err
        n_panels = len(bounds)
        room = settings.max_subdivisions - n_panels
        if room <= 0:
            warnings.warn(
                f"quadrature did not reach relative tolerance {rtol:g} within "
                f"{settings.max_subdivisions} panels (max error ratio "
                f"{float(np.max(total_err / np.maximum(tol, 1e-300))):.3g})",
                QuadratureWarning,
                stacklevel=3,
            )
            return total, total_err
        # split panels whose error exceeds their width-share of the tolerance
        ratio = np.where(unconverged, err / np.maximum(tol, 1e-300), 0.0)
        score = ratio.reshape(n_panels, -1).max(axis=1)
        width = bounds[:, 1] - bounds[:, 0]
        candidates = np.flatnonzero(score > width)
        if candidates.size == 0:
            candidates = np.array([int(np.argmax(score))])
        candidates = candidates[np.argsort(-score[candidates])][:room]
        keep = np.ones(n_panels, dtype=bool)
        keep[candidates] = False
        split = bounds[candidates]
        mid = 0.5 * (split[:, 0] + split[:, 1])
        new = np.concatenate([
            np.column_stack([split[:, 0], mid]),
            np.column_stack([mid, split[:, 1]]),
        ])
        kron, err, bounds = kron[keep], err[keep], bounds[keep]


def _broadcast_bounds(lower, upper):
    lower, upper = np.broadcast_arrays(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    return lower.copy(), upper.copy()


def log_domain_bounds(f, lower, upper, truncation=1e-14, scale=1.0):
    """Finite bounds that capture ``f`` on ``(lower, upper)`` in the log variable.

    Finite positive bounds are kept.  An open end (``lower == 0`` or
    ``upper == inf``) is replaced by the point beyond which
    ``|f(x)| * x`` stays below ``truncation`` times its sampled peak.
    ``scale`` centres the search when both ends are open.
    """
    lower, upper = _broadcast_bounds(lower, upper)
    batch = lower.shape
    scale = np.broadcast_to(np.asarray(scale, dtype=float), batch)
    open_lo = lower <= 0
    open_hi = ~np.isfinite(upper)
    if not (np.any(open_lo) or np.any(open_hi)):
        return lower, upper
    # anchor in log10: the finite end if any, otherwise the scale hint
    anchor = np.where(~open_lo, np.log10(np.where(open_lo, 1.0, lower)),
                      np.where(~open_hi, np.log10(np.where(open_hi, 1.0, upper)), np.log10(scale)))
    span_dn = np.where(open_lo, 60.0, 0.0)
    span_up = np.where(open_hi, 60.0, 0.0)
    for _ in range(8):
        n_dn = int(np.ceil(span_dn.max() / _STEP_DECADES))
        n_up = int(np.ceil(span_up.max() / _STEP_DECADES))
        steps = np.arange(-n_dn, n_up + 1) * _STEP_DECADES
        grid = anchor[None] + steps.reshape((-1,) + (1,) * len(batch))
        valid = (steps.reshape((-1,) + (1,) * len(batch)) >= -span_dn[None]) & (
            steps.reshape((-1,) + (1,) * len(batch)) <= span_up[None])
        valid &= np.abs(grid) < 300
        x = 10.0 ** np.clip(grid, -300, 300)
        with np.errstate(all="ignore"):
            y = np.abs(np.asarray(f(x), dtype=float)) * x
        y = np.where(valid, y, 0.0)
        _check_finite(y, x)
        peak = y.max(axis=0)
        above = (y >= truncation * peak[None]) & (peak[None] > 0)
        idx = np.arange(len(steps)).reshape((-1,) + (1,) * len(batch))
        first = np.where(above, idx, len(steps)).min(axis=0)
        last = np.where(above, idx, -1).max(axis=0)
        first_dec = steps[np.clip(first, 0, len(steps) - 1)]
        last_dec = steps[np.clip(last, 0, len(steps) - 1)]
        undecayed_lo = open_lo & (peak > 0) & (first_dec <= -span_dn + 1e-9) & (anchor - span_dn > -300)
        undecayed_hi = open_hi & (peak > 0) & (last_dec >= span_up - 1e-9) & (anchor + span_up < 300)
        if not (np.any(undecayed_lo) or np.any(undecayed_hi)):
            break
        span_dn = np.where(undecayed_lo, 2 * span_dn, span_dn)
        span_up = np.where(undecayed_hi, 2 * span_up, span_up)
    else:
        warnings.warn("integrand tail did not decay inside the float range", QuadratureWarning, stacklevel=2)
    empty = peak <= 0
    new_lo = 10.0 ** np.clip(anchor + first_dec - _STEP_DECADES, -300, 300)
    new_hi = 10.0 ** np.clip(anchor + last_dec + _STEP_DECADES, -300, 300)
    lower = np.where(open_lo, new_lo, lower)
    upper = np.where(open_hi, new_hi, upper)
    # an integrand that vanishes on the whole grid gets an empty interval
    lower = np.where(empty, np.where(open_lo, upper, lower), lower)
    upper = np.where(empty & open_hi, lower, upper)
    return lower, np.maximum(upper, lower)


def integrate(f, lower, upper, settings: QuadratureSettings | None = None, *, scale=1.0,
              atol=None) -> QuadResult:
    """Integrate ``f`` from ``lower`` to ``upper`` for a batch of bounds.

    ``lower`` and ``upper`` broadcast to the batch shape.  ``f`` is called
    with an array of nodes of shape ``(n, *batch)`` and must return an array
    of that shape.  With ``transform="log_domain"`` the bounds must satisfy
    ``0 <= lower <= upper <= inf``; ``"identity"`` accepts any finite lower
    bound and a finite or infinite upper bound.  ``atol`` optionally sets a
    per-element absolute tolerance, useful when the pieces of a batch are
    later summed and tiny pieces need not be resolved relatively.

    Returns
    -------
    QuadResult
        ``(value, error)`` with the batch shape (floats for scalar bounds).
    """
    settings = settings or DEFAULT
    lower, upper = _broadcast_bounds(lower, upper)
    batch = lower.shape
    if np.any(upper < lower):
        raise ValueError("upper bound below lower bound")
    extra = (None,) * len(batch)

    if settings.transform == "identity":
        if np.any(~np.isfinite(lower)):
            raise ValueError("identity transform needs a finite lower bound")
        infinite = ~np.isfinite(upper)
        width = np.where(infinite, 0.0, upper - lower)

        def g(u):
            uu = u[(slice(None),) + extra]
            x_fin = lower[None] + uu * width[None]
            x_inf = lower[None] + uu / (1.0 - uu)
            x = np.where(infinite[None], x_inf, x_fin)
            jac = np.where(infinite[None], 1.0 / (1.0 - uu) ** 2, width[None])
            y = np.asarray(f(x), dtype=float)
            _check_finite(y, x)
            return y * jac
    else:
        if np.any(lower < 0):
            raise ValueError("log-domain integration needs nonnegative bounds")
        lower, upper = log_domain_bounds(f, lower, upper, settings.truncation, scale)
        empty = upper <= lower
        log_lo = np.log(np.where(empty, 1.0, lower))
        log_w = np.where(empty, 0.0, np.log(np.where(empty, 1.0, upper)) - log_lo)

        def g(u):
            uu = u[(slice(None),) + extra]
            x = np.exp(log_lo[None] + uu * log_w[None])
            y = np.asarray(f(x), dtype=float)
            _check_finite(y, x)
            return y * x * log_w[None]

    if atol is not None:
        atol = np.broadcast_to(np.asarray(atol, dtype=float), batch)
    value, error = _gauss_kronrod(g, batch, settings, atol)
    if not batch:
        return QuadResult(float(value), float(error))
    return QuadResult(value, error)


def integrate_semi_infinite(f, settings: QuadratureSettings | None = None, *, lower=0.0,
                            scale=1.0, law: tuple[float, float] | None = None) -> QuadResult:
    """Integrate ``f`` over ``(lower, inf)``.

    With ``transform="radius_domain"``, ``f`` is a density over a link power
    ``t`` and ``law = (C, alpha)`` gives the substitution ``t = C x**-alpha``;
    the integral is then evaluated over the log radius.  ``lower`` must be 0
    in that case.
    """
    settings = settings or DEFAULT
    if settings.transform == "radius_domain":
        if law is None:
            raise ValueError("radius_domain transform needs law=(C, alpha)")
        c, alpha = law
        if np.any(np.asarray(lower) != 0):
            raise ValueError("radius_domain integrates over the full power axis")

        def fx(x):
            t = c * x ** (-alpha)
            return f(t) * alpha * t / x

        radial = QuadratureSettings(settings.relative_tolerance, settings.absolute_floor,
                                    settings.max_subdivisions, "log_domain", settings.truncation)
        return integrate(fx, 0.0, np.inf, radial, scale=(c / np.asarray(scale, dtype=float)) ** (1 / alpha))
    return integrate(f, lower, np.inf, settings, scale=scale)


def integrate_triangular(f, settings: QuadratureSettings | None = None,
                         inner_settings: QuadratureSettings | None = None, *,
                         scale=1.0, inner_lower=0.0) -> QuadResult:
    """Integrate ``f(t1, tk)`` over the triangle ``0 < tk < t1 < inf``.

    Iterated: the inner integral over ``tk`` in ``(inner_lower, t1)`` is
    evaluated for all outer nodes at once, then the outer integral over
    ``t1`` in ``(0, inf)``.  ``f`` receives ``t1`` broadcast against ``tk``.
    The returned error adds the outer estimate and the largest inner one
    scaled by the outer range.
    """
    settings = settings or DEFAULT
    inner_settings = inner_settings or settings
    inner_errors = []

    def outer(t1):
        lo = np.minimum(inner_lower, t1)
        res = integrate(lambda tk: f(t1[None], tk), lo, t1, inner_settings, scale=t1)
        inner_errors.append(float(np.max(np.abs(res.error))) if np.size(res.error) else 0.0)
        return res.value

    res = integrate_semi_infinite(outer, settings, scale=scale)
    err = res.error + (max(inner_errors) if inner_errors else 0.0) * max(1.0, math.fabs(res.value))
    return QuadResult(res.value, err)
