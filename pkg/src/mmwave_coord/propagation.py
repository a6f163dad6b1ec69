"""Physical-layer parameters, unit conversions, blockage and antenna models.

Everything inside the package works in linear units (watts, linear gains,
meters, hertz).  Decibel quantities only appear at config ingest and in
reports, through the conversion helpers defined here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "LinkState",
    "PropagationParams",
    "AntennaParams",
    "OperatorParams",
    "NetworkConfig",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "los_probability",
    "link_power",
    "boundary_radius",
    "main_lobe_gain",
]


class LinkState(enum.IntEnum):
    LOS = 0
    NLOS = 1


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(w) + 30.0


def _as_float(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class PropagationParams:
    """Two-state (LoS/NLoS) power-law path loss with exponential blockage.

    Parameters
    ----------
    alpha_los, alpha_nlos : float
        Path-loss exponents.
    c_los, c_nlos : float
        Linear path-loss intercepts (e.g. 1e-6 for -60 dB).
    mu : float
        Average LoS length in meters; a link of length ``r`` is LoS with
        probability ``exp(-r / mu)``.  ``math.inf`` makes every link LoS.
    fixed_los_probability : float, optional
        Replace the exponential blockage law by a distance-independent LoS
        probability.  Only used for single-state reductions where the
        blockage law is meaningless.
    """

    alpha_los: float = 2.0
    alpha_nlos: float = 4.0
    c_los: float = 1e-6
    c_nlos: float = 1e-7
    mu: float = 144.0
    fixed_los_probability: float | None = None

    def __post_init__(self):
        if self.alpha_los < 2 or self.alpha_nlos < 2:
            raise ValueError("path-loss exponents must be >= 2")
        if self.alpha_nlos < self.alpha_los:
            raise ValueError("alpha_nlos must be >= alpha_los")
        if not (self.c_los > 0 and self.c_nlos > 0):
            raise ValueError("path-loss intercepts must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        q = self.fixed_los_probability
        if q is not None and not 0.0 <= q <= 1.0:
            raise ValueError("fixed_los_probability must lie in [0, 1]")

    @classmethod
    def from_db(cls, alpha_los, alpha_nlos, intercept_los_db, intercept_nlos_db, mu):
        return cls(
            alpha_los=float(alpha_los),
            alpha_nlos=float(alpha_nlos),
            c_los=float(db_to_linear(intercept_los_db)),
            c_nlos=float(db_to_linear(intercept_nlos_db)),
            mu=float(mu),
        )

    @property
    def constant_los(self) -> float | None:
        """LoS probability if it does not depend on distance, else None."""
        if self.fixed_los_probability is not None:
            return float(self.fixed_los_probability)
        if math.isinf(self.mu):
            return 1.0
        return None

    def alpha(self, state: LinkState) -> float:
        return self.alpha_los if state == LinkState.LOS else self.alpha_nlos

    def intercept(self, state: LinkState) -> float:
        return self.c_los if state == LinkState.LOS else self.c_nlos

    def state_probability(self, r, state: LinkState):
        """Probability that a link of length ``r`` is in ``state``."""
        r = np.asarray(r, dtype=float)
        q = self.constant_los
        if q is not None:
            p = np.full(r.shape, q)
            return p if state == LinkState.LOS else 1.0 - p
        if state == LinkState.LOS:
            return np.exp(-r / self.mu)
        return -np.expm1(-r / self.mu)


@dataclass(frozen=True)
class AntennaParams:
    """Two-level sectored BS antenna.

    ``n_antennas`` sets the main-lobe width 2*pi/N, ``side_lobe`` is the
    linear side-lobe gain and ``relative_gain`` the fraction of the
    main-lobe gain kept by the serving link after zero-forcing.
    """

    n_antennas: int = 12
    side_lobe: float = 0.1
    relative_gain: float = 1.0

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ValueError("n_antennas must be a positive integer")
        if not 0.0 < self.side_lobe < 1.0:
            raise ValueError("side_lobe must lie in (0, 1)")
        if not 0.0 < self.relative_gain <= 1.0:
            raise ValueError("relative_gain must lie in (0, 1]")

    @property
    def main_lobe(self) -> float:
        return main_lobe_gain(self)

    @property
    def main_lobe_probability(self) -> float:
        return 1.0 / self.n_antennas

    @property
    def serving_gain(self) -> float:
        """Deterministic post-nulling gain pG of the serving link."""
        return self.relative_gain * self.main_lobe


@dataclass(frozen=True)
class OperatorParams:
    """One operator: PPP density (BS/m^2), power (W), bandwidth (Hz), coordination size."""

    density: float
    tx_power: float
    bandwidth: float
    coord_size: int = 0

    def __post_init__(self):
        if not (self.density > 0 and self.tx_power > 0 and self.bandwidth > 0):
            raise ValueError("density, tx_power and bandwidth must be positive")
        if int(self.coord_size) != self.coord_size or self.coord_size < 0:
            raise ValueError("coord_size must be a nonnegative integer")


@dataclass(frozen=True)
class NetworkConfig:
    """Full multi-operator network.  ``operators[0]`` serves the typical user."""

    operators: tuple[OperatorParams, ...]
    propagation: PropagationParams = field(default_factory=PropagationParams)
    antenna: AntennaParams = field(default_factory=AntennaParams)
    noise_density: float = float(dbm_to_watts(-174.0))

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(self.operators))
        if not self.operators:
            raise ValueError("at least one operator is required")
        if self.operators[0].coord_size < 1:
            raise ValueError("the serving operator must have coord_size >= 1")
        if not self.noise_power > 0:
            raise ValueError("total noise power must be positive")

    @property
    def total_bandwidth(self) -> float:
        return float(sum(op.bandwidth for op in self.operators))

    @property
    def noise_power(self) -> float:
        return self.noise_density * self.total_bandwidth

    @property
    def total_coord_size(self) -> int:
        return int(sum(op.coord_size for op in self.operators))

    def with_operator(self, index: int, **changes) -> "NetworkConfig":
        ops = list(self.operators)
        ops[index] = replace(ops[index], **changes)
        return replace(self, operators=tuple(ops))

    def with_antenna(self, **changes) -> "NetworkConfig":
        return replace(self, antenna=replace(self.antenna, **changes))

    def without_sharing(self) -> "NetworkConfig":
        """Same network with only the serving operator (no spectrum sharing)."""
        return replace(self, operators=self.operators[:1])


def los_probability(r, params: PropagationParams):
    """Probability that a link of length ``r`` (meters) is line-of-sight."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    return _as_float(params.state_probability(r, LinkState.LOS))


def link_power(r, state: LinkState, params: PropagationParams):
    """Path gain ``C_s r**(-alpha_s)`` of a link of length ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("link_power is singular at r <= 0")
    state = LinkState(state)
    return _as_float(params.intercept(state) * r ** (-params.alpha(state)))


def boundary_radius(t, state: LinkState, params: PropagationParams):
    """Distance at which a ``state`` link has path gain ``t``; inverse of :func:`link_power`."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("link power must be positive")
    state = LinkState(state)
    return _as_float((params.intercept(state) / t) ** (1.0 / params.alpha(state)))


def main_lobe_gain(antenna: AntennaParams) -> float:
    """Main-lobe gain of the sectored pattern, ``N - (N - 1) * eps``.

    This is the value that makes the pattern conserve total radiated power:
    a main lobe of width 2*pi/N plus a side lobe of gain ``eps`` elsewhere.
    """
    n = antenna.n_antennas
    eps = antenna.side_lobe
    return float((2 * np.pi - (2 * np.pi - 2 * np.pi / n) * eps) / (2 * np.pi / n))
