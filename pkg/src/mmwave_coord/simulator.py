"""Monte Carlo simulation of shared mmWave networks seen by a typical user.

Each realization places every operator's BSs as a PPP in a disc around
the user at the origin, marks links LoS with the blockage law, and draws
unit-mean exponential fading and a main-lobe indicator per BS.  BSs are
kept sorted by link power (strongest first), so the serving BS and the
coordination sets are prefixes of the sorted arrays.

Randomness is counter based: operator ``m`` of realization ``i`` draws
from a Philox stream keyed by ``(base_seed, i)`` with ``m`` in the
counter, so any realization can be regenerated alone, and results do not
depend on chunking or thread count.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .coverage import RateCoverageCurve, config_hash
from .propagation import LinkState, NetworkConfig, PropagationParams

__all__ = [
    "BsRecord",
    "OperatorLinks",
    "NetworkRealization",
    "CoordinationSets",
    "CapacityWarning",
    "default_window_radius",
    "sample_realization",
    "associate",
    "form_coordination_sets",
    "instantaneous_sinr",
    "sample_batches",
    "empirical_rate_coverage",
    "empirical_rate_coverage_many",
    "empirical_cdf_tk",
    "empirical_los_fraction",
    "empirical_laplace",
    "window_sufficiency",
    "EmpiricalCdf",
    "THREADS_ENV",
]

THREADS_ENV = "MMWAVE_COORD_THREADS"
CHUNK = 2000
_MAX_WIDENING = 20


class CapacityWarning(UserWarning):
    """More BSs coordinated than the array can null."""


class BsRecord(NamedTuple):
    operator_index: int
    distance: float
    state: LinkState
    link_power: float
    fading: float
    beam_hit: bool


@dataclass(frozen=True)
class OperatorLinks:
    """BSs of one operator in one realization, strongest first."""

    distance: np.ndarray
    los: np.ndarray
    link_power: np.ndarray
    fading: np.ndarray
    beam_uniform: np.ndarray
    window_radius: float
    widenings: int = 0

    def __len__(self):
        return self.distance.size

    def beam_hit(self, n_antennas: int) -> np.ndarray:
        """Main-lobe indicator; probability ``1/n_antennas``."""
        return self.beam_uniform < 1.0 / n_antennas


@dataclass(frozen=True)
class NetworkRealization:
    operators: tuple
    seed: int
    index: int = 0

    @property
    def window_radius(self) -> float:
        return max(op.window_radius for op in self.operators)

    def records(self, operator_index: int, n_antennas: int) -> list[BsRecord]:
        links = self.operators[operator_index]
        hits = links.beam_hit(n_antennas)
        return [
            BsRecord(operator_index, float(links.distance[j]),
                     LinkState.LOS if links.los[j] else LinkState.NLOS,
                     float(links.link_power[j]), float(links.fading[j]), bool(hits[j]))
            for j in range(len(links))
        ]


@dataclass(frozen=True)
class CoordinationSets:
    sizes: tuple
    overflow: tuple

    def members(self, operator_index: int) -> np.ndarray:
        return np.arange(self.sizes[operator_index])


def default_window_radius(config: NetworkConfig) -> float:
    """Disc radius large enough that truncation bias is below Monte Carlo noise."""
    lam_min = min(op.density for op in config.operators)
    by_count = 5.0 / math.sqrt(math.pi * lam_min)
    mu = config.propagation.mu
    return max(10.0 * mu, by_count) if math.isfinite(mu) else 10.0 * by_count


def _link_powers(r, los, pp: PropagationParams):
    with np.errstate(divide="ignore"):
        return np.where(los, pp.c_los * r ** -pp.alpha_los, pp.c_nlos * r ** -pp.alpha_nlos)


def _draw_operator(density, pp, radius, base_seed, index, m, min_count) -> OperatorLinks:
    for widening in range(_MAX_WIDENING):
        rng = np.random.Generator(np.random.Philox(key=[base_seed, index], counter=[0, 0, widening, m]))
        rad = radius * 2.0**widening
        n = rng.poisson(density * math.pi * rad * rad)
        if n >= min_count:
            break
    else:
        raise RuntimeError("could not place enough BSs even after widening the window")
    r = rad * np.sqrt(rng.random(n))
    los = rng.random(n) < pp.state_probability(r, LinkState.LOS)
    fading = rng.standard_exponential(n)
    beam = rng.random(n)
    t = _link_powers(r, los, pp)
    order = np.lexsort((r, -t))
    return OperatorLinks(r[order], los[order], t[order], fading[order], beam[order], rad, widening)


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def sample_realization(config: NetworkConfig, window_radius: float | None = None, seed: int = 0,
                       index: int = 0, min_counts: Sequence[int] | None = None) -> NetworkRealization:
    """Draw realization ``index`` of the stream seeded by ``seed``.

    An operator with fewer than ``min_counts[m]`` BSs (default one) is
    redrawn in a window of twice the radius, repeatedly.
    """
    radius = default_window_radius(config) if window_radius is None else float(window_radius)
    if not radius > 0:
        raise ValueError("window_radius must be positive")
    seed = _check_seed(seed)
    mins = [1] * len(config.operators) if min_counts is None else list(min_counts)
    ops = tuple(
        _draw_operator(op.density, config.propagation, radius, seed, index, m, mins[m])
        for m, op in enumerate(config.operators)
    )
    return NetworkRealization(ops, seed, index)


def associate(realization: NetworkRealization, n_antennas: int = 1) -> BsRecord:
    """Serving BS: the strongest BS of operator 1."""
    links = realization.operators[0]
    if len(links) == 0:
        raise ValueError("operator 1 has no BS in this realization")
    return realization.records(0, n_antennas)[0]


def form_coordination_sets(realization: NetworkRealization, config: NetworkConfig) -> CoordinationSets:
    sizes, overflow = [], []
    for links, op in zip(realization.operators, config.operators):
        sizes.append(min(op.coord_size, len(links)))
        overflow.append(op.coord_size >= len(links) and op.coord_size > 0)
    return CoordinationSets(tuple(sizes), tuple(overflow))


def _check_capacity(config: NetworkConfig):
    if config.total_coord_size > config.antenna.n_antennas:
        warnings.warn(
            f"{config.total_coord_size} coordinated BSs exceed the {config.antenna.n_antennas} "
            "antennas available for nulling; results assume ideal nulling anyway",
            CapacityWarning, stacklevel=3)


def _operator_interference(links: OperatorLinks, op, antenna, coord_size):
    hits = links.beam_hit(antenna.n_antennas)
    gain = np.where(hits, antenna.main_lobe, antenna.side_lobe)
    contrib = op.tx_power * gain * links.fading * links.link_power
    return float(contrib[coord_size:].sum())


def instantaneous_sinr(realization: NetworkRealization, config: NetworkConfig) -> float:
    """SINR of the typical user with ideal nulling of every coordinated BS."""
    if config.operators[0].coord_size < 1:
        raise ValueError("serving operator must coordinate with its serving BS")
    sets = form_coordination_sets(realization, config)
    ant = config.antenna
    interference = sum(
        _operator_interference(links, op, ant, k)
        for links, op, k in zip(realization.operators, config.operators, sets.sizes)
    )
    head = realization.operators[0]
    signal = config.operators[0].tx_power * ant.serving_gain * head.fading[0] * head.link_power[0]
    return signal / (config.noise_power + interference)


# ---------------------------------------------------------------- batches

@dataclass
class _Ragged:
    """One operator over a chunk of realizations, concatenated."""

    offsets: np.ndarray
    distance: np.ndarray
    los: np.ndarray
    link_power: np.ndarray
    fading: np.ndarray
    beam_uniform: np.ndarray
    widenings: int

    @property
    def counts(self):
        return np.diff(self.offsets)

    def within(self, radius: float) -> "_Ragged":
        """Same realizations with every BS beyond ``radius`` removed."""
        keep = self.distance <= radius
        counts = self.segment_sum(keep.astype(float)).astype(np.int64)
        return _Ragged(np.concatenate([[0], np.cumsum(counts)]), self.distance[keep], self.los[keep],
                       self.link_power[keep], self.fading[keep], self.beam_uniform[keep], self.widenings)

    def segment_sum(self, values):
        """Per-realization sums; empty realizations give zero."""
        ids = np.repeat(np.arange(len(self.offsets) - 1), self.counts)
        return np.bincount(ids, weights=values, minlength=len(self.offsets) - 1)

    def rank(self):
        """Position of each BS inside its realization (0 = strongest)."""
        return np.arange(self.offsets[-1]) - np.repeat(self.offsets[:-1], self.counts)


@dataclass
class Batch:
    """A chunk of realizations ``start .. start + size - 1``."""

    start: int
    size: int
    operators: list
    diagnostics: dict = field(default_factory=dict)


def _sample_chunk(densities, pp, radius, seed, start, stop, mins) -> Batch:
    ops = []
    for m, density in enumerate(densities):
        parts = [_draw_operator(density, pp, radius, seed, i, m, mins[m]) for i in range(start, stop)]
        counts = np.array([len(p) for p in parts])
        ops.append(_Ragged(
            np.concatenate([[0], np.cumsum(counts)]),
            np.concatenate([p.distance for p in parts]),
            np.concatenate([p.los for p in parts]),
            np.concatenate([p.link_power for p in parts]),
            np.concatenate([p.fading for p in parts]),
            np.concatenate([p.beam_uniform for p in parts]),
            int(sum(p.widenings for p in parts)),
        ))
    return Batch(start, stop - start, ops, {"widenings": sum(o.widenings for o in ops)})


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sample_batches(config: NetworkConfig, n_realizations: int, base_seed: int,
                   window_radius: float | None = None, min_counts=None, chunk: int = CHUNK):
    """Yield realization chunks in order; threads never change the draws."""
    if n_realizations < 1:
        raise ValueError("n_realizations must be at least 1")
    seed = _check_seed(base_seed)
    radius = default_window_radius(config) if window_radius is None else float(window_radius)
    densities = [op.density for op in config.operators]
    mins = [1] * len(densities) if min_counts is None else list(min_counts)
    bounds = [(a, min(a + chunk, n_realizations)) for a in range(0, n_realizations, chunk)]
    pp = config.propagation
    threads = _threads()
    if threads == 1:
        for a, b in bounds:
            yield _sample_chunk(densities, pp, radius, seed, a, b, mins)
        return
    with ThreadPoolExecutor(threads) as pool:
        window = threads * 2
        for w in range(0, len(bounds), window):
            futures = [pool.submit(_sample_chunk, densities, pp, radius, seed, a, b, mins)
                       for a, b in bounds[w:w + window]]
            for fut in futures:
                yield fut.result()


def _batch_interference(rag: _Ragged, op, antenna, coord_size):
    hits = rag.beam_uniform < 1.0 / antenna.n_antennas
    gain = np.where(hits, antenna.main_lobe, antenna.side_lobe)
    contrib = op.tx_power * gain * rag.fading * rag.link_power
    return rag.segment_sum(np.where(rag.rank() >= coord_size, contrib, 0.0))


def _batch_sinr(batch: Batch, config: NetworkConfig):
    ant = config.antenna
    interference = np.zeros(batch.size)
    for rag, op in zip(batch.operators, config.operators):
        interference += _batch_interference(rag, op, ant, op.coord_size)
    head = batch.operators[0]
    first = head.offsets[:-1]
    signal = config.operators[0].tx_power * ant.serving_gain * head.fading[first] * head.link_power[first]
    return signal / (config.noise_power + interference)


def _geometry_key(config: NetworkConfig):
    return (tuple(op.density for op in config.operators), config.propagation)


def empirical_rate_coverage_many(configs: Sequence[NetworkConfig], gamma_grid, n_realizations: int,
                                 base_seed: int = 0, window_radius: float | None = None):
    """Monte Carlo coverage curves for several configs on common draws.

    Every config must use a prefix of the operators of the config with
    the most operators (same densities and propagation), so the draws of
    one sampling pass serve all of them.  A config with fewer operators
    sees exactly the draws it would get on its own.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one config")
    widest = max(configs, key=lambda c: len(c.operators))
    key = _geometry_key(widest)
    for c in configs:
        densities, pp = _geometry_key(c)
        if pp != key[1] or densities != key[0][: len(densities)]:
            raise ValueError("configs do not share geometry; simulate them separately")
        if c.operators[0].coord_size < 1:
            raise ValueError("serving operator must coordinate with its serving BS")
        _check_capacity(c)
    gamma = np.asarray(gamma_grid, dtype=float)
    if gamma.ndim != 1 or np.any(gamma < 0):
        raise ValueError("gamma_grid must be a 1-d array of nonnegative rates")
    radius = default_window_radius(widest) if window_radius is None else float(window_radius)
    hits = np.zeros((len(configs), gamma.size), dtype=np.int64)
    widenings = 0
    for batch in sample_batches(widest, n_realizations, base_seed, radius):
        widenings += batch.diagnostics["widenings"]
        for ci, c in enumerate(configs):
            sub = Batch(batch.start, batch.size, batch.operators[: len(c.operators)])
            rate = c.total_bandwidth * np.log2(1.0 + _batch_sinr(sub, c))
            hits[ci] += (rate[:, None] > gamma[None]).sum(axis=0)
    curves = []
    for ci, c in enumerate(configs):
        p = hits[ci] / n_realizations
        curves.append(RateCoverageCurve(
            gamma, p, "monte_carlo",
            {"config_hash": config_hash(c), "engine": "monte_carlo", "n_realizations": n_realizations,
             "base_seed": int(base_seed), "window_radius": radius, "window_widenings": widenings},
            stderr=np.sqrt(p * (1.0 - p) / n_realizations)))
    return curves


def window_sufficiency(config: NetworkConfig, gamma_grid, n_realizations: int, base_seed: int = 0,
                       window_radius: float | None = None):
    """Truncation check: coverage in a doubled window with and without BSs beyond the default radius.

    Both curves come from the same realizations, so their difference is the
    truncation bias alone.  Returns ``(coverage_doubled, coverage_truncated,
    stderr)``.
    """
    radius = default_window_radius(config) if window_radius is None else float(window_radius)
    gamma = np.asarray(gamma_grid, dtype=float)
    full = np.zeros(gamma.size)
    cut = np.zeros(gamma.size)
    for batch in sample_batches(config, n_realizations, base_seed, 2 * radius):
        trimmed = Batch(batch.start, batch.size, [rag.within(radius) for rag in batch.operators])
        if np.any(trimmed.operators[0].counts == 0):
            raise RuntimeError("serving operator empty inside the default window")
        for acc, b in ((full, batch), (cut, trimmed)):
            rate = config.total_bandwidth * np.log2(1.0 + _batch_sinr(b, config))
            acc += (rate[:, None] > gamma[None]).sum(axis=0)
    full /= n_realizations
    cut /= n_realizations
    return full, cut, np.sqrt(full * (1 - full) / n_realizations)


def empirical_rate_coverage(config: NetworkConfig, gamma_grid, n_realizations: int, base_seed: int = 0,
                            window_radius: float | None = None) -> RateCoverageCurve:
    """Fraction of realizations whose rate exceeds each threshold, with standard errors."""
    return empirical_rate_coverage_many([config], gamma_grid, n_realizations, base_seed, window_radius)[0]


class EmpiricalCdf:
    """Empirical distribution of a sample."""

    def __init__(self, sample):
        self.sample = np.sort(np.asarray(sample, dtype=float))

    def __len__(self):
        return self.sample.size

    def __call__(self, x):
        return np.searchsorted(self.sample, np.asarray(x, dtype=float), side="right") / self.sample.size

    def ks_distance(self, cdf) -> float:
        """Sup distance to a continuous reference ``cdf`` evaluated at the sample points."""
        n = self.sample.size
        ref = np.asarray(cdf(self.sample), dtype=float)
        upper = np.arange(1, n + 1) / n - ref
        lower = ref - np.arange(n) / n
        return float(max(upper.max(), lower.max()))


def _rank_sample(config, operator_index, k, n_realizations, base_seed, window_radius, reducer):
    if k < 1:
        raise ValueError("rank K must be at least 1")
    mins = [1] * len(config.operators)
    mins[operator_index] = max(k, 1)
    out = []
    for batch in sample_batches(config, n_realizations, base_seed, window_radius, mins):
        out.append(reducer(batch.operators[operator_index]))
    return np.concatenate(out)


def empirical_cdf_tk(config: NetworkConfig, operator_index: int, k: int, n_realizations: int,
                     base_seed: int = 0, window_radius: float | None = None) -> EmpiricalCdf:
    """ECDF of the ``k``-th strongest link power of one operator."""
    values = _rank_sample(config, operator_index, k, n_realizations, base_seed, window_radius,
                          lambda rag: rag.link_power[rag.offsets[:-1] + k - 1])
    return EmpiricalCdf(values)


def empirical_los_fraction(config: NetworkConfig, operator_index: int, k, n_realizations: int,
                           base_seed: int = 0, window_radius: float | None = None):
    """Average share of LoS links among the ``k`` strongest BSs of one operator.

    ``k`` may be a sequence of set sizes; all of them are read off the same
    realizations and an array is returned.
    """
    ranks = np.atleast_1d(np.asarray(k, dtype=int))
    if np.any(ranks < 1):
        raise ValueError("set size must be at least 1")
    top = int(ranks.max())

    def reducer(rag):
        first = rag.offsets[:-1]
        los = rag.los[first[:, None] + np.arange(top)[None]]
        return np.cumsum(los, axis=1)[:, ranks - 1] / ranks[None]

    values = _rank_sample(config, operator_index, top, n_realizations, base_seed, window_radius,
                          reducer).mean(axis=0)
    return float(values[0]) if np.ndim(k) == 0 else values


def empirical_laplace(config: NetworkConfig, operator_index: int, s, n_realizations: int,
                      base_seed: int = 0, window_radius: float | None = None):
    """Sample mean of ``exp(-s I)`` for the out-of-set interference of one operator."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    op = config.operators[operator_index]
    total = np.zeros(s.shape)
    for batch in sample_batches(config, n_realizations, base_seed, window_radius):
        interference = _batch_interference(batch.operators[operator_index], op, config.antenna, op.coord_size)
        total += np.exp(-interference[:, None] * s[None]).sum(axis=0)
    return total / n_realizations
