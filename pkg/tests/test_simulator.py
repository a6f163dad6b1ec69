import math
from dataclasses import replace

import numpy as np
import pytest

from mmwave_coord.order_statistics import IntensityMeasures, LinkPowerDistribution, los_fraction
from mmwave_coord.propagation import (AntennaParams, LinkState, NetworkConfig, OperatorParams, PropagationParams,
                                      link_power)
from mmwave_coord.simulator import (CapacityWarning, NetworkRealization, OperatorLinks, THREADS_ENV, associate,
                                    default_window_radius, empirical_cdf_tk, empirical_los_fraction,
                                    empirical_rate_coverage, empirical_rate_coverage_many, form_coordination_sets,
                                    instantaneous_sinr, sample_batches, sample_realization, window_sufficiency)

from conftest import shared_config

PP = PropagationParams()


def single(density=1e-4, k=1, n=12, p=1.0):
    return NetworkConfig((OperatorParams(density, 1.0, 1e8, k),), PP, AntennaParams(n, 0.1, p))


def hand_built(rows, index=0):
    """Realization of operator 1 from (distance, los, fading, beam_uniform) rows."""
    r = np.array([x[0] for x in rows], dtype=float)
    los = np.array([x[1] for x in rows], dtype=bool)
    t = np.where(los, PP.c_los * r**-PP.alpha_los, PP.c_nlos * r**-PP.alpha_nlos)
    order = np.lexsort((r, -t))
    links = OperatorLinks(r[order], los[order], t[order], np.array([x[2] for x in rows])[order],
                          np.array([x[3] for x in rows])[order], 1e4)
    return NetworkRealization((links,), seed=0, index=index)


def test_default_window():
    assert default_window_radius(shared_config()) == pytest.approx(1440.0)
    assert default_window_radius(single(1e-7)) == pytest.approx(5 / math.sqrt(math.pi * 1e-7))


def test_poisson_mean_count():
    cfg = single()
    counts = np.concatenate([b.operators[0].counts for b in sample_batches(cfg, 10000, 1, 500.0)])
    assert counts.mean() == pytest.approx(1e-4 * math.pi * 500.0**2, rel=0.01)


def test_los_marking_at_one_blockage_scale():
    cfg = single(1e-3)
    hits = total = 0
    for b in sample_batches(cfg, 3000, 2, 200.0):
        rag = b.operators[0]
        ring = (rag.distance >= 143) & (rag.distance <= 145)
        hits += int(rag.los[ring].sum())
        total += int(ring.sum())
    assert total > 3000
    assert hits / total == pytest.approx(math.exp(-1), abs=0.02)


def test_realization_invariants_and_determinism():
    cfg = shared_config()
    a = sample_realization(cfg, seed=123, index=7)
    b = sample_realization(cfg, seed=123, index=7)
    c = sample_realization(cfg, seed=123, index=8)
    for la, lb in zip(a.operators, b.operators):
        for field in ("distance", "los", "link_power", "fading", "beam_uniform"):
            assert np.array_equal(getattr(la, field), getattr(lb, field))
    assert not np.array_equal(a.operators[0].distance, c.operators[0].distance)
    for links in a.operators:
        assert len(links) > 0
        assert np.all(np.diff(links.link_power) <= 0)
        assert np.all(links.fading > 0)
        states = np.where(links.los, LinkState.LOS, LinkState.NLOS)
        expect = np.array([link_power(r, s, PP) for r, s in zip(links.distance, states)])
        assert np.array_equal(links.link_power, expect)


def test_realization_matches_batch_draws():
    cfg = shared_config()
    batch = next(iter(sample_batches(cfg, 5, 99)))
    one = sample_realization(cfg, seed=99, index=3)
    rag = batch.operators[1]
    sl = slice(rag.offsets[3], rag.offsets[4])
    assert np.array_equal(rag.link_power[sl], one.operators[1].link_power)


def test_sparse_window_is_widened():
    cfg = single(1e-6)
    real = sample_realization(cfg, window_radius=1.0, seed=4, min_counts=[3])
    assert len(real.operators[0]) >= 3
    assert real.operators[0].widenings > 0


def test_association_prefers_strong_los_link():
    real = hand_built([(200.0, True, 1.0, 0.5), (50.0, False, 1.0, 0.5)])
    serving = associate(real)
    assert serving.state == LinkState.LOS
    assert serving.link_power == pytest.approx(2.5e-11)
    assert real.operators[0].link_power[1] == pytest.approx(1.6e-14)


def test_single_bs_realization():
    real = hand_built([(80.0, False, 0.7, 0.9)])
    assert associate(real).distance == 80.0


def test_coordination_sets():
    real = hand_built([(50.0, True, 1.0, 0.5), (90.0, True, 1.0, 0.5), (300.0, False, 1.0, 0.5)])
    sets = form_coordination_sets(real, single(k=2))
    assert sets.sizes == (2,) and sets.overflow == (False,)
    sets = form_coordination_sets(real, single(k=5))
    assert sets.sizes == (3,) and sets.overflow == (True,)
    assert 0 in sets.members(0)
    two = NetworkRealization(real.operators * 2, 0)
    cfg2 = NetworkConfig(single().operators + (OperatorParams(1e-4, 1.0, 1e8, 0),), PP, AntennaParams())
    assert form_coordination_sets(two, cfg2).members(1).size == 0


def test_sinr_noise_limited_closed_form():
    cfg = single(k=1, p=0.6)
    real = hand_built([(60.0, True, 1.0, 0.5)])
    t1 = PP.c_los * 60.0**-2
    expected = 1.0 * 0.6 * cfg.antenna.main_lobe * t1 / cfg.noise_power
    assert instantaneous_sinr(real, cfg) == pytest.approx(expected, rel=1e-14)
    crowded = hand_built([(60.0, True, 1.0, 0.5), (70.0, True, 2.0, 0.01), (90.0, False, 0.3, 0.9)])
    assert instantaneous_sinr(crowded, single(k=3, p=0.6)) == pytest.approx(expected, rel=1e-14)
    assert instantaneous_sinr(crowded, single(k=1, p=0.6)) < expected


def test_interference_nonincreasing_in_coordination():
    cfg = shared_config()
    for i in range(20):
        real = sample_realization(cfg, seed=17, index=i)
        sinr = [instantaneous_sinr(real, cfg.with_operator(1, coord_size=k)) for k in range(0, 12)]
        assert np.all(np.diff(sinr) >= 0)


def test_beam_hits_and_fading_moments():
    cfg = single(n=12)
    u = np.concatenate([b.operators[0].beam_uniform for b in sample_batches(cfg, 2000, 3, 600.0)])
    fading = np.concatenate([b.operators[0].fading for b in sample_batches(cfg, 2000, 3, 600.0)])
    assert u.size > 100000
    frac = np.mean(u < 1 / 12)
    assert abs(frac - 1 / 12) < 3 * math.sqrt((1 / 12) * (11 / 12) / u.size)
    assert fading.mean() == pytest.approx(1.0, abs=0.01)


def test_zero_rate_is_always_covered():
    curve = empirical_rate_coverage(shared_config(), [0.0, 1e8], 500, base_seed=1)
    assert curve.coverage[0] == 1.0
    assert curve.provenance == "monte_carlo"
    assert curve.stderr[0] == 0.0


def test_thread_count_does_not_change_results(monkeypatch):
    cfg = shared_config()
    gamma = np.linspace(1e7, 2e9, 20)
    monkeypatch.setenv(THREADS_ENV, "1")
    a = empirical_rate_coverage(cfg, gamma, 5000, base_seed=8)
    monkeypatch.setenv(THREADS_ENV, "4")
    b = empirical_rate_coverage(cfg, gamma, 5000, base_seed=8)
    assert np.array_equal(a.coverage, b.coverage)


def test_many_configs_match_individual_runs():
    cfgs = [shared_config(k2=3), shared_config(k2=6, p=1.0, n=24), shared_config().without_sharing()]
    gamma = np.linspace(1e7, 2e9, 15)
    together = empirical_rate_coverage_many(cfgs, gamma, 3000, base_seed=21)
    for cfg, curve in zip(cfgs, together):
        alone = empirical_rate_coverage(cfg, gamma, 3000, base_seed=21)
        assert np.array_equal(alone.coverage, curve.coverage)


def test_many_configs_need_shared_geometry():
    with pytest.raises(ValueError):
        empirical_rate_coverage_many([shared_config(), single()], [1e8], 10)


def test_capacity_warning():
    with pytest.warns(CapacityWarning):
        empirical_rate_coverage(shared_config(k1=1, k2=12), [1e8], 50)


def test_window_is_sufficient():
    full, cut, se = window_sufficiency(shared_config(k2=3), np.linspace(1e7, 3e9, 30), 4000, base_seed=6)
    assert np.all(np.abs(full - cut) <= np.maximum(se, 1 / 4000))


def test_ecdf_order_and_determinism():
    cfg = single(5e-5)
    e1 = empirical_cdf_tk(cfg, 0, 1, 4000, base_seed=2)
    e2 = empirical_cdf_tk(cfg, 0, 2, 4000, base_seed=2)
    t = np.geomspace(1e-14, 1e-6, 50)
    assert np.all(e1(t) <= e2(t))
    again = empirical_cdf_tk(cfg, 0, 1, 4000, base_seed=2)
    assert np.array_equal(e1.sample, again.sample)
    dist = LinkPowerDistribution(IntensityMeasures(5e-5, PP), 1)
    assert e1.ks_distance(dist.cdf) < 0.03


def test_empirical_los_fraction_matches_analytic():
    cfg = single(8e-5)
    emp = empirical_los_fraction(cfg, 0, [1, 5, 10], 10000, base_seed=12)
    ana = [los_fraction(k, IntensityMeasures(8e-5, PP)) for k in (1, 5, 10)]
    assert np.allclose(emp, ana, atol=0.02)
    assert isinstance(empirical_los_fraction(cfg, 0, 3, 100), float)


def test_seed_range():
    with pytest.raises(ValueError):
        sample_realization(single(), seed=-1)
    with pytest.raises(ValueError):
        sample_realization(single(), window_radius=0.0)
