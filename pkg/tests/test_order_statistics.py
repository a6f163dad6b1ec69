import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from mmwave_coord.order_statistics import (IntensityMeasures, LinkPowerDistribution, cdf_tk, joint_distance_pdf,
                                           joint_pdf_t1_tk, kth_distance_pdf, los_fraction, pdf_tk)
from mmwave_coord.propagation import LinkState, PropagationParams
from mmwave_coord.quadrature import QuadratureSettings, integrate

PP = PropagationParams()
FIG2 = IntensityMeasures(5e-5, PP)

# 30-digit quadrature of the defining radial integrals (lam = 5e-5, mu = 144)
MEASURE_ORACLE = [
    (1e-9, 0.13587069036163422475, 0.000022808455722262504347),
    (1e-11, 4.1982754110048104521, 0.00070862817753609552792),
    (1e-13, 6.5144064830696470735, 0.021208942317855437175),
    (1e-15, 6.5144065264837952593, 0.56838462226697213275),
]
# Poisson-count probabilities P[N(t) < K] from the same oracle measures
CDF_ORACLE = [(1, 1e-10, 0.36694652484451045235), (1, 1e-11, 0.015010819480627065382),
              (3, 1e-10, 0.91923095985710547746), (3, 1e-11, 0.21037239476224556693)]


@pytest.mark.parametrize("t, los, nlos", MEASURE_ORACLE)
def test_measures_against_high_precision_oracle(t, los, nlos):
    assert FIG2.lambda_los(t) == pytest.approx(los, rel=1e-12)
    assert FIG2.lambda_nlos(t) == pytest.approx(nlos, rel=1e-12)


def _radial(t, state):
    pp = PP
    a = (pp.intercept(state) / t) ** (1 / pp.alpha(state))
    f = lambda r: 2 * math.pi * 5e-5 * r * float(pp.state_probability(r, state))  # noqa: E731
    return sp_integrate.quad(f, 0, a, epsabs=0, epsrel=1e-12, limit=200)[0]


def test_lambda_los_example_point():
    assert FIG2.lambda_los(1e-8) == pytest.approx(_radial(1e-8, LinkState.LOS), rel=1e-9)


@pytest.mark.parametrize("state", list(LinkState))
def test_measures_against_scipy_quadrature(state):
    ts = np.geomspace(1e-18, 1e-5, 100)
    ours = FIG2.measure(ts, state)
    ref = np.array([_radial(t, state) for t in ts])
    assert np.max(np.abs(ours / ref - 1)) < 1e-8


def test_measures_limits():
    assert FIG2.lambda_los(1e30) < 1e-20
    assert FIG2.lambda_nlos(1e30) < 1e-20
    all_los = IntensityMeasures(5e-5, PropagationParams(mu=math.inf))
    assert all_los.lambda_nlos(1e-10) == 0.0


@given(st.floats(-18, -4), st.floats(0.01, 3.0))
def test_measures_nonincreasing(log_t, step):
    t = 10.0**log_t
    for state in LinkState:
        assert FIG2.measure(t * 10**step, state) <= FIG2.measure(t, state)
        assert FIG2.differential(t, t * 10**step, state) >= 0


@pytest.mark.parametrize("state", list(LinkState))
def test_derivative_matches_finite_difference(state):
    # below ~1e-12 the LoS measure is saturated and differences cancel
    ts = np.geomspace(1e-12 if state == LinkState.LOS else 1e-16, 1e-6, 50)
    h = 1e-5
    fd = (FIG2.measure(ts * (1 + h), state) - FIG2.measure(ts * (1 - h), state)) / (2 * h * ts)
    d = FIG2.lambda_deriv(ts, state)
    assert np.all(d < 0)
    assert np.max(np.abs(d / fd - 1)) < 1e-7


def test_full_blockage_kills_los_derivative():
    m = IntensityMeasures(5e-5, PropagationParams(mu=1e-9))
    assert abs(m.lambda_deriv(1e-12, LinkState.LOS)) < 1e-300


@pytest.mark.parametrize("k", [1, 2, 3, 5, 10])
def test_pdf_normalization(k):
    dist = LinkPowerDistribution(FIG2, k)
    assert dist.expect(lambda t: np.ones_like(t), QuadratureSettings(1e-9)).value == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("k, t, expected", CDF_ORACLE)
def test_cdf_against_poisson_oracle(k, t, expected):
    assert cdf_tk(t, k, FIG2) == pytest.approx(expected, rel=1e-12)


def test_cdf_limits_and_ordering():
    assert cdf_tk(1e3, 3, FIG2) == pytest.approx(1.0, abs=1e-15)
    assert cdf_tk(1e-40, 1, FIG2) < 1e-12
    ts = np.geomspace(1e-16, 1e-6, 60)
    for k in range(1, 8):
        assert np.all(cdf_tk(ts, k + 1, FIG2) >= cdf_tk(ts, k, FIG2) - 1e-15)
        assert np.all(np.diff(cdf_tk(ts, k, FIG2)) >= -1e-15)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_cdf_agrees_with_integrated_pdf(k):
    dist = LinkPowerDistribution(FIG2, k)
    lo, _ = dist.support
    ts = np.geomspace(dist.quantile(0.01), dist.quantile(0.99), 20)
    integrated = integrate(lambda t: dist.pdf(t), np.full(20, lo), ts, QuadratureSettings(1e-10)).value
    assert np.max(np.abs(integrated - dist.cdf(ts))) < 1e-6


def test_quantile_inverts_cdf():
    dist = LinkPowerDistribution(FIG2, 3)
    for q in (0.01, 0.3, 0.5, 0.97):
        assert dist.cdf(dist.quantile(q)) == pytest.approx(q, rel=1e-10)


def _single_state(p=None):
    """C_L = C_N and alpha_L = alpha_N; p = None means every link LoS."""
    if p is None:
        return PropagationParams(alpha_los=4, alpha_nlos=4, c_los=1e-7, c_nlos=1e-7, mu=math.inf)
    return PropagationParams(alpha_los=4, alpha_nlos=4, c_los=1e-7, c_nlos=1e-7, fixed_los_probability=p)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_single_state_reduction_of_pdf(k):
    lam, c, alpha = 5e-5, 1e-7, 4.0
    m = IntensityMeasures(lam, _single_state(0.5))
    r = np.geomspace(5.0, 400.0, 20)
    transformed = alpha * c * r ** (-1 - alpha) * pdf_tk(c * r**-alpha, k, m)
    assert np.max(np.abs(transformed / kth_distance_pdf(r, k, lam) - 1)) < 1e-6


@pytest.mark.parametrize("k", [2, 3, 6])
def test_single_state_reduction_of_joint_pdf(k):
    lam, c, alpha = 5e-5, 1e-7, 4.0
    m = IntensityMeasures(lam, _single_state())
    rng = np.random.default_rng(3)
    r1 = rng.uniform(5, 150, 20)
    rk = r1 + rng.uniform(1, 250, 20)
    jac = alpha**2 * c**2 * r1 ** (-1 - alpha) * rk ** (-1 - alpha)
    transformed = jac * joint_pdf_t1_tk(c * r1**-alpha, c * rk**-alpha, k, m)
    assert np.max(np.abs(transformed / joint_distance_pdf(r1, rk, k, lam) - 1)) < 1e-6


def test_joint_pdf_support():
    assert joint_pdf_t1_tk(1e-12, 1e-12, 3, FIG2) == 0.0
    assert joint_pdf_t1_tk(1e-12, 1e-11, 3, FIG2) == 0.0
    with pytest.raises(ValueError):
        joint_pdf_t1_tk(1e-11, 1e-12, 1, FIG2)


def _joint_mass(k):
    lo, hi = LinkPowerDistribution(FIG2, k).support
    lo1, hi1 = LinkPowerDistribution(FIG2, 1).support

    def outer(t1):
        inner_lo = np.minimum(lo, t1)
        return integrate(lambda tk: joint_pdf_t1_tk(t1[None], tk, k, FIG2), inner_lo, t1,
                         QuadratureSettings(1e-8)).value

    return integrate(outer, lo1, hi1, QuadratureSettings(1e-7)).value


@pytest.mark.parametrize("k", [2, 4])
def test_joint_pdf_normalization(k):
    assert _joint_mass(k) == pytest.approx(1.0, abs=1e-3)


def test_joint_marginal_recovers_pdf():
    k = 3
    dist = LinkPowerDistribution(FIG2, k)
    _, hi1 = LinkPowerDistribution(FIG2, 1).support
    tk = np.geomspace(dist.quantile(0.05), dist.quantile(0.95), 10)
    marg = integrate(lambda t1: joint_pdf_t1_tk(t1, tk[None], k, FIG2), tk, np.full(10, hi1),
                     QuadratureSettings(1e-9)).value
    assert np.max(np.abs(marg / dist.pdf(tk) - 1)) < 1e-4


def test_inverse_total_round_trip():
    values = np.array([1e-6, 0.5, 3.0, 80.0])
    assert np.allclose(FIG2.lambda_total(FIG2.inverse_total(values)), values, rtol=1e-12, atol=0)


@pytest.mark.parametrize("density, expected", [(8e-5, 0.90), (5e-5, 0.65)])
def test_los_fraction_headline(density, expected):
    assert los_fraction(10, IntensityMeasures(density, PP)) == pytest.approx(expected, abs=0.05)


def test_los_fraction_trends():
    dens = [5e-5, 8e-5, 1e-4]
    ks = [1, 3, 5, 10, 20]
    grid = np.array([[los_fraction(k, IntensityMeasures(d, PP)) for k in ks] for d in dens])
    assert np.all((grid > 0) & (grid < 1))
    assert np.all(np.diff(grid, axis=0) > 0)
    assert np.all(np.diff(grid, axis=1) < 0)


def test_rank_validation():
    with pytest.raises(ValueError):
        pdf_tk(1e-10, 0, FIG2)
    with pytest.raises(ValueError):
        cdf_tk(-1.0, 1, FIG2)
