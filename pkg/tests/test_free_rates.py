import math
import warnings

import numpy as np
import pytest

from qrcsl.free_rates import (
    MomentumDistribution,
    RegimeWarning,
    TwoPacketState,
    collapse_decay_rate,
    collapse_decay_rate_momentum,
    cross_term_bound,
    energy_rate_asymptote,
    energy_rate_direct,
    energy_rate_exact,
)
from qrcsl.numerics import DomainError
from qrcsl.params import ModelParams

STATE = TwoPacketState(separation=10.0, width=0.5)


@pytest.mark.parametrize("mu,expected", [(1.0, 0.52404), (10.0, 0.97384), (100.0, 0.99971897)])
def test_collapse_rate_frozen_values(mu, expected):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        rate = collapse_decay_rate(STATE, mu).value_dimensionless
    assert rate == pytest.approx(expected, rel=2e-5)


@pytest.mark.parametrize("mu", [1.0, 10.0, 1e3, 1e6])
@pytest.mark.parametrize("width,sep", [(0.5, 10.0), (2.0, 6.0), (1.0, 0.0)])
def test_position_and_momentum_paths_agree(mu, width, sep):
    state = TwoPacketState(sep, width, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        a = collapse_decay_rate(state, mu).value_dimensionless
        b = collapse_decay_rate_momentum(state, mu).value_dimensionless
    assert a == pytest.approx(b, rel=1e-9)


def test_deviation_scales_as_inverse_mu_squared():
    dev = [1 - collapse_decay_rate(STATE, mu).value_dimensionless for mu in (100.0, 1000.0)]
    slope = math.log10(dev[1] / dev[0])
    assert slope == pytest.approx(-2.0, abs=0.02)


def test_physical_conversion_and_linearity_in_lambda():
    p = ModelParams.from_mu(1000.0)
    r = collapse_decay_rate(STATE, params=p)
    r2 = collapse_decay_rate(STATE, params=p.with_lambda(2 * p.lam))
    assert r.value_physical == pytest.approx(r.value_dimensionless * p.lam, rel=1e-15)
    assert r2.value_physical == pytest.approx(2 * r.value_physical, rel=1e-14)


def test_regime_warnings():
    with pytest.warns(RegimeWarning):
        collapse_decay_rate(TwoPacketState(1.0, 0.5), 1000.0)
    with pytest.warns(RegimeWarning):
        collapse_decay_rate(STATE, 1.0)


def test_state_validation():
    with pytest.raises(DomainError):
        TwoPacketState(-1.0, 1.0)
    with pytest.raises(DomainError):
        TwoPacketState(1.0, 0.0)
    with pytest.raises(DomainError):
        TwoPacketState(1.0, 1.0, 1.5)


def test_cross_term_bound():
    assert cross_term_bound(STATE) == pytest.approx(math.exp(-25.0), rel=1e-9)
    assert cross_term_bound(STATE) < 1e-10
    assert cross_term_bound(TwoPacketState(0.0, 0.5)) == pytest.approx(1.0, rel=1e-12)
    values = [cross_term_bound(TwoPacketState(d, 0.5)) for d in (0.0, 1.0, 3.0, 6.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_energy_rate_known_value_and_asymptote():
    assert energy_rate_exact(1.0).value_dimensionless == pytest.approx(0.949608, rel=2e-6)
    prev = math.inf
    for mu in (10.0, 100.0, 1e3, 1e5, 1e8):
        ratio = energy_rate_exact(mu).value_dimensionless / energy_rate_asymptote(mu)
        assert 1.0 <= ratio <= 1.01
        assert ratio - 1 == pytest.approx(0.3125 / mu**2, rel=2e-2)
        assert ratio < prev
        prev = ratio


def test_energy_rate_units():
    p = ModelParams()
    g = energy_rate_exact(params=p, n=3)
    assert g.units == "erg/s"
    assert g.value_physical == pytest.approx(g.value_dimensionless * 3 * p.lam * p.energy_unit_erg(), rel=1e-15)
    with pytest.raises(DomainError):
        energy_rate_exact(1.0, n=0)


@pytest.mark.parametrize("mu", [1.0, 10.0])
def test_energy_rate_direct_distribution_independent(mu):
    rng = np.random.default_rng(8)
    exact = energy_rate_exact(mu).value_dimensionless
    for _ in range(3):
        dist = MomentumDistribution(tuple(rng.uniform(0, 6, 4)), tuple(rng.uniform(0.1, 2, 4)))
        got = energy_rate_direct(dist, mu).value_dimensionless
        assert got == pytest.approx(exact, rel=1e-9)


def test_momentum_distribution_validation():
    with pytest.raises(DomainError):
        MomentumDistribution((1.0,), (0.0,))
    with pytest.raises(DomainError):
        MomentumDistribution((1.0, 2.0), (1.0,))
    with pytest.raises(DomainError):
        MomentumDistribution((-1.0,), (1.0,))
