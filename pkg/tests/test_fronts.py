import math

import numpy as np
import pytest

from kpplattice import dispersion as D
from kpplattice import fronts as F
from kpplattice import media as M
from kpplattice.errors import ConfigurationError, DomainError
from kpplattice.lattice import LatticeState


def _state(vals, offset=0, time=0.0):
    return LatticeState(offset, np.asarray(vals, dtype=float), time)


def test_front_position_step():
    s = _state([1, 1, 1, 0, 0, 0], offset=-2)
    assert F.front_position(s) == pytest.approx(0.5)


def test_front_position_exponential():
    i = np.arange(0, 20)
    s = _state(np.minimum(1.0, np.exp(-(i - 5.0))))
    assert abs(F.front_position(s, math.exp(-1)) - 6.0) <= 1.0


def test_front_position_absent():
    assert F.front_position(_state(np.zeros(10))) is None
    with pytest.raises(DomainError):
        F.front_position(_state(np.ones(10)), 1.5)


def test_decay_rate_exact_and_noisy():
    i = np.arange(0, 40)
    assert F.decay_rate(_state(np.exp(-0.7 * i)), (5, 30)) == pytest.approx(0.7, abs=1e-12)
    rng = np.random.default_rng(0)
    noisy = np.exp(-0.7 * i) * (1 + 0.01 * rng.uniform(-1, 1, i.size))
    assert F.decay_rate(_state(noisy), (5, 30)) == pytest.approx(0.7, abs=0.02)
    vals = np.exp(-0.7 * i)
    vals[10] = 0.0
    with pytest.raises(DomainError):
        F.decay_rate(_state(vals), (5, 30))


def test_least_mean_speed_theoretical():
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 100.0)))
    t = np.linspace(0, 100, 201)
    X = np.asarray(D.travel(flat, 1.0, t))
    series = F.FrontSeries(t, X, np.full(t.size, np.nan), X)
    for r in (5.0, 20.0):
        est = F.least_mean_speed(series, r, "theoretical_positions")
        assert est.least_mean == pytest.approx(2.0861612696304874, rel=1e-12)
    shifted = F.FrontSeries(t, X + 17.0, np.full(t.size, np.nan))
    assert F.least_mean_speed(shifted, 20.0).least_mean == pytest.approx(2.0861612696304874, rel=1e-12)
    with pytest.raises(DomainError):
        F.least_mean_speed(series, 60.0)


def test_least_mean_speed_matches_media_module():
    wavy = M.build_media(M.sinusoid(horizon=(0.0, 100.0)))
    mu = 0.6
    t = wavy.times[::10]
    X = np.asarray(D.travel(wavy, mu, t))
    est = F.least_mean_speed(F.FrontSeries(t, X, np.full(t.size, np.nan)), 20.0)
    # inf of window means of c = (k(mu) + a)/mu over the same node pairs
    sub = M.build_media(M.sinusoid(horizon=(0.0, 100.0), dt_media=0.1))
    a_least = M.empirical_least_mean(sub, 20.0, stride=1).least_mean_estimate
    expected = (4 * math.sinh(mu / 2) ** 2 + a_least) / mu
    assert est.least_mean == pytest.approx(expected, abs=1e-4)


def test_alpha_ratio_examples():
    base = _state(np.linspace(1.0, 0.1, 30))
    assert F.alpha_ratio(base, base)[0] == 1.0
    assert F.alpha_ratio(_state(2 * base.values), base)[0] == pytest.approx(2.0)
    alt = np.where(np.arange(30) % 2 == 0, 1.1, 0.9)
    assert F.alpha_ratio(_state(alt * base.values), base)[0] == pytest.approx(1 / 0.9)


def test_alpha_ratio_contracts():
    base = _state(np.linspace(1.0, 0.0, 30))
    with pytest.raises(DomainError):
        F.alpha_ratio(base, base)
    with pytest.raises(DomainError):
        F.alpha_ratio(_state(np.ones(30), offset=1), _state(np.ones(30)))


def test_perturbation_validation():
    F.Perturbation().validate()
    with pytest.raises(ConfigurationError):
        F.Perturbation(tail_ratio=1.5).validate()
    with pytest.raises(ConfigurationError):
        F.Perturbation(amplitude=-1.0).validate()
    p = F.Perturbation(0.5, 0.1)
    assert p.factor(np.array([-10.0, 0.0, 1e4]), 0.0) == pytest.approx([1.5, 1.5, 1.0])


def test_spreading_symmetric():
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 40.0)))
    r = F.spreading_speed(flat, horizon=30.0)
    assert r.right_speed == pytest.approx(r.left_speed, rel=1e-9)
    assert abs(r.right_speed / D.mu_star(1.0).c0 - 1) < 0.1


def test_stability_zero_perturbation_short():
    wavy = M.build_media(M.sinusoid(horizon=(-30.0, 30.0)))
    rep = F.stability_run(wavy, 0.45, F.Perturbation(0.0), horizon=5.0, tau=20.0, width=400)
    assert np.max(np.abs(rep.alpha - 1.0)) <= 1e-12


def test_stability_alpha_nonincreasing_short():
    wavy = M.build_media(M.sinusoid(horizon=(-30.0, 30.0)))
    rep = F.stability_run(wavy, 0.45, F.Perturbation(), horizon=10.0, tau=20.0, width=400)
    assert rep.alpha[0] == pytest.approx(1.5)
    assert rep.increase() <= 1e-6
    assert np.all(rep.alpha >= 1.0)


def test_relative_drift_exact_tracking():
    t = np.linspace(0, 10, 11)
    s = F.FrontSeries(t, 2 * t + 3, np.full(11, np.nan), 2 * t)
    assert F.relative_drift(s) == 0.0
