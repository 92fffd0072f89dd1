import math

import numpy as np
import pytest

from kpplattice import dispersion as D
from kpplattice import media as M
from kpplattice.errors import DomainError

# oracles frozen from scipy.optimize.brentq (xtol 1e-15)
MU_STAR_1 = 0.90710329357629
C0_1 = 2.0734446842053407
ROOTS_GAMMA_3 = (0.38277021086578594, 1.860180685192142)


def test_envelope_speed_values():
    assert D.envelope_speed(1.0, 1.0) == pytest.approx(math.e + 1 / math.e - 1, rel=1e-15)
    with pytest.raises(DomainError):
        D.envelope_speed(0.0, 1.0)


def test_envelope_speed_blows_up_at_small_mu():
    grid = np.linspace(1e-3, 1e-1, 50)
    vals = [D.envelope_speed(m, 1.0) for m in grid]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[0] * grid[0] == pytest.approx(1.0, rel=1e-3)


def test_mu_star_oracle():
    r = D.mu_star(1.0)
    assert r.mu_star == pytest.approx(MU_STAR_1, abs=1e-10)
    assert r.c0 == pytest.approx(C0_1, abs=1e-10)
    assert D.envelope_speed(r.mu_star, 1.0) == r.c0


def test_mu_star_increases_with_a_bar():
    vals = [D.mu_star(a).mu_star for a in (0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_unimodal_on_geometric_grid():
    mus = np.geomspace(1e-3, 20, 4000)
    c = np.array([D.envelope_speed(m, 1.0) for m in mus])
    interior = np.where((c[1:-1] < c[:-2]) & (c[1:-1] < c[2:]))[0] + 1
    assert len(interior) == 1
    k = interior[0]
    assert mus[k - 1] <= MU_STAR_1 <= mus[k + 1]


def test_mu_roots_oracle():
    r = D.mu_roots(3.0, 1.0)
    assert r.mu_small == pytest.approx(ROOTS_GAMMA_3[0], abs=1e-10)
    assert r.mu_large == pytest.approx(ROOTS_GAMMA_3[1], abs=1e-10)
    assert not r.degenerate


def test_mu_roots_degenerate_and_below():
    c0 = D.mu_star(1.0).c0
    r = D.mu_roots(c0, 1.0)
    assert r.degenerate and r.mu_small == r.mu_large
    with pytest.raises(DomainError, match="below the minimal speed"):
        D.mu_roots(c0 - 0.1, 1.0)


def test_instantaneous_speed():
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 20.0)))
    wavy = M.build_media(M.sinusoid(horizon=(0.0, 20.0)))
    assert D.instantaneous_speed(flat, 3.0, 1.0) == pytest.approx(2.0861612696304874, rel=1e-14)
    assert D.instantaneous_speed(wavy, math.pi / 2, 1.0) == pytest.approx(2.5861612696304874, abs=1e-4)
    assert D.instantaneous_speed(flat, 7.0, 0.6) == pytest.approx(D.envelope_speed(0.6, 1.0), rel=1e-14)


def test_front_displacement():
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 20.0)))
    assert D.front_displacement(flat, 1.0, 0.0, 10.0) == pytest.approx(20.861612696304874, rel=1e-13)
    assert D.front_displacement(flat, 1.0, 4.0, 4.0) == 0.0


def test_displacement_shift_identity():
    p = M.build_media(M.telegraph(seed=1, horizon=(0.0, 60.0)))
    mu, s, t = 0.7, 12.5, 20.0
    lhs = D.front_displacement(p, mu, 0.0, t + s)
    rhs = D.front_displacement(p, mu, 0.0, s) + D.front_displacement(p.shift(s), mu, 0.0, t)
    assert lhs == pytest.approx(rhs, abs=1e-11)


def test_displacement_derivative_matches_speed():
    p = M.build_media(M.sinusoid(horizon=(0.0, 20.0)))
    h = 1e-3
    for t in (1.0, 5.0, 11.0):
        num = (D.front_displacement(p, 0.5, 0.0, t + h) - D.front_displacement(p, 0.5, 0.0, t - h)) / (2 * h)
        assert num == pytest.approx(D.instantaneous_speed(p, t, 0.5), abs=1e-4)
