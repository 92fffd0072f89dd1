"""Acceptance criteria 1-9 at their stated tolerances and runtime budgets.

Criteria with several clauses are split into one test per clause; the
terminal summary aggregates them into one pass/fail line per criterion.
"""

import math
import time

import numpy as np
import pytest

from kpplattice import dispersion as D
from kpplattice import envelopes as E
from kpplattice import fronts as F
from kpplattice import lattice as L
from kpplattice import media as M
from kpplattice import validation as V

# independent oracle (scipy brentq on the stationarity equation, xtol 1e-15)
MU_STAR_1 = 0.90710329357629
C0_1 = 2.0734446842053407

TAUS = [10.0, 20.0, 40.0, 80.0]
PERIOD = 2 * math.pi
MONO_TOL = 1e-8


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1():
    t0 = time.perf_counter()
    disp = D.mu_star(1.0)
    assert abs(D.stationarity_residual(disp.mu_star, 1.0)) < 1e-10
    assert disp.mu_star == pytest.approx(MU_STAR_1, abs=1e-10)
    assert disp.c0 == pytest.approx(C0_1, abs=1e-10)
    cb = D.envelope_speed(disp.mu_star, 1.0)
    assert D.envelope_speed(disp.mu_star + 0.05, 1.0) > cb
    assert D.envelope_speed(disp.mu_star - 0.05, 1.0) > cb
    rng = np.random.default_rng(2024)
    for _ in range(50):
        a_bar = float(rng.uniform(0.05, 5.0))
        c0 = D.mu_star(a_bar).c0
        gamma = c0 * float(rng.uniform(1.001, 3.0))
        r = D.mu_roots(gamma, a_bar)
        assert abs(D.envelope_speed(r.mu_small, a_bar) - gamma) < 1e-9
        assert abs(D.envelope_speed(r.mu_large, a_bar) - gamma) < 1e-9
    assert time.perf_counter() - t0 < 1.0


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2(periodic_path):
    t0 = time.perf_counter()
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 2.0)))
    cfg = L.SimConfig(dt=1e-3, boundary_right="copy", recenter=False)
    s = L.init_from_profile(lambda x: np.full(x.shape, 0.5), (0, 16))
    s, _ = L.evolve(s, flat, math.log(3.0), cfg)
    assert np.max(np.abs(s.values - 0.75)) < 1e-8

    s = L.init_from_profile(lambda x: np.full(x.shape, 0.5), (0, 16))
    q = []
    L.evolve(s, periodic_path, 10.0, L.SimConfig(dt=1e-3, boundary_right="copy", recenter=False, cadence=0.05),
             recorder=lambda st: q.append((1 / st.values[0] - 1) * math.exp(periodic_path.integral(0.0, st.time))))
    assert len(q) > 100
    assert np.max(np.abs(np.asarray(q) - q[0])) < 1e-7
    assert time.perf_counter() - t0 < 5.0


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3(constant_path, periodic_path, telegraph_path, spline_path):
    t0 = time.perf_counter()
    for path in (constant_path, periodic_path, telegraph_path, spline_path):
        res = V.comparison_fuzz(path, L.SimConfig(), pairs=200, duration=10.0, tol=1e-8)
        assert res.passed, (path.kind, res)
    assert time.perf_counter() - t0 < 120.0


# -- 4 ---------------------------------------------------------------------------

@pytest.mark.parametrize("which", ["periodic", "telegraph"])
def test_criterion_4(which, periodic_path, telegraph_path):
    path = periodic_path if which == "periodic" else telegraph_path
    t0 = time.perf_counter()
    ms = D.mu_star(M.least_mean_value(path)).mu_star
    env = E.build_envelope(path, 0.5)
    assert env.mu_tilde == pytest.approx(0.5 * (0.5 + min(1.0, ms)))
    res = V.envelope_residuals(path, 0.5, points=1000, seed=1, tol=1e-6)
    assert res.passed, res
    assert np.min(env.corrector.midpoint_margin()) >= -1e-12
    assert time.perf_counter() - t0 < 30.0


# -- 5 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def mu_half():
    return 0.5 * D.mu_star(1.0).mu_star


@pytest.fixture(scope="module")
def ladder(periodic_path, mu_half):
    return timed(L.back_propagate_front, periodic_path, mu_half, TAUS, [0.0, PERIOD], (-100, 60), 2000)


@pytest.fixture(scope="module")
def front_tau80(periodic_path, mu_half):
    return timed(L.front_state, periodic_path, mu_half, 80.0, 0.0, 2000)


def test_criterion_5_monotone(ladder):
    bp, _ = ladder
    assert bp.tau_monotonicity_violation() <= MONO_TOL
    assert bp.x_monotonicity_violation() <= MONO_TOL


def test_criterion_5_sandwich(ladder, periodic_path, mu_half):
    bp, _ = ladder
    env = E.build_envelope(periodic_path, mu_half)
    sup = E.SuperSolution(mu_half, periodic_path)
    for tau in bp.taus:
        for t in bp.eval_times:
            x = D.travel(periodic_path, mu_half, t) + bp.j
            V_ = bp.profile(tau, t)
            assert np.all(V_ <= sup(x, t) + MONO_TOL)
            assert np.all(V_ >= env(x, t) - MONO_TOL)


def test_criterion_5_cauchy(ladder):
    bp, _ = ladder
    for t in bp.eval_times:
        d = [row[3] for row in bp.cauchy() if row[2] == t]
        assert all(b < a for a, b in zip(d, d[1:])), d


def test_criterion_5_tail_fit(front_tau80, mu_half):
    state, _ = front_tau80
    mu_hat = F.tail_decay(state)   # default window [X + 5, X + 15]
    assert abs(mu_hat / mu_half - 1) < 0.02, f"mu_hat={mu_hat}, mu={mu_half}"


def test_criterion_5_stationarity(periodic_path, mu_half, ladder):
    err, seconds = timed(L.stationarity_check, periodic_path, mu_half, PERIOD, 80.0, (-100, 60), 2000)
    assert err < 1e-3
    assert ladder[1] + seconds < 600.0


# -- 6 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def speed(periodic_path, mu_half):
    return timed(F.speed_run, periodic_path, mu_half, 100.0, 80.0, 2000)


def test_criterion_6_drift(speed):
    (series, _), seconds = speed
    assert F.relative_drift(series) < 0.02
    assert seconds < 600.0


def test_criterion_6_least_mean(speed, mu_half):
    (series, _), _ = speed
    ref = (math.exp(mu_half) + math.exp(-mu_half) - 2 + 1) / mu_half
    est = F.least_mean_speed(series, 20.0)
    assert abs(est.least_mean / ref - 1) < 0.02, f"least mean speed {est.least_mean} vs {ref}"


# -- 7 ---------------------------------------------------------------------------

def test_criterion_7():
    t0 = time.perf_counter()
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 110.0)))
    wavy = M.build_media(M.sinusoid(horizon=(0.0, 110.0)))
    c0 = D.mu_star(1.0).c0
    assert c0 == pytest.approx(2.07, abs=0.005)
    for path in (flat, wavy):
        r = F.spreading_speed(path, horizon=100.0)
        assert abs(r.right_speed / c0 - 1) < 0.05
        assert abs(r.left_speed / c0 - 1) < 0.05
    assert time.perf_counter() - t0 < 600.0


# -- 8 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def stability(periodic_path, mu_half):
    return timed(F.stability_run, periodic_path, mu_half, F.Perturbation(0.5, 0.1, 1.0), 100.0, 80.0, 2000)


def test_criterion_8_admissible(stability):
    rep, seconds = stability
    assert rep.increase() <= 1e-6
    assert np.all(rep.alpha >= 1.0)
    assert rep.times[-1] == pytest.approx(100.0)
    assert rep.alpha[-1] - 1 < 0.02
    assert seconds < 600.0


def test_criterion_8_zero(periodic_path, mu_half):
    rep = F.stability_run(periodic_path, mu_half, F.Perturbation(0.0, 0.1, 1.0), 100.0, 80.0, 2000)
    assert np.max(np.abs(rep.alpha - 1.0)) <= 1e-12


# -- 9 ---------------------------------------------------------------------------

def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


@pytest.mark.slow
def test_criterion_9(periodic_path, mu_half, ladder, front_tau80, speed, stability):
    t0 = time.perf_counter()
    bp, _ = ladder
    bp2 = L.back_propagate_front(periodic_path, mu_half, TAUS, [0.0, PERIOD], (-100, 60), 4000)
    for key, prof in bp.profiles.items():
        assert np.max(np.abs(prof - bp2.profiles[key])) < 0.005

    wide = L.front_state(periodic_path, mu_half, 80.0, 0.0, 4000)
    assert _rel(F.tail_decay(front_tau80[0]), F.tail_decay(wide)) < 0.005

    (series, _), _ = speed
    series2, _ = F.speed_run(periodic_path, mu_half, 100.0, 80.0, 4000)
    assert _rel(F.least_mean_speed(series, 20.0).least_mean, F.least_mean_speed(series2, 20.0).least_mean) < 0.005
    assert _rel(series.positions[-1], series2.positions[-1]) < 0.005

    flat = M.build_media(M.constant(1.0, horizon=(0.0, 110.0)))
    base = F.spreading_speed(flat, horizon=100.0)
    double = F.spreading_speed(flat, horizon=100.0, width=2 * F.default_spreading_width(flat, 100.0))
    assert _rel(base.right_speed, double.right_speed) < 0.005

    rep, _ = stability
    rep2 = F.stability_run(periodic_path, mu_half, F.Perturbation(), 100.0, 80.0, 4000)
    assert np.max(np.abs(rep.alpha - rep2.alpha) / rep.alpha) < 0.005
    assert time.perf_counter() - t0 < 1800.0
