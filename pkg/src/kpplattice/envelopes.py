"""Explicit super- and sub-solutions of the space-continuous equation

    v_t = v(x+1) + v(x-1) - 2 v(x) + a(t) v (1 - v).

The super-solution is the clamped exponential ``min(1, exp(-mu xi))`` with
``xi = x - int_0^t c``. The sub-solution subtracts a faster exponential
weighted by ``d * exp((mu~/mu - 1) A(t))``, where the corrector A turns the
least-mean condition on ``a`` into a pointwise inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dispersion
from .dispersion import _kinetic, travel
from .errors import ConfigurationError, DomainError
from .media import MediaPath, least_mean_value

DELTA_LADDER = (0.2, 0.1, 0.05, 0.02, 0.01)


def threshold_K(mu: float, mu_tilde: float) -> float:
    if not 0 < mu < mu_tilde:
        raise DomainError(f"need 0 < mu < mu_tilde, got mu={mu}, mu_tilde={mu_tilde}")
    return (mu * _kinetic(mu_tilde) - mu_tilde * _kinetic(mu)) / (mu_tilde - mu)


class SuperSolution:
    """``min(1, exp(-mu (x - int_0^t c)))``; vectorized in ``x``."""

    def __init__(self, mu: float, path: MediaPath):
        if not mu > 0:
            raise DomainError(f"mu must be positive, got {mu}")
        self.mu = mu
        self.path = path

    def unclamped(self, x, t):
        return np.exp(-self.mu * (np.asarray(x, dtype=float) - travel(self.path, self.mu, t)))

    def __call__(self, x, t):
        return np.minimum(1.0, self.unclamped(x, t))


def super_solution(mu: float, path: MediaPath) -> SuperSolution:
    return SuperSolution(mu, path)


@dataclass(frozen=True, eq=False)
class Corrector:
    """Bounded A <= 0 with ``(1 - delta) a + A' >= K`` at every time.

    ``A(t) = min_{s in [t, t_hi]} G(s) - G(t)`` where G is the exact primitive
    of ``g = (1 - delta) a - K`` for the piecewise-linear ``a``. G is piecewise
    quadratic, so the suffix minimum is computed exactly per grid interval.
    """

    path: MediaPath
    mu: float
    mu_tilde: float
    delta: float
    K: float
    g: np.ndarray        # g at grid nodes
    G: np.ndarray        # G at grid nodes
    suffix: np.ndarray   # suffix[k] = min of G over [t_k, t_hi]
    sup_norm: float

    def _locate(self, t):
        p = self.path
        u = p._absolute(t)
        k = np.clip(np.floor((u - p.t_lo) / p.dt).astype(np.int64), 0, self.g.size - 2)
        s = u - (p.t_lo + p.dt * k)
        return k, s

    def _quad(self, k, s):
        dt = self.path.dt
        return self.G[k] + self.g[k] * s + (self.g[k + 1] - self.g[k]) * s * s / (2 * dt)

    def _tail_min(self, k, s):
        dt = self.path.dt
        Gs = self._quad(k, s)
        m = np.minimum(Gs, self.suffix[k + 1])
        slope = self.g[k + 1] - self.g[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            sv = np.where(slope > 0, -self.g[k] * dt / slope, np.nan)
        inside = (sv > s) & (sv < dt)
        if np.any(inside):
            m = np.where(inside, np.minimum(m, self._quad(k, np.where(inside, sv, 0.0))), m)
        return m, Gs

    def A(self, t):
        k, s = self._locate(t)
        m, Gs = self._tail_min(k, s)
        out = np.minimum(m - Gs, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def dA(self, t):
        """Right derivative: 0 where the suffix minimum is attained at t, else -g(t)."""
        k, s = self._locate(t)
        m, Gs = self._tail_min(k, s)
        gt = self.g[k] + (self.g[k + 1] - self.g[k]) * s / self.path.dt
        out = np.where(m >= Gs, 0.0, -gt)
        return float(out) if np.ndim(out) == 0 else out

    def midpoint_margin(self) -> np.ndarray:
        """``(1-delta) a(mid) + dA/dt - K`` on every grid interval.

        ``dG`` over an interval is ``dt`` times the mean of ``g``, so the margin
        reduces to the suffix increment; differencing ``G`` directly would lose
        about ``|G| eps / dt`` to cancellation.
        """
        p = self.path
        a_mid = 0.5 * (p.values[1:] + p.values[:-1])
        g_mid = 0.5 * (self.g[1:] + self.g[:-1])
        return ((1 - self.delta) * a_mid - self.K - g_mid) + np.diff(self.suffix) / p.dt

    def truncation_error(self, times, keep: float = 0.9) -> float:
        """Max |A_full - A_cut| at ``times`` when the last (1 - keep) of the horizon is dropped."""
        p = self.path
        n = p.values.size
        cut = int(keep * (n - 1))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        lo, hi = p.horizon
        if np.any(times > lo + cut * p.dt):
            raise DomainError("evaluation times beyond the truncated horizon")
        cut_suffix = _suffix_minimum(self.g[: cut + 1], self.G[: cut + 1], p.dt)
        trunc = Corrector(p, self.mu, self.mu_tilde, self.delta, self.K, self.g[: cut + 1],
                          self.G[: cut + 1], cut_suffix, self.sup_norm)
        # trunc indexes the same grid, only shorter
        return float(np.max(np.abs(np.atleast_1d(self.A(times)) - np.atleast_1d(trunc.A(times)))))


def _interval_extrema(g, G, dt):
    """Exact min and max of the quadratic G on each grid interval."""
    G0, G1 = G[:-1], G[1:]
    slope = g[1:] - g[:-1]
    lo = np.minimum(G0, G1)
    hi = np.maximum(G0, G1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sv = -g[:-1] * dt / slope
    inside = np.isfinite(sv) & (sv > 0) & (sv < dt)
    sv = np.where(inside, sv, 0.0)
    Gv = np.where(inside, G0 + g[:-1] * sv + slope * sv * sv / (2 * dt), np.nan)
    lo = np.where(inside & (slope > 0), np.minimum(lo, Gv), lo)
    hi = np.where(inside & (slope < 0), np.maximum(hi, Gv), hi)
    return lo, hi


def _suffix_minimum(g, G, dt):
    lo, _ = _interval_extrema(g, G, dt)
    suffix = np.empty_like(G)
    suffix[-1] = G[-1]
    suffix[:-1] = lo
    return np.minimum.accumulate(suffix[::-1])[::-1]


def default_delta(a_bar: float, K: float) -> float:
    for delta in DELTA_LADDER:
        if (1 - delta) * a_bar > K:
            return delta
    raise ConfigurationError(
        f"delta too large / mu_tilde too aggressive: (1-delta)*a_bar <= K={K} for every delta in {DELTA_LADDER}")


def build_corrector(path: MediaPath, mu: float, mu_tilde: float, delta: Optional[float] = None,
                    a_bar: Optional[float] = None, K: Optional[float] = None) -> Corrector:
    """Suffix-minimum corrector; ``K`` defaults to ``threshold_K(mu, mu_tilde)``."""
    if K is None:
        K = threshold_K(mu, mu_tilde)
    if a_bar is None:
        a_bar = least_mean_value(path)
    if delta is None:
        delta = default_delta(a_bar, K)
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    if not (1 - delta) * a_bar > K:
        raise ConfigurationError(
            f"delta too large / mu_tilde too aggressive: (1-{delta})*{a_bar} <= K={K}")
    g = (1 - delta) * np.asarray(path.values) - K
    G = (1 - delta) * np.asarray(path.prefix) - K * path.dt * np.arange(path.values.size)
    suffix = _suffix_minimum(g, G, path.dt)
    _, hi = _interval_extrema(g, G, path.dt)
    # sup|A| is reached at a node or at an interior maximum of G, where the
    # later minimum is at most suffix[k + 1]
    sup_norm = float(max(0.0, np.max(hi - suffix[1:]), np.max(G - suffix)))
    return Corrector(path, mu, mu_tilde, delta, K, g, G, suffix, sup_norm)


def d_min(corrector: Corrector, mu: float, mu_tilde: float) -> float:
    """Smallest admissible amplitude of the subtracted exponential.

    The first term carries ``exp(+k ||A||)`` so that
    ``d delta k exp(k A(t)) >= 1`` holds for every ``A(t) >= -||A||``.
    """
    k = mu_tilde / mu - 1.0
    norm = corrector.sup_norm
    return max(math.exp(k * norm) / (corrector.delta * k), math.exp(k * norm))


class Envelope:
    """Clamped sub-solution; ``__call__`` is flat to the left of its peak."""

    def __init__(self, mu: float, mu_tilde: float, d: float, corrector: Corrector, path: MediaPath):
        self.mu = mu
        self.mu_tilde = mu_tilde
        self.d = d
        self.corrector = corrector
        self.path = path
        self.k = mu_tilde / mu - 1.0

    def xi(self, x, t):
        return np.asarray(x, dtype=float) - travel(self.path, self.mu, t)

    def x_omega(self, t):
        shift = (math.log(self.d) + math.log(self.mu_tilde) - math.log(self.mu)) / (self.mu_tilde - self.mu)
        return travel(self.path, self.mu, t) + shift + self.corrector.A(t) / self.mu

    def raw(self, x, t):
        xi = self.xi(x, t)
        A = self.corrector.A(t)
        return np.exp(-self.mu * xi) - self.d * np.exp(self.k * A - self.mu_tilde * xi)

    def peak(self, t):
        """Closed-form maximum over x of the unclamped sub-solution."""
        A = self.corrector.A(t)
        mu, mt = self.mu, self.mu_tilde
        return (math.exp(-mu * (math.log(self.d) / (mt - mu) + A / mu))
                * math.exp(-mu * (math.log(mt) - math.log(mu)) / (mt - mu)) * (1 - mu / mt))

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        xw = self.x_omega(t)
        return np.where(x >= xw, self.raw(np.maximum(x, xw), t), self.peak(t))


def default_mu_tilde(mu: float, mu_star: float) -> float:
    return 0.5 * (mu + min(2 * mu, mu_star))


def build_envelope(path: MediaPath, mu: float, mu_tilde: Optional[float] = None,
                   delta: Optional[float] = None, d: Optional[float] = None,
                   a_bar: Optional[float] = None) -> Envelope:
    if a_bar is None:
        a_bar = least_mean_value(path)
    ms = dispersion.mu_star(a_bar).mu_star
    if not 0 < mu < ms:
        raise DomainError(f"mu={mu} must lie in (0, mu*={ms})")
    if mu_tilde is None:
        mu_tilde = default_mu_tilde(mu, ms)
    if not mu < mu_tilde < min(2 * mu, ms):
        raise DomainError(f"mu_tilde={mu_tilde} must lie in ({mu}, {min(2 * mu, ms)})")
    corr = build_corrector(path, mu, mu_tilde, delta, a_bar)
    dm = d_min(corr, mu, mu_tilde)
    if d is None:
        d = dm
    elif d < dm:
        raise ConfigurationError(f"d={d} below d_min={dm}")
    return Envelope(mu, mu_tilde, d, corr, path)


def sub_solution(env: Envelope) -> Envelope:
    return env


def residual(kind: str, env, path: MediaPath, x, t: float, h: float = 1e-4):
    """``dv/dt - [H v + a v (1 - v)]`` with a central difference in time.

    Nonnegative (up to O(h^2)) for the super-solution; nonpositive for the
    sub-solution on ``x >= x_omega(t)``. ``env`` is ``mu`` for ``kind='super'``.
    """
    x = np.asarray(x, dtype=float)
    if kind == "super":
        v = env if isinstance(env, SuperSolution) else SuperSolution(float(env), path)
    elif kind == "sub":
        v = env
        if np.any(x < v.x_omega(t)):
            raise DomainError("sub-solution residual requested left of x_omega(t)")
    else:
        raise DomainError(f"kind must be 'super' or 'sub', got {kind!r}")
    dvdt = (v(x, t + h) - v(x, t - h)) / (2 * h)
    u = v(x, t)
    Hv = v(x + 1.0, t) + v(x - 1.0, t) - 2.0 * u
    return dvdt - (Hv + path.evaluate(t) * u * (1.0 - u))
