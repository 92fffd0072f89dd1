"""Speed calculus for the lattice KPP equation.

The envelope ``cbar(mu) = (e^mu + e^-mu - 2 + a_bar) / mu`` is unimodal on
(0, inf); its minimum c0 is the minimal front speed and its minimizer mu* the
critical decay rate. Every root is found by bracketing bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NumericalError
from .media import MediaPath

BRACKET = (1e-6, 50.0)


@dataclass(frozen=True)
class DispersionResult:
    a_bar: float
    mu_star: float
    c0: float
    tol: float


@dataclass(frozen=True)
class SpeedRoots:
    gamma: float
    mu_small: float
    mu_large: float
    degenerate: bool = False


def _kinetic(mu: float) -> float:
    # e^mu + e^-mu - 2, written to avoid cancellation at small mu
    return 4.0 * math.sinh(0.5 * mu) ** 2


def envelope_speed(mu: float, a_bar: float) -> float:
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return (_kinetic(mu) + a_bar) / mu


def stationarity_residual(mu: float, a_bar: float) -> float:
    """mu * d/dmu [mu * cbar(mu)] - mu * cbar(mu); zero exactly at mu*."""
    return mu * 2.0 * math.sinh(mu) - (_kinetic(mu) + a_bar)


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol * 1e-3:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mu_star(a_bar: float, tol: float = 1e-12) -> DispersionResult:
    if not a_bar > 0:
        raise DomainError(f"a_bar must be positive, got {a_bar}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    lo, hi = BRACKET
    f = lambda m: stationarity_residual(m, a_bar)
    if not (f(lo) < 0 < f(hi)):
        raise NumericalError(f"no sign change of the stationarity equation on {BRACKET} for a_bar={a_bar}")
    m = _bisect(f, lo, hi, tol)
    return DispersionResult(a_bar=a_bar, mu_star=m, c0=envelope_speed(m, a_bar), tol=tol)


def mu_roots(gamma: float, a_bar: float, tol: float = 1e-12) -> SpeedRoots:
    """Both positive solutions of cbar(mu) = gamma.

    ``gamma == c0`` (to within the solver tolerance) returns the tangency
    ``mu_small == mu_large == mu*`` flagged as degenerate.
    """
    disp = mu_star(a_bar, tol)
    ms, c0 = disp.mu_star, disp.c0
    if abs(gamma - c0) <= 1e-12 * max(1.0, c0):
        return SpeedRoots(gamma, ms, ms, degenerate=True)
    if gamma < c0:
        raise DomainError(f"gamma={gamma} below the minimal speed c0={c0}; no front exists")
    g = lambda m: envelope_speed(m, a_bar) - gamma
    # cbar blows up at both ends, so geometric bracket growth terminates
    lo = 0.5 * ms
    while g(lo) <= 0:
        lo *= 0.5
    hi = 2.0 * ms
    while g(hi) <= 0:
        hi *= 2.0
        if hi > 1e4:
            raise NumericalError("upper bracket for the large root diverged")
    small = _bisect(g, lo, ms, tol)
    large = _bisect(g, ms, hi, tol)
    return SpeedRoots(gamma, small, large)


def instantaneous_speed(path: MediaPath, t, mu: float):
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return (_kinetic(mu) + path.evaluate(t)) / mu


def front_displacement(path: MediaPath, mu: float, t0: float, t1: float) -> float:
    """Integral of the instantaneous speed over [t0, t1]."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return (_kinetic(mu) * (t1 - t0) + path.integral(t0, t1)) / mu


def travel(path: MediaPath, mu: float, t):
    """Signed integral of the speed from 0 to t; ``t`` may be negative or an array."""
    return (_kinetic(mu) * t + (path.primitive(t) - path.primitive(0.0))) / mu
