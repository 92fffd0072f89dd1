"""Front observables: level crossings, tail decay, speeds and the ratio alpha(t)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, InfeasibleError


@dataclass
class FrontSeries:
    times: np.ndarray
    positions: np.ndarray
    mu_hat: np.ndarray
    theoretical_positions: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("series times must be strictly increasing")

    def to_csv(self, fh) -> None:
        fh.write("t,X,X_theory,mu_hat\n")
        theory = self.theoretical_positions
        for k, t in enumerate(self.times):
            xt = theory[k] if theory is not None else math.nan
            fh.write(f"{t:.17g},{self.positions[k]:.17g},{xt:.17g},{self.mu_hat[k]:.17g}\n")


@dataclass
class StabilityReport:
    times: np.ndarray
    alpha: np.ndarray
    ratio_sup: np.ndarray
    ratio_inf: np.ndarray

    def increase(self) -> float:
        """Largest step-to-step increase of alpha (<= 0 when nonincreasing)."""
        if self.alpha.size < 2:
            return 0.0
        return float(np.max(np.diff(self.alpha)))

    def to_csv(self, fh) -> None:
        fh.write("t,alpha,ratio_sup,ratio_inf\n")
        for row in zip(self.times, self.alpha, self.ratio_sup, self.ratio_inf):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


class SpeedEstimate(NamedTuple):
    least_mean: float
    slope: float


def front_position(state, level: float = 0.5) -> Optional[float]:
    """x-coordinate of the rightmost downcrossing of ``level``; None if absent."""
    from .lattice import crossing_index

    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    idx = crossing_index(state.values, level)
    if idx is None:
        return None
    return state.origin + (state.offset + idx) / state.stride


def left_position(state, level: float = 0.5) -> Optional[float]:
    """x-coordinate of the leftmost upcrossing ``u_{i-1} < level <= u_i``."""
    from .lattice import crossing_index

    rev = state.values[::-1]
    idx = crossing_index(rev, level)
    if idx is None:
        return None
    return state.origin + (state.offset + state.width - 1 - idx) / state.stride


def decay_rate(state, fit_window: tuple[float, float]) -> float:
    """Least-squares slope of ``-ln u`` against ``x`` over ``fit_window``."""
    x = state.x
    mask = (x >= fit_window[0]) & (x <= fit_window[1])
    if mask.sum() < 2:
        raise InfeasibleError(f"fit window {fit_window} holds fewer than two sites")
    u = state.values[mask]
    if np.any(u <= 0):
        raise DomainError("decay fit window contains nonpositive values")
    slope, _ = np.polyfit(x[mask], -np.log(u), 1)
    return float(slope)


def tail_decay(state, level: float = 0.5, ahead: float = 5.0, length: float = 10.0) -> float:
    """Decay rate fitted on ``[X + ahead, X + ahead + length]``."""
    X = front_position(state, level)
    if X is None:
        raise InfeasibleError("no front crossing in the window")
    return decay_rate(state, (X + ahead, X + ahead + length))


def least_mean_speed(series: FrontSeries, r: float, which: str = "positions") -> SpeedEstimate:
    """Inf over recorded pairs with ``t - s >= r`` of the secant speed, plus the regression slope."""
    X = series.positions if which == "positions" else series.theoretical_positions
    if X is None:
        raise DomainError(f"series has no {which}")
    T = series.times
    ok = np.isfinite(X)
    T, X = T[ok], np.asarray(X)[ok]
    if T.size < 2 or T[-1] - T[0] < 2 * r:
        raise DomainError(f"series span shorter than 2r = {2 * r}")
    best = math.inf
    for i in range(T.size):
        j0 = np.searchsorted(T, T[i] + r - 1e-12 * max(1.0, abs(T[i])))
        if j0 >= T.size:
            break
        q = (X[j0:] - X[i]) / (T[j0:] - T[i])
        best = min(best, float(q.min()))
    slope = float(np.polyfit(T, X, 1)[0])
    return SpeedEstimate(best, slope)


def alpha_ratio(u_pert, u_front, floor: float = 1e-12,
                window: Optional[tuple[float, float]] = None) -> tuple[float, float, float]:
    """(alpha, ratio_sup, ratio_inf) of ``u_pert / u_front`` on the shared window."""
    if u_pert.offset != u_front.offset or u_pert.width != u_front.width or u_pert.stride != u_front.stride:
        raise DomainError("states must share their window")
    if abs(u_pert.time - u_front.time) > 1e-9 * max(1.0, abs(u_front.time)):
        raise DomainError("states must share their time")
    a, b = u_pert.values, u_front.values
    if window is not None:
        x = u_front.x
        mask = (x >= window[0]) & (x <= window[1])
        a, b = a[mask], b[mask]
    if b.size == 0:
        raise InfeasibleError("alpha window is empty")
    if np.any(b < floor):
        raise DomainError(f"front below floor {floor} inside the alpha window")
    ratio = a / b
    rs, ri = float(ratio.max()), float(ratio.min())
    if ri <= 0:
        return math.inf, rs, ri
    return max(rs, 1.0 / ri, 1.0), rs, ri


@dataclass
class SpreadingResult:
    right_speed: float
    left_speed: float
    times: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)

    def to_csv(self, fh) -> None:
        fh.write("t,X_right,X_left\n")
        for row in zip(self.times, self.right, self.left):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def default_spreading_width(path, horizon: float, support: int = 5) -> int:
    """Odd site count that holds both flanks moving at the fastest envelope speed."""
    from .dispersion import envelope_speed, mu_star

    fast = envelope_speed(mu_star(path.a_max).mu_star, path.a_max)
    return 2 * (int(math.ceil(1.25 * fast * horizon)) + support + 20) + 1


def spreading_speed(path, config=None, horizon: float = 100.0, support: int = 5,
                    height: float = 1.0, width: Optional[int] = None,
                    level: float = 0.5) -> SpreadingResult:
    """Flank speeds of the solution started from ``height`` on ``|i| <= support``.

    Speeds are secants of the level crossings over the second half of the run.
    """
    from dataclasses import replace as _replace

    from .lattice import LeftBoundary, SimConfig, evolve, init_from_profile

    if support < 0 or not height > 0:
        raise DomainError("initial data must be nonnegative and nonzero")
    t0 = path.horizon[0] if path.horizon[0] > 0 else 0.0
    if width is None:
        width = default_spreading_width(path, horizon, support)
    half = width // 2
    cfg = config or SimConfig()
    cfg = _replace(cfg, boundary_left=LeftBoundary("fixed", 0.0), boundary_right="zero",
                   recenter=False, level=level)
    state = init_from_profile(lambda x: np.where(np.abs(x) <= support, height, 0.0),
                              (-half, width - half), 1, t0)
    if cfg.cadence is None:
        cfg = _replace(cfg, cadence=0.5)
    rights, lefts = [], []

    def rec(s):
        rights.append(front_position(s, level))
        lefts.append(left_position(s, level))

    _, series = evolve(state, path, t0 + horizon, cfg, recorder=rec)
    T = series.times
    R = np.array([np.nan if v is None else v for v in rights])
    L = np.array([np.nan if v is None else v for v in lefts])
    if np.any(R[T >= t0 + horizon / 2] > half - 10) or np.any(L[T >= t0 + horizon / 2] < -half + 10):
        raise InfeasibleError("spreading flanks reached the window edge; increase width")
    mid = np.searchsorted(T, t0 + horizon / 2)
    dt_win = T[-1] - T[mid]
    right_speed = float((R[-1] - R[mid]) / dt_win)
    left_speed = float((L[mid] - L[-1]) / dt_win)
    return SpreadingResult(right_speed, left_speed, T - t0, R, L)


@dataclass(frozen=True)
class Perturbation:
    """Multiplicative factor ``tail_ratio + amplitude * exp(-rate * max(x - X0, 0))``.

    Admissible only when ``tail_ratio == 1`` (the ratio to the front tends to
    one ahead) and the factor stays positive behind the front.
    """

    amplitude: float = 0.5
    rate: float = 0.1
    tail_ratio: float = 1.0

    def validate(self) -> None:
        from .errors import ConfigurationError

        if self.tail_ratio != 1.0:
            raise ConfigurationError(
                f"perturbation tail ratio {self.tail_ratio} != 1: the perturbed data must match the front ahead")
        if not self.amplitude > -1.0:
            raise ConfigurationError("perturbation amplitude must exceed -1 so the data stay positive behind")
        if self.amplitude != 0 and not self.rate > 0:
            raise ConfigurationError("perturbation rate must be positive")

    def factor(self, x, X0: float):
        return self.tail_ratio + self.amplitude * np.exp(-self.rate * np.maximum(np.asarray(x) - X0, 0.0))


def stability_run(path, mu: float, perturbation: Optional[Perturbation] = None, horizon: float = 100.0,
                  tau: float = 80.0, width: int = 2000, config=None, cadence: float = 0.5,
                  behind: float = 50.0, ahead: float = 20.0, floor: float = 1e-12) -> StabilityReport:
    """Evolve the front and its perturbation in lockstep and record alpha(t).

    Both states share one window and one step grid; alpha is measured on
    ``[X(t) - behind, X(t) + ahead]``.
    """
    from dataclasses import replace as _replace

    from .lattice import BACKPROP_DT, SimConfig, _maybe_recenter, default_dt, evolve, front_state, recenter

    pert = perturbation or Perturbation()
    pert.validate()
    cfg = config or SimConfig()
    front = front_state(path, mu, tau, 0.0, width, cfg)
    X0 = front_position(front, cfg.level)
    if X0 is None:
        raise InfeasibleError("constructed front has no crossing in the window")
    vals = front.values * pert.factor(front.x, X0)
    other = _replace(front, values=vals, bound=max(1.0, float(vals.max())))
    bound = max(front.bound, other.bound)
    dt = cfg.dt or min(BACKPROP_DT, default_dt(path.a_max, bound))
    run_cfg = _replace(cfg, dt=dt, recenter=False, cadence=cadence)
    front = _replace(front, bound=bound)

    times, alpha, rsup, rinf = [], [], [], []

    def measure(a, b):
        X = front_position(b, cfg.level)
        if X is None:
            raise InfeasibleError(f"front left the window at t={b.time}")
        al, hi, lo = alpha_ratio(a, b, floor, (X - behind, X + ahead))
        times.append(b.time)
        alpha.append(al)
        rsup.append(hi)
        rinf.append(lo)

    measure(other, front)
    t, t_end = 0.0, float(horizon)
    n = int(math.ceil(t_end / cadence - 1e-9))
    for k in range(1, n + 1):
        t_next = t_end if k == n else k * cadence
        front, _ = evolve(front, path, t_next, run_cfg)
        other, _ = evolve(other, path, t_next, run_cfg)
        if cfg.recenter:
            front, cells = _maybe_recenter(front, cfg)
            other = recenter(other, cells, cfg)
        measure(other, front)
    return StabilityReport(np.asarray(times), np.asarray(alpha), np.asarray(rsup), np.asarray(rinf))


def speed_run(path, mu: float, horizon: float = 100.0, tau: float = 80.0, width: int = 2000,
              config=None, cadence: float = 0.5, fit_ahead: float = 5.0, fit_length: float = 10.0):
    """Evolve the constructed front forward over ``[0, horizon]``.

    Returns ``(series, final_state)``; the series carries level crossings,
    tail-fit exponents and ``int_0^t c`` at every recorded time.
    """
    from dataclasses import replace as _replace

    from .dispersion import travel
    from .lattice import BACKPROP_DT, SimConfig, default_dt, evolve, front_state

    cfg = config or SimConfig()
    state = front_state(path, mu, tau, 0.0, width, cfg)
    dt = cfg.dt or min(BACKPROP_DT, default_dt(path.a_max, state.bound))
    cfg = _replace(cfg, dt=dt, cadence=cadence)
    fits = []

    def rec(s):
        try:
            fits.append(tail_decay(s, cfg.level, fit_ahead, fit_length))
        except (InfeasibleError, DomainError):
            fits.append(math.nan)

    state, series = evolve(state, path, float(horizon), cfg, recorder=rec, mu=mu)
    series.mu_hat = np.asarray(fits)
    return series, state


def relative_drift(series: FrontSeries) -> float:
    """max_t |(X(t) - X(0)) - (Y(t) - Y(0))| / |Y(T) - Y(0)| with ``Y = int c``."""
    X, Y = series.positions, series.theoretical_positions
    if Y is None:
        raise DomainError("series has no theoretical positions")
    span = abs(Y[-1] - Y[0])
    if span == 0:
        raise DomainError("zero theoretical displacement")
    return float(np.nanmax(np.abs((X - X[0]) - (Y - Y[0]))) / span)
