"""Truncated lattice integration with a window that follows the front.

Sites sit at ``x = origin + i / stride``. With ``stride == 1`` this is the
lattice equation itself; with ``stride > 1`` the unit-shift coupling reaches
``stride`` cells away, which samples the space-continuous equation on a finer
grid. Every sub-lattice ``origin + Z`` evolves independently, so choosing
``origin`` aligns the sites with any co-moving coordinate exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .dispersion import travel
from .envelopes import SuperSolution
from .errors import DomainError, HorizonError, InfeasibleError, IntegrationError
from .media import MediaPath

log = logging.getLogger(__name__)

POS_EPS = 1e-10
GEOM_FLOOR = 1e-300
# RK4 speed error drifts the front against the exact co-moving frame at a rate
# O(dt^4) per unit time; long back-propagation runs need a finer step
BACKPROP_DT = 0.01


@dataclass(frozen=True, eq=False)
class LatticeState:
    offset: int
    values: np.ndarray
    time: float
    stride: int = 1
    origin: float = 0.0
    bound: float = 1.0

    @property
    def width(self) -> int:
        return self.values.shape[-1]

    @property
    def sites(self) -> np.ndarray:
        return self.offset + np.arange(self.values.size)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.sites / self.stride

    def at(self, x) -> np.ndarray:
        """Values at coordinates lying exactly on this state's grid."""
        idx = np.rint((np.asarray(x, dtype=float) - self.origin) * self.stride).astype(np.int64) - self.offset
        if np.any(idx < 0) or np.any(idx >= self.width):
            raise InfeasibleError("requested coordinates fall outside the simulation window")
        return self.values[idx]

    def to_csv(self, fh) -> None:
        fh.write("site,x,u\n")
        for i, x, u in zip(self.sites, self.x, self.values):
            fh.write(f"{i},{x:.17g},{u:.17g}\n")


@dataclass(frozen=True)
class LeftBoundary:
    kind: str = "copy"         # copy | fixed | homogeneous-tracker
    value: float = 0.0         # fixed value, or tracker initial value
    t0: float = 0.0             # tracker start time


@dataclass(frozen=True)
class SimConfig:
    dt: Optional[float] = None
    boundary_left: LeftBoundary = field(default_factory=LeftBoundary)
    boundary_right: str = "geometric"   # geometric | zero | copy
    recenter: bool = True
    level: float = 0.5
    trigger: float = 0.25     # recenter when the crossing is within this fraction of the right edge
    jump: float = 0.25        # shift by this fraction of the width
    cadence: Optional[float] = None


def default_dt(a_max: float, sup_u: float = 1.0) -> float:
    return min(0.1, 0.2 / (4.0 + a_max * max(1.0, sup_u)))


def dt_max(a_max: float, sup_u: float = 1.0) -> float:
    """Largest step for which the RK4 update is order preserving.

    The stage polynomial's third-order coefficient is ``1 + z`` with
    ``z = -dt (2 + a_max (2 sup_u - 1))`` the most negative diagonal entry of
    the Jacobian; requiring ``z >= -1`` keeps every propagator entry
    nonnegative, so the discrete comparison principle survives the step.
    """
    return 1.0 / (2.0 + a_max * max(1.0, 2.0 * sup_u - 1.0))


def homogeneous_oracle(u0: float, path: MediaPath, t: float, t0: float = 0.0) -> float:
    """Closed-form solution of u' = a(t) u (1 - u) with u(t0) = u0."""
    if not u0 > 0:
        raise DomainError(f"u0 must be positive, got {u0}")
    if t >= t0:
        I = path.integral(t0, t)
    else:
        I = -path.integral(t, t0)
    return 1.0 / (1.0 + (1.0 / u0 - 1.0) * math.exp(-I))


def init_from_profile(profile: Callable, window: tuple[int, int], m: int = 1, t0: float = 0.0,
                      origin: float = 0.0) -> LatticeState:
    """Sample ``profile`` at sites ``i_lo <= i < i_hi`` (``x = origin + i/m``)."""
    i_lo, i_hi = int(window[0]), int(window[1])
    if i_hi <= i_lo + 2:
        raise InfeasibleError("window must hold at least three sites")
    if m < 1:
        raise DomainError("stride must be a positive integer")
    x = origin + np.arange(i_lo, i_hi) / m
    vals = np.array(np.broadcast_to(np.asarray(profile(x), dtype=float), x.shape), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise DomainError("initial profile must be finite and nonnegative")
    return LatticeState(i_lo, vals, float(t0), int(m), float(origin), max(1.0, float(vals.max())))


def _geometric_tail(values: np.ndarray, count: int) -> np.ndarray:
    last, prev = values[..., -1:], values[..., -2:-1]
    ok = (prev > GEOM_FLOOR) & (last > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ok, np.minimum(last / np.where(ok, prev, 1.0), 1.0), 0.0)
    return np.where(ok, last, 0.0) * ratio ** np.arange(1, count + 1)


# ghost cells act on the last axis, so a stack of independent lattices
# (values of shape (batch, width)) integrates in one call
def _right_ghost(u: np.ndarray, m: int, cfg: SimConfig) -> np.ndarray:
    kind = cfg.boundary_right
    if kind == "geometric":
        return _geometric_tail(u, m)
    if kind == "zero":
        return np.zeros(u.shape[:-1] + (m,))
    if kind == "copy":
        return np.repeat(u[..., -1:], m, axis=-1)
    raise DomainError(f"unknown right boundary {kind!r}")


def _left_ghost(u: np.ndarray, m: int, cfg: SimConfig, path: MediaPath, t: float) -> np.ndarray:
    b = cfg.boundary_left
    shape = u.shape[:-1] + (m,)
    if b.kind == "copy":
        return np.repeat(u[..., :1], m, axis=-1)
    if b.kind == "fixed":
        return np.full(shape, b.value)
    if b.kind == "homogeneous-tracker":
        if b.value <= 0:
            return np.zeros(shape)
        return np.full(shape, homogeneous_oracle(b.value, path, t, b.t0))
    raise DomainError(f"unknown left boundary {b.kind!r}")


def _rhs(u: np.ndarray, t: float, m: int, path: MediaPath, cfg: SimConfig) -> np.ndarray:
    left = _left_ghost(u, m, cfg, path, t)
    right = _right_ghost(u, m, cfg)
    ext = np.concatenate([left, u, right], axis=-1)
    lap = ext[..., 2 * m:] + ext[..., :-2 * m] - 2.0 * u
    return lap + path.evaluate(t) * u * (1.0 - u)


def step(state: LatticeState, path: MediaPath, dt: float, config: Optional[SimConfig] = None,
         check_dt: bool = True) -> LatticeState:
    """One classical RK4 step; ``a`` is sampled at the stage times."""
    cfg = config or SimConfig()
    if check_dt and dt > dt_max(path.a_max, state.bound) * (1 + 1e-12):
        raise IntegrationError(
            f"stability violation: dt={dt} exceeds the order-preserving bound "
            f"{dt_max(path.a_max, state.bound):.6g}; use a smaller dt")
    u, t, m = state.values, state.time, state.stride
    try:
        k1 = _rhs(u, t, m, path, cfg)
        k2 = _rhs(u + 0.5 * dt * k1, t + 0.5 * dt, m, path, cfg)
        k3 = _rhs(u + 0.5 * dt * k2, t + 0.5 * dt, m, path, cfg)
        k4 = _rhs(u + dt * k3, t + dt, m, path, cfg)
    except HorizonError as exc:
        raise HorizonError(f"step [{t}, {t + dt}] leaves the media horizon: {exc}") from exc
    new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    lo = new.min()
    if lo < -POS_EPS or new.max() > state.bound + POS_EPS or not np.all(np.isfinite(new)):
        raise IntegrationError(
            f"stability violation at t={t + dt}: values left [0, {state.bound}] "
            f"(min={lo:.3g}, max={new.max():.3g}); use a smaller dt")
    if lo < 0:
        new = np.maximum(new, 0.0)
    return replace(state, values=new, time=t + dt)


def crossing_index(values: np.ndarray, level: float) -> Optional[float]:
    """Fractional index of the rightmost downcrossing ``u_i >= level > u_{i+1}``."""
    above = values[:-1] >= level
    below = values[1:] < level
    hits = np.nonzero(above & below)[0]
    if hits.size == 0:
        return None
    i = hits[-1]
    ui, uj = values[i], values[i + 1]
    return i + (ui - level) / (ui - uj)


def recenter(state: LatticeState, cells: int, config: Optional[SimConfig] = None) -> LatticeState:
    """Shift the window right by ``cells``; new right sites are geometric extrapolations."""
    if cells <= 0:
        return state
    cfg = config or SimConfig()
    u = state.values
    cells = min(cells, u.size - 2)
    fill = _right_ghost(u, cells, cfg)
    new = np.concatenate([u[cells:], fill])
    log.info("recentred window by %d cells at t=%.6g (offset %d -> %d)",
             cells, state.time, state.offset, state.offset + cells)
    return replace(state, offset=state.offset + cells, values=new)


def _maybe_recenter(state: LatticeState, cfg: SimConfig) -> tuple[LatticeState, int]:
    if not cfg.recenter:
        return state, 0
    idx = crossing_index(state.values, cfg.level)
    if idx is None or idx < (1.0 - cfg.trigger) * state.width:
        return state, 0
    cells = int(cfg.jump * state.width)
    return recenter(state, cells, cfg), cells


def evolve(state: LatticeState, path: MediaPath, t_end: float, config: Optional[SimConfig] = None,
           recorder: Optional[Callable[[LatticeState], None]] = None,
           mu: Optional[float] = None):
    """Advance to ``t_end``; returns ``(state, series)``.

    ``series`` is a :class:`~kpplattice.fronts.FrontSeries` sampled at the
    config cadence (every step if unset); ``recorder`` receives the same
    snapshots. Passing ``mu`` fills the theoretical positions.
    """
    from .fronts import FrontSeries, front_position

    cfg = config or SimConfig()
    if t_end < state.time:
        raise DomainError(f"t_end={t_end} precedes the state time {state.time}")
    dt = cfg.dt or default_dt(path.a_max, state.bound)
    span = t_end - state.time
    # step grid anchored at t_end: a short first step, then uniform steps of dt
    n = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
    first = span - (n - 1) * dt if n else 0.0
    times, positions = [], []
    cadence = cfg.cadence

    def record(s):
        times.append(s.time)
        X = front_position(s, cfg.level) if s.values.ndim == 1 else None
        positions.append(math.nan if X is None else X)
        if recorder is not None:
            recorder(s)

    t_start = state.time
    record(state)
    eps = 1e-9 * max(1.0, abs(t_end))
    next_rec = t_start + (cadence or 0.0)
    for k in range(1, n + 1):
        state = step(state, path, first if k == 1 else dt, cfg)
        state = replace(state, time=t_end - (n - k) * dt if k < n else t_end)
        state, _ = _maybe_recenter(state, cfg)
        if cadence is None:
            record(state)
        elif state.time >= next_rec - eps:
            record(state)
            while next_rec <= state.time + eps:
                next_rec += cadence
    if times[-1] != state.time:
        record(state)
    theory = None
    if mu is not None:
        theory = np.asarray(travel(path, mu, np.asarray(times)))
    series = FrontSeries(np.asarray(times), np.asarray(positions, dtype=float),
                         np.full(len(times), np.nan), theory)
    return state, series


def front_window(width: int, behind_fraction: float = 0.25) -> tuple[int, int]:
    """Window offsets placing a front at ``behind_fraction`` of the width."""
    behind = int(round(behind_fraction * width))
    return -behind, width - behind


def back_propagate_front(path: MediaPath, mu: float, tau_list: Sequence[float],
                         eval_times: Sequence[float], window: tuple[int, int] = (-100, 60),
                         width: int = 2000, config: Optional[SimConfig] = None,
                         executor=None):
    """Approximate the front by evolving the super-solution from time ``-tau``.

    For each ``tau`` and each evaluation time ``t`` the lattice origin is set
    to ``int_0^t c`` so that sites coincide with integer co-moving coordinates
    ``j`` in ``window``. Returns a :class:`BackPropagation`.
    """
    taus = [float(t) for t in tau_list]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise DomainError("tau_list must be strictly increasing")
    eval_times = [float(t) for t in eval_times]
    lo, hi = path.horizon
    if -max(taus) < lo or max(eval_times) > hi:
        raise InfeasibleError(
            f"media horizon [{lo}, {hi}] does not cover [-{max(taus)}, {max(eval_times)}]")
    j = np.arange(int(window[0]), int(window[1]) + 1)
    jobs = [(tau, t) for tau in taus for t in eval_times]
    run = lambda job: _single_backprop(path, mu, job[0], job[1], j, width, config)
    results = list(executor.map(run, jobs)) if executor is not None else [run(jb) for jb in jobs]
    profiles = {job: res for job, res in zip(jobs, results)}
    return BackPropagation(mu, taus, eval_times, j, profiles)


def front_state(path: MediaPath, mu: float, tau: float, t: float, width: int = 2000,
                config: Optional[SimConfig] = None) -> LatticeState:
    """State at time ``t`` evolved from the super-solution snapshot at ``-tau``.

    The lattice origin is ``int_0^t c`` so site ``j`` sits at co-moving
    coordinate ``j``. Without a configured step, :data:`BACKPROP_DT` is used.
    """
    cfg = config or SimConfig()
    if cfg.dt is None:
        cfg = replace(cfg, dt=min(BACKPROP_DT, default_dt(path.a_max)))
    origin = float(travel(path, mu, t))
    start_front = float(travel(path, mu, -tau))
    sup = SuperSolution(mu, path)
    # place the clamp point a quarter of the way into the window
    base = int(math.floor(start_front - origin))
    i_lo, i_hi = front_window(width)
    state = init_from_profile(lambda x: sup(x, -tau), (base + i_lo, base + i_hi), 1, -tau, origin)
    state, _ = evolve(state, path, t, cfg)
    return state


def _single_backprop(path, mu, tau, t, j, width, config):
    state = front_state(path, mu, tau, t, width, config)
    return state.at(state.origin + j)


@dataclass
class BackPropagation:
    mu: float
    taus: list
    eval_times: list
    j: np.ndarray
    profiles: dict   # (tau, t) -> values at co-moving sites j

    def profile(self, tau: float, t: float) -> np.ndarray:
        return self.profiles[(float(tau), float(t))]

    def cauchy(self) -> list[tuple[float, float, float, float]]:
        """(tau_prev, tau, t, sup |V_tau - V_tau_prev|) along the ladder."""
        rows = []
        for t in self.eval_times:
            for a, b in zip(self.taus, self.taus[1:]):
                diff = float(np.max(np.abs(self.profile(b, t) - self.profile(a, t))))
                rows.append((a, b, t, diff))
        return rows

    def tau_monotonicity_violation(self) -> float:
        """Largest increase of V along the ladder (nonpositive when monotone)."""
        worst = -math.inf
        for t in self.eval_times:
            for a, b in zip(self.taus, self.taus[1:]):
                worst = max(worst, float(np.max(self.profile(b, t) - self.profile(a, t))))
        return worst

    def x_monotonicity_violation(self) -> float:
        worst = -math.inf
        for v in self.profiles.values():
            worst = max(worst, float(np.max(np.diff(v))))
        return worst


def stationarity_check(path: MediaPath, mu: float, t_shift: float, tau: float,
                       window: tuple[int, int] = (-100, 60), width: int = 2000,
                       config: Optional[SimConfig] = None) -> float:
    """sup_j |Phi_tau(j, t_shift; omega) - Phi_tau(j, 0; theta_{t_shift} omega)|."""
    j = np.arange(int(window[0]), int(window[1]) + 1)
    a = _single_backprop(path, mu, tau, t_shift, j, width, config)
    if t_shift == 0:
        b = _single_backprop(path, mu, tau, 0.0, j, width, config)
    else:
        b = _single_backprop(path.shift(t_shift), mu, tau, 0.0, j, width, config)
    return float(np.max(np.abs(a - b)))
