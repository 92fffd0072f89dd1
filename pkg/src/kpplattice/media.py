"""Realizations of the random time-dependent coefficient a(theta_t omega).

A :class:`MediaModel` declares a process; :func:`build_media` realizes it once
on a uniform grid and returns an immutable :class:`MediaPath`. Paths are
evaluated by linear interpolation and integrated with the trapezoid rule, which
is exact for the interpolant. Shifting a path (the metric flow theta_s) only
moves a base offset, so shifts compose exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, DomainError, HorizonError

KINDS = ("constant", "periodic-sum", "telegraph", "bounded-random-spline")

# relative slack on horizon checks, absorbs round-off in t + base_shift
_HORIZON_SLACK = 1e-9


@dataclass(frozen=True)
class MediaModel:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    horizon: tuple[float, float] = (0.0, 100.0)
    dt_media: float = 1e-2
    ramp_width: float = 1e-2

    def bounds(self) -> tuple[float, float]:
        """Declared (a_min, a_max) of every realization."""
        p = self.params
        if self.kind == "constant":
            v = float(p.get("value", 1.0))
            return v, v
        if self.kind == "periodic-sum":
            spread = sum(abs(float(x)) for x in p.get("amplitudes", []))
            mean = float(p.get("mean", 1.0))
            return mean - spread, mean + spread
        if self.kind == "telegraph":
            lo, hi = float(p.get("low", 0.5)), float(p.get("high", 1.5))
            return min(lo, hi), max(lo, hi)
        if self.kind == "bounded-random-spline":
            return float(p.get("a_min", 0.3)), float(p.get("a_max", 2.0))
        raise ConfigurationError(f"unknown media kind {self.kind!r}; expected one of {KINDS}")

    def analytic_mean(self) -> Optional[float]:
        p = self.params
        if self.kind == "constant":
            return float(p.get("value", 1.0))
        if self.kind == "periodic-sum":
            if all(float(w) != 0.0 for w in p.get("frequencies", [])):
                return float(p.get("mean", 1.0))
            return None
        if self.kind == "telegraph":
            lo, hi = float(p.get("low", 0.5)), float(p.get("high", 1.5))
            m_lo, m_hi = float(p.get("mean_low", 1.0)), float(p.get("mean_high", 1.0))
            return (lo * m_lo + hi * m_hi) / (m_lo + m_hi)
        return None


def constant(value: float = 1.0, horizon=(0.0, 100.0), dt_media: float = 1e-2) -> MediaModel:
    return MediaModel("constant", {"value": value}, horizon=tuple(horizon), dt_media=dt_media)


def sinusoid(mean: float = 1.0, amplitude: float = 0.5, frequency: float = 1.0,
             horizon=(0.0, 100.0), dt_media: float = 1e-2) -> MediaModel:
    """a(t) = mean + amplitude * sin(frequency * t)."""
    params = {"mean": mean, "amplitudes": [amplitude], "frequencies": [frequency],
              "phases": [-math.pi / 2]}
    return MediaModel("periodic-sum", params, horizon=tuple(horizon), dt_media=dt_media)


def telegraph(low: float = 0.5, high: float = 1.5, mean_low: float = 1.0, mean_high: float = 1.0,
              seed: int = 0, horizon=(0.0, 100.0), dt_media: float = 1e-2,
              ramp_width: float = 1e-2) -> MediaModel:
    params = {"low": low, "high": high, "mean_low": mean_low, "mean_high": mean_high}
    return MediaModel("telegraph", params, seed=seed, horizon=tuple(horizon),
                      dt_media=dt_media, ramp_width=ramp_width)


def random_spline(a_min: float = 0.3, a_max: float = 2.0, node_spacing: float = 1.0,
                  seed: int = 0, horizon=(0.0, 100.0), dt_media: float = 1e-2) -> MediaModel:
    params = {"a_min": a_min, "a_max": a_max, "node_spacing": node_spacing}
    return MediaModel("bounded-random-spline", params, seed=seed, horizon=tuple(horizon),
                      dt_media=dt_media)


@dataclass(frozen=True, eq=False)
class MediaPath:
    """Realized coefficient on a uniform grid.

    ``t_lo`` and ``dt`` define the grid in absolute time; a caller's time ``t``
    maps to absolute time ``t + base_shift``.
    """

    t_lo: float
    dt: float
    values: np.ndarray
    prefix: np.ndarray
    a_min: float
    a_max: float
    base_shift: float = 0.0
    analytic_mean: Optional[float] = None
    kind: str = "constant"

    @property
    def times(self) -> np.ndarray:
        return self.t_lo + self.dt * np.arange(self.values.size)

    @property
    def t_hi(self) -> float:
        return self.t_lo + self.dt * (self.values.size - 1)

    @property
    def horizon(self) -> tuple[float, float]:
        """Realized horizon in this path's (shifted) time."""
        return self.t_lo - self.base_shift, self.t_hi - self.base_shift

    def _absolute(self, t):
        u = np.asarray(t, dtype=float) + self.base_shift
        slack = _HORIZON_SLACK * max(1.0, abs(self.t_lo), abs(self.t_hi))
        if np.any(u < self.t_lo - slack) or np.any(u > self.t_hi + slack):
            lo, hi = self.horizon
            raise HorizonError(f"time {t} outside realized horizon [{lo}, {hi}]")
        return np.clip(u, self.t_lo, self.t_hi)

    def evaluate(self, t):
        u = self._absolute(t)
        out = np.interp(u, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def primitive(self, t):
        """Integral of the interpolant from the grid start to ``t``."""
        u = self._absolute(t)
        k = np.clip(np.floor((u - self.t_lo) / self.dt).astype(np.int64), 0, self.values.size - 2)
        tk = self.t_lo + self.dt * k
        au = np.interp(u, self.times, self.values)
        out = self.prefix[k] + 0.5 * (u - tk) * (self.values[k] + au)
        return float(out) if out.ndim == 0 else out

    def integral(self, s: float, t: float) -> float:
        if s > t:
            raise DomainError(f"integral bounds reversed: s={s} > t={t}")
        if s == t:
            self._absolute(s)
            return 0.0
        return self.primitive(t) - self.primitive(s)

    def shift(self, s: float) -> "MediaPath":
        return replace(self, base_shift=self.base_shift + s)

    def to_csv(self, fh) -> None:
        fh.write("t,a\n")
        for t, a in zip(self.times - self.base_shift, self.values):
            fh.write(f"{t:.17g},{a:.17g}\n")


@dataclass(frozen=True)
class MeanReport:
    least_mean_estimate: float
    greatest_mean_estimate: float
    window_floor: float
    analytic_mean: Optional[float] = None


def _telegraph_values(model: MediaModel, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = model.params
    levels = (float(p.get("low", 0.5)), float(p.get("high", 1.5)))
    means = (float(p.get("mean_low", 1.0)), float(p.get("mean_high", 1.0)))
    if min(means) <= 0:
        raise ConfigurationError("telegraph mean holding times must be positive")
    w = float(model.ramp_width)
    if w <= 0:
        raise ConfigurationError("ramp_width must be positive")
    state = int(rng.random() < means[1] / (means[0] + means[1]))
    start = levels[state]
    t, t_end = times[0], times[-1]
    switches, jumps = [], []
    while True:
        # memoryless holding, so the first residual is exponential as well
        t = t + rng.exponential(means[state])
        if t > t_end:
            break
        new = 1 - state
        switches.append(t)
        jumps.append(levels[new] - levels[state])
        state = new
    values = np.full(times.size, start)
    if not switches:
        return values
    switches = np.asarray(switches)
    jumps = np.asarray(jumps)
    done = np.concatenate([[0.0], np.cumsum(jumps)])
    values += done[np.searchsorted(switches + w, times, side="right")]
    # partial ramps: nodes inside [tau_k, tau_k + w)
    lo_idx = np.searchsorted(times, switches, side="left")
    hi_idx = np.searchsorted(times, switches + w, side="left")
    for k in np.nonzero(hi_idx > lo_idx)[0]:
        sl = slice(lo_idx[k], hi_idx[k])
        values[sl] += jumps[k] * (times[sl] - switches[k]) / w
    return values


def build_media(model: MediaModel) -> MediaPath:
    """Realize ``model`` on its horizon. Deterministic per (kind, params, seed, horizon)."""
    a_min, a_max = model.bounds()
    if not (a_min > 0) or a_min > a_max:
        raise ConfigurationError(f"invalid bounds a_min={a_min}, a_max={a_max}: need 0 < a_min <= a_max")
    lo, hi = float(model.horizon[0]), float(model.horizon[1])
    dt = float(model.dt_media)
    if not hi > lo:
        raise ConfigurationError(f"empty horizon [{lo}, {hi}]")
    if not dt > 0:
        raise ConfigurationError("dt_media must be positive")
    n = int(math.ceil((hi - lo) / dt - 1e-9)) + 1
    n = max(n, 2)
    times = lo + dt * np.arange(n)
    rng = np.random.default_rng(model.seed)
    p = model.params

    if model.kind == "constant":
        values = np.full(n, a_min)
    elif model.kind == "periodic-sum":
        amps = [float(x) for x in p.get("amplitudes", [])]
        freqs = [float(x) for x in p.get("frequencies", [])]
        phases = [float(x) for x in p.get("phases", [0.0] * len(amps))]
        if not (len(amps) == len(freqs) == len(phases)):
            raise ConfigurationError("periodic-sum needs equal-length amplitudes, frequencies, phases")
        values = np.full(n, float(p.get("mean", 1.0)))
        for A, w, ph in zip(amps, freqs, phases):
            values += A * np.cos(w * times + ph)
    elif model.kind == "telegraph":
        values = _telegraph_values(model, times, rng)
    elif model.kind == "bounded-random-spline":
        spacing = float(p.get("node_spacing", 1.0))
        if spacing <= 0:
            raise ConfigurationError("node_spacing must be positive")
        nodes = np.arange(lo - spacing, hi + 2 * spacing, spacing)
        heights = rng.uniform(a_min, a_max, size=nodes.size)
        values = PchipInterpolator(nodes, heights)(times)
    else:
        raise ConfigurationError(f"unknown media kind {model.kind!r}")

    values = np.clip(values, a_min, a_max)
    prefix = np.concatenate([[0.0], np.cumsum(0.5 * dt * (values[1:] + values[:-1]))])
    values.setflags(write=False)
    prefix.setflags(write=False)
    return MediaPath(t_lo=lo, dt=dt, values=values, prefix=prefix, a_min=a_min, a_max=a_max,
                     analytic_mean=model.analytic_mean(), kind=model.kind)


def evaluate(path: MediaPath, t):
    return path.evaluate(t)


def shift(path: MediaPath, s: float) -> MediaPath:
    return path.shift(s)


def integral(path: MediaPath, s: float, t: float) -> float:
    return path.integral(s, t)


def empirical_least_mean(path: MediaPath, r: float, stride: Optional[int] = None) -> MeanReport:
    """Inf and sup of window averages over grid pairs with t - s >= r.

    Naive pair scan on every ``stride``-th node; the default stride keeps the
    scan near 2000 nodes.
    """
    n = path.values.size
    span = path.t_hi - path.t_lo
    if span < 2 * r:
        raise DomainError(f"horizon length {span} shorter than 2r = {2 * r}")
    if stride is None:
        stride = max(1, n // 2000)
    P = path.prefix[::stride]
    T = path.times[::stride]
    step = stride * path.dt
    lag = int(math.ceil(r / step - 1e-9))
    lag = max(lag, 1)
    least, greatest = math.inf, -math.inf
    for i in range(P.size - lag):
        avg = (P[i + lag:] - P[i]) / (T[i + lag:] - T[i])
        least = min(least, float(avg.min()))
        greatest = max(greatest, float(avg.max()))
    return MeanReport(least, greatest, r, path.analytic_mean)


def least_mean_value(path: MediaPath) -> float:
    """Least mean used by the speed calculus: analytic when known, else a long-window estimate."""
    if path.analytic_mean is not None:
        return path.analytic_mean
    span = path.t_hi - path.t_lo
    return empirical_least_mean(path, span / 4).least_mean_estimate


def verify_H(path: MediaPath) -> bool:
    v = path.values
    return bool(path.a_min > 0 and np.all(v > 0) and np.all(v >= path.a_min) and np.all(v <= path.a_max))
