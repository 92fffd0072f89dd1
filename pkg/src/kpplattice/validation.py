"""Property suite run by ``kpplattice validate``.

Each check returns a :class:`PropertyResult`; integration blow-ups are
captured as failures of kind ``"numerical"`` instead of aborting the suite.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import envelopes as E
from . import media as M
from .dispersion import travel
from .errors import IntegrationError, NumericalError
from .lattice import LatticeState, LeftBoundary, SimConfig, default_dt, evolve, init_from_profile

LOGISTIC_DT = 1e-3


@dataclass
class PropertyResult:
    name: str
    passed: bool
    metric: float
    tolerance: float
    detail: str = ""
    kind: str = "property"   # property | numerical

    def to_dict(self) -> dict:
        return asdict(self)


def _start(path: M.MediaPath, duration: float) -> float:
    lo, hi = path.horizon
    t0 = max(0.0, lo)
    if t0 + duration > hi:
        t0 = lo
    return t0


def _cfg(sim: SimConfig, **kw) -> SimConfig:
    kw.setdefault("cadence", None)
    return replace(sim, recenter=False, **kw)


def comparison_fuzz(path, sim: SimConfig, pairs: int = 200, duration: float = 10.0,
                    width: int = 200, seed: int = 0, tol: float = 1e-8) -> PropertyResult:
    """Ordered initial pairs stay ordered at every recorded time.

    Zero right and copy left ghosts are both monotone, so the truncated
    system inherits the comparison principle. All pairs integrate as one
    batch of independent lattices.
    """
    rng = np.random.default_rng(seed)
    t0 = _start(path, duration)
    u = rng.uniform(0.0, 1.0, (pairs, width))
    v = u + rng.uniform(0.0, 0.3, (pairs, width))
    bound = max(1.0, float(v.max()))
    cfg = _cfg(sim, boundary_left=LeftBoundary("copy"), boundary_right="zero", cadence=0.5)
    cfg = replace(cfg, dt=cfg.dt or default_dt(path.a_max, bound))
    state = LatticeState(0, np.concatenate([u, v]), t0, bound=bound)
    worst = [math.inf]

    def rec(st):
        worst[0] = min(worst[0], float(np.min(st.values[pairs:] - st.values[:pairs])))

    evolve(state, path, t0 + duration, cfg, recorder=rec)
    return PropertyResult("comparison", worst[0] >= -tol, worst[0], tol,
                          f"min(v - u) over {pairs} pairs, recorded every 0.5 up to t0 + {duration}")


def logistic_oracle(path, tol_point: float = 1e-8, tol_conserved: float = 1e-7,
                    duration: float = 10.0) -> PropertyResult:
    """Homogeneous data reduce to the logistic ODE.

    Checks u(ln 3) = 0.75 from u0 = 0.5 under a = 1, then the invariant
    ``(1/u - 1) exp(int a)`` under ``path``.
    """
    flat = M.build_media(M.constant(1.0, horizon=(0.0, 2.0)))
    cfg = SimConfig(dt=LOGISTIC_DT, boundary_left=LeftBoundary("copy"), boundary_right="copy",
                    recenter=False)
    s = init_from_profile(lambda x: np.full(x.shape, 0.5), (0, 16), 1, 0.0)
    s, _ = evolve(s, flat, math.log(3.0), cfg)
    err_point = float(np.max(np.abs(s.values - 0.75)))

    t0 = _start(path, duration)
    s = init_from_profile(lambda x: np.full(x.shape, 0.5), (0, 16), 1, t0)
    qs = []

    def rec(st):
        qs.append((1.0 / st.values[0] - 1.0) * math.exp(path.integral(t0, st.time)))

    evolve(s, path, t0 + duration, replace(cfg, cadence=0.1), recorder=rec)
    drift = float(np.max(np.abs(np.asarray(qs) - 1.0)))
    ok = err_point <= tol_point and drift <= tol_conserved
    return PropertyResult("logistic-oracle", ok, max(err_point / tol_point, drift / tol_conserved), 1.0,
                          f"|u(ln 3) - 0.75| = {err_point:.3g}; invariant drift = {drift:.3g}")


def equilibrium_decay(path, sim: SimConfig, duration: float = 10.0, width: int = 100,
                      u_min: float = 0.2, seed: int = 0, tol: float = 1e-9) -> PropertyResult:
    """``0 <= 1 - u <= (1/u_min - 1) exp(-int a)`` for data in ``[u_min, 1]``."""
    rng = np.random.default_rng(seed)
    t0 = _start(path, duration)
    u0 = rng.uniform(u_min, 1.0, width)
    cfg = _cfg(sim, boundary_left=LeftBoundary("copy"), boundary_right="copy", cadence=0.25)
    s = init_from_profile(lambda x: u0, (0, width), 1, t0)
    worst = [-math.inf]

    def rec(st):
        bound = (1.0 / u_min - 1.0) * math.exp(-path.integral(t0, st.time))
        excess = max(float(np.max(1.0 - st.values)) - bound, float(np.max(st.values)) - 1.0)
        worst[0] = max(worst[0], excess)

    evolve(s, path, t0 + duration, cfg, recorder=rec)
    return PropertyResult("equilibrium-decay", worst[0] <= tol, worst[0], tol,
                          "max excess over the bound |u - 1| <= C exp(-int a)")


def continuity(path, sim: SimConfig, duration: float = 10.0, width: int = 100, eps: float = 1e-6,
               seed: int = 0, levels: int = 3) -> PropertyResult:
    """Continuous dependence on data over dyadic perturbation levels.

    With ``w`` the evolved difference for data ``eps 2^-k`` apart, requires
    ``w <= |u0 - v0| exp(L t)`` with ``L = a_max max(1, 2B - 1)`` and that
    halving the perturbation at least halves ``w`` up to a factor 1.2.
    """
    rng = np.random.default_rng(seed)
    t0 = _start(path, duration)
    u0 = rng.uniform(0.1, 0.9, width)
    direction = rng.uniform(-1.0, 1.0, width)
    cfg = _cfg(sim, boundary_left=LeftBoundary("copy"), boundary_right="zero")
    c = replace(cfg, dt=cfg.dt or default_dt(path.a_max, 1.0))
    su = init_from_profile(lambda x: u0, (0, width), 1, t0)
    fu, _ = evolve(su, path, t0 + duration, c)
    diffs, ok = [], True
    L = path.a_max * max(1.0, 2 * 1.0 - 1.0)
    for k in range(levels):
        e = eps * 0.5 ** k
        sv = init_from_profile(lambda x: u0 + e * direction, (0, width), 1, t0)
        fv, _ = evolve(replace(sv, bound=1.0), path, t0 + duration, c)
        w = float(np.max(np.abs(fu.values - fv.values)))
        ok &= w <= e * math.exp(L * duration)
        diffs.append(w)
    ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
    worst = max(ratios) if ratios else 0.0
    ok &= worst <= 0.6
    return PropertyResult("continuity", bool(ok), worst, 0.6,
                          f"evolved differences {', '.join(f'{d:.3g}' for d in diffs)} for data "
                          f"{eps:g}, {eps / 2:g}, {eps / 4:g} apart")


def envelope_residuals(path, mu: float, points: int = 1000, seed: int = 0,
                       tol: float = 1e-6) -> PropertyResult:
    """Super residual >= -tol and sub residual <= tol at random points of the validity region."""
    env = E.build_envelope(path, mu)
    rng = np.random.default_rng(seed)
    lo, hi = path.horizon
    ts = rng.uniform(lo + 1.0, hi - 1.0, points)
    sup_min, sub_max = math.inf, -math.inf
    for t in ts:
        xs = float(travel(path, mu, t)) + rng.uniform(-10.0, 60.0)
        sup_min = min(sup_min, float(E.residual("super", mu, path, xs, t)))
        xw = float(env.x_omega(t)) + rng.uniform(0.0, 60.0)
        sub_max = max(sub_max, float(E.residual("sub", env, path, xw, t)))
    ok = sup_min >= -tol and sub_max <= tol
    return PropertyResult("envelope-residuals", ok, max(-sup_min, sub_max), tol,
                          f"min super residual {sup_min:.3g}, max sub residual {sub_max:.3g} "
                          f"(mu={mu}, mu_tilde={env.mu_tilde:.6g}, delta={env.corrector.delta}, d={env.d:.6g})")


def corrector_inequality(path, mu: float, tol: float = 1e-9) -> PropertyResult:
    """``(1 - delta) a + A' >= K`` at every grid midpoint."""
    env = E.build_envelope(path, mu)
    margin = float(np.min(env.corrector.midpoint_margin()))
    return PropertyResult("corrector-inequality", margin >= -tol, margin, tol,
                          f"min midpoint margin; sup|A| <= {env.corrector.sup_norm:.3g}")


def envelope_sandwich(path, mu: float, sim: SimConfig, duration: float = 10.0, width: int = 400,
                      tol: float = 1e-6) -> PropertyResult:
    """The lattice solution started from the super-solution stays between the envelopes.

    In the tail the solution coincides with the super-solution, so ``tol``
    must absorb the integrator error, which is largest at telegraph ramps.
    """
    env = E.build_envelope(path, mu)
    sup = E.SuperSolution(mu, path)
    t0 = _start(path, duration)
    base = int(math.floor(float(travel(path, mu, t0))))
    cfg = _cfg(sim, boundary_left=LeftBoundary("copy"), boundary_right="geometric", cadence=0.5)
    s = init_from_profile(lambda x: sup(x, t0), (base - 100, base - 100 + width), 1, t0)
    worst = [-math.inf]

    def rec(st):
        above = float(np.max(st.values - sup(st.x, st.time)))
        below = float(np.max(env(st.x, st.time) - st.values))
        worst[0] = max(worst[0], above, below)

    evolve(s, path, t0 + duration, cfg, recorder=rec)
    return PropertyResult("envelope-sandwich", worst[0] <= tol, worst[0], tol,
                          "max violation of sub <= u <= super")


def run_suite(path, sim: SimConfig, mu: float = 0.5, pairs: int = 200, duration: float = 10.0,
              points: int = 1000, width: int = 200, tol: float = 1e-6, seed: int = 0,
              executor=None) -> list[PropertyResult]:
    checks: list[tuple[str, Callable[[], PropertyResult]]] = [
        ("comparison", lambda: comparison_fuzz(path, sim, pairs, duration, width, seed)),
        ("logistic-oracle", lambda: logistic_oracle(path, duration=duration)),
        ("equilibrium-decay", lambda: equilibrium_decay(path, sim, duration, seed=seed)),
        ("continuity", lambda: continuity(path, sim, duration, seed=seed)),
        ("envelope-residuals", lambda: envelope_residuals(path, mu, points, seed, tol)),
        ("corrector-inequality", lambda: corrector_inequality(path, mu)),
        ("envelope-sandwich", lambda: envelope_sandwich(path, mu, sim, duration, tol=tol)),
    ]

    def guarded(item):
        name, fn = item
        try:
            return fn()
        except (IntegrationError, NumericalError) as exc:
            return PropertyResult(name, False, math.nan, math.nan, str(exc), kind="numerical")

    if executor is not None:
        return list(executor.map(guarded, checks))
    return [guarded(c) for c in checks]


def suite_exit_code(results: list[PropertyResult]) -> int:
    if any(not r.passed and r.kind == "numerical" for r in results):
        return 5
    if any(not r.passed for r in results):
        return 4
    return 0


def format_report(results: list[PropertyResult], stream: Optional[object] = None) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else ("FAIL (numerical)" if r.kind == "numerical" else "FAIL")
        lines.append(f"{status:17s} {r.name:22s} metric={r.metric:.6g} tol={r.tolerance:.3g}  {r.detail}")
    return "\n".join(lines)
