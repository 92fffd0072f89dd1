"""Command bodies: each runner writes its artifacts into one directory and
returns a JSON-ready summary plus an exit code."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import dispersion as D
from . import envelopes as E
from . import fronts as F
from . import lattice as L
from . import media as M
from . import validation as V
from .config import ExperimentConfig
from .errors import InfeasibleError


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dump_json(obj, fh) -> None:
    json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
    fh.write("\n")


@dataclass
class ArtifactWriter:
    """Writes CSV/JSON files under ``root`` and remembers what it wrote."""

    root: str
    columns: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def __post_init__(self):
        os.makedirs(self.root, exist_ok=True)

    def csv(self, name: str, header: dict, rows) -> str:
        path = os.path.join(self.root, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(header))
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.columns[name] = {"format": "csv", "columns": header}
        self.files.append(name)
        return path

    def json(self, name: str, obj, description: str) -> str:
        path = os.path.join(self.root, name)
        with open(path, "w", encoding="utf-8") as fh:
            dump_json(obj, fh)
        self.columns[name] = {"format": "json", "description": description}
        self.files.append(name)
        return path

    def inventory(self) -> list:
        out = []
        for name in self.files:
            with open(os.path.join(self.root, name), "rb") as fh:
                data = fh.read()
            out.append({"path": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        return out


@dataclass
class Outcome:
    summary: dict
    exit_code: int = 0


def _require_horizon(path: M.MediaPath, lo: float, hi: float) -> None:
    a, b = path.horizon
    if lo < a - 1e-9 or hi > b + 1e-9:
        raise InfeasibleError(f"media horizon [{a}, {b}] does not cover the required [{lo}, {hi}]")


def _media_info(path: M.MediaPath) -> dict:
    a_bar = M.least_mean_value(path)
    disp = D.mu_star(a_bar)
    return {"kind": path.kind, "a_min": path.a_min, "a_max": path.a_max, "a_bar": a_bar,
            "a_bar_analytic": path.analytic_mean is not None,
            "mu_star": disp.mu_star, "c0": disp.c0}


# -- speedscan ---------------------------------------------------------------

def run_speedscan(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    sec = cfg.section("speedscan")
    a_bar = sec["a_bar"] if sec["a_bar"] is not None else M.least_mean_value(path)
    disp = D.mu_star(a_bar)
    grid = sec["mu_grid"]
    mus = np.linspace(grid["lo"], grid["hi"], int(grid["n"]))
    out.csv("envelope.csv",
            {"mu": "decay rate", "cbar": "envelope speed (2 cosh mu - 2 + a_bar) / mu",
             "stationarity_residual": "mu 2 sinh mu - (2 cosh mu - 2 + a_bar)"},
            ((m, D.envelope_speed(m, a_bar), D.stationarity_residual(m, a_bar)) for m in mus))
    roots = []
    for g in sec["gammas"]:
        entry = {"gamma": g}
        try:
            r = D.mu_roots(g, a_bar)
            entry.update(mu_small=r.mu_small, mu_large=r.mu_large, degenerate=r.degenerate,
                         readback_small=D.envelope_speed(r.mu_small, a_bar),
                         readback_large=D.envelope_speed(r.mu_large, a_bar), error=None)
        except Exception as exc:  # partial failure: flag the entry, keep going
            entry.update(mu_small=None, mu_large=None, degenerate=None, error=str(exc))
        roots.append(entry)
    summary = {"a_bar": a_bar, "mu_star": disp.mu_star, "c0": disp.c0, "tol": disp.tol,
               "stationarity_residual": D.stationarity_residual(disp.mu_star, a_bar), "roots": roots}
    out.json("summary.json", summary, "a_bar, mu_star, c0 and root pairs per requested gamma")
    return Outcome(summary)


# -- front ---------------------------------------------------------------------

def _fit_profile(j, values, t, level, ahead, length):
    st = L.LatticeState(int(j[0]), np.asarray(values, dtype=float), float(t))
    return F.tail_decay(st, level, ahead, length), F.front_position(st, level)


def run_front(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    mu = cfg.resolve_mu(path)
    fr, an = cfg.section("front"), cfg.section("analysis")
    taus, evals = fr["taus"], fr["eval_times"]
    shift, st_tau = fr["stationarity_shift"], fr["stationarity_tau"]
    _require_horizon(path, -max(max(taus), st_tau), max(max(evals), shift))
    window = tuple(fr["window"])
    if window[1] - window[0] + 1 > cfg.width // 2:
        raise InfeasibleError(f"profile window {window} needs width > {2 * (window[1] - window[0] + 1)}")
    bp = L.back_propagate_front(path, mu, taus, evals, window, cfg.width, cfg.sim, executor)
    env = E.build_envelope(path, mu)
    sup = E.SuperSolution(mu, path)
    tol = an["monotonicity_tol"]

    rows, sandwich = [], 0.0
    for tau in bp.taus:
        for t in bp.eval_times:
            x = float(D.travel(path, mu, t)) + bp.j
            lo, hi = env(x, t), sup(x, t)
            V_ = bp.profile(tau, t)
            sandwich = max(sandwich, float(np.max(V_ - hi)), float(np.max(lo - V_)))
            rows.extend(zip([tau] * bp.j.size, [t] * bp.j.size, bp.j, V_, lo, hi))
    out.csv("profiles.csv", {"tau": "back-propagation time", "t": "evaluation time",
                             "j": "co-moving coordinate x - int_0^t c", "u": "lattice value",
                             "v_sub": "sub-solution", "v_super": "super-solution"}, rows)

    cauchy = bp.cauchy()
    out.csv("cauchy.csv", {"tau_prev": "previous ladder rung", "tau": "ladder rung", "t": "evaluation time",
                           "sup_diff": "sup_j |V_tau - V_tau_prev|"}, cauchy)
    decreasing = {}
    for t in bp.eval_times:
        d = [c[3] for c in cauchy if c[2] == t]
        decreasing[str(t)] = bool(all(b < a for a, b in zip(d, d[1:])))

    tau_max = bp.taus[-1]
    fits, tail_rows = [], []
    for t in bp.eval_times:
        prof = bp.profile(tau_max, t)
        for off in fr["tail_offsets"]:
            try:
                mh, X = _fit_profile(bp.j, prof, t, cfg.sim.level, off, an["fit_length"])
            except (InfeasibleError, ValueError):
                mh, X = math.nan, math.nan
            fits.append((t, off, mh, mh / mu - 1.0))
        for jj, v in zip(bp.j, prof):
            if jj >= 0 and jj % 10 == 0:
                tail_rows.append((t, jj, v * math.exp(mu * jj)))
    out.csv("tail_fit.csv", {"t": "evaluation time", "ahead": "fit window start past the crossing",
                             "mu_hat": "fitted decay rate", "rel_error": "mu_hat / mu - 1"}, fits)
    out.csv("tail_ratio.csv", {"t": "evaluation time", "j": "co-moving coordinate",
                               "ratio": "V(j) / exp(-mu j)"}, tail_rows)

    default_fit = [f for f in fits if f[1] == an["fit_ahead"]]
    stat = L.stationarity_check(path, mu, shift, st_tau, window, cfg.width, cfg.sim)
    variation = 0.0
    if len(bp.eval_times) > 1:
        ref = bp.profile(tau_max, bp.eval_times[0])
        variation = max(float(np.max(np.abs(bp.profile(tau_max, t) - ref))) for t in bp.eval_times[1:])
    summary = {
        "mu": mu, "gamma": cfg.gamma, "speed": D.envelope_speed(mu, M.least_mean_value(path)),
        "media": _media_info(path), "taus": bp.taus, "eval_times": bp.eval_times,
        "cauchy": [{"tau_prev": a, "tau": b, "t": t, "sup_diff": d} for a, b, t, d in cauchy],
        "cauchy_decreasing": decreasing,
        "tau_monotonicity_violation": bp.tau_monotonicity_violation(),
        "x_monotonicity_violation": bp.x_monotonicity_violation(),
        "sandwich_violation": sandwich,
        "tail_fit": [{"t": t, "ahead": a, "mu_hat": m, "rel_error": e} for t, a, m, e in fits],
        "stationarity": {"t_shift": shift, "tau": st_tau, "error": stat},
        "profile_time_variation": variation,
        "envelope": {"mu_tilde": env.mu_tilde, "delta": env.corrector.delta, "d": env.d,
                     "K": env.corrector.K, "A_sup_bound": env.corrector.sup_norm,
                     "A_truncation_error": _truncation(env, bp.eval_times)},
        "checks": {
            "tau_monotone": bp.tau_monotonicity_violation() <= tol,
            "x_monotone": bp.x_monotonicity_violation() <= tol,
            "sandwich": sandwich <= tol,
            "cauchy_decreasing": all(decreasing.values()),
            "tail_fit_2pct": bool(all(abs(f[3]) < 0.02 for f in default_fit)),
            "stationarity_1e-3": stat < 1e-3,
        },
    }
    out.json("summary.json", summary, "front construction diagnostics")
    return Outcome(summary)


def _truncation(env, times) -> Optional[float]:
    try:
        return env.corrector.truncation_error(times)
    except ValueError:
        return None


# -- envelope ----------------------------------------------------------------------

def run_envelope(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    mu = cfg.resolve_mu(path)
    ev = cfg.section("envelope")
    env = E.build_envelope(path, mu)
    sup = E.SuperSolution(mu, path)
    lo, hi = path.horizon
    times = [t for t in ev["times"]]
    if any(t - 1e-3 < lo or t + 1e-3 > hi for t in times):
        raise InfeasibleError(f"envelope times must lie inside the media horizon [{lo}, {hi}]")
    xi = np.arange(ev["window"][0], ev["window"][1] + 0.5 * ev["step"], ev["step"])
    rows, worst_sup, worst_sub = [], math.inf, -math.inf
    for t in times:
        x = float(D.travel(path, mu, t)) + xi
        r_sup = E.residual("super", sup, path, x, t)
        valid = x >= env.x_omega(t)
        r_sub = np.full(x.size, math.nan)
        if np.any(valid):
            r_sub[valid] = E.residual("sub", env, path, x[valid], t)
        worst_sup = min(worst_sup, float(np.min(r_sup)))
        if np.any(valid):
            worst_sub = max(worst_sub, float(np.max(r_sub[valid])))
        rows.extend(zip(x, [t] * x.size, sup(x, t), env(x, t), r_sup, r_sub))
    out.csv("envelope.csv", {"x": "lattice coordinate", "t": "time", "super": "super-solution",
                             "sub": "clamped sub-solution", "residual_super": "super residual (>= 0)",
                             "residual_sub": "sub residual (<= 0; NaN left of x_omega)"}, rows)
    summary = {"mu": mu, "mu_tilde": env.mu_tilde, "delta": env.corrector.delta, "d": env.d,
               "K": env.corrector.K, "A_sup_bound": env.corrector.sup_norm,
               "A_truncation_error": _truncation(env, times),
               "min_residual_super": worst_sup, "max_residual_sub": worst_sub,
               "min_corrector_margin": float(np.min(env.corrector.midpoint_margin()))}
    out.json("summary.json", summary, "envelope parameters and residual extremes")
    return Outcome(summary)


# -- stability -------------------------------------------------------------------

def run_stability(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    mu = cfg.resolve_mu(path)
    st, an = cfg.section("stability"), cfg.section("analysis")
    p = cfg.section("perturbation")
    _require_horizon(path, -st["tau"], st["horizon"])
    pert = F.Perturbation(p["amplitude"], p["rate"], p["tail_ratio"])
    rep = F.stability_run(path, mu, pert, st["horizon"], st["tau"], cfg.width, cfg.sim,
                          cfg.sim.cadence or 0.5, st["behind"], st["ahead"], st["floor"])
    out.csv("stability.csv", {"t": "time", "alpha": "max(ratio_sup, 1/ratio_inf, 1)",
                              "ratio_sup": "max u_pert / u_front on the window",
                              "ratio_inf": "min u_pert / u_front on the window"},
            zip(rep.times, rep.alpha, rep.ratio_sup, rep.ratio_inf))
    summary = {"mu": mu, "media": _media_info(path), "perturbation": p,
               "alpha_initial": rep.alpha[0], "alpha_final": rep.alpha[-1],
               "max_increase": rep.increase(),
               "checks": {"nonincreasing": rep.increase() <= an["alpha_slack"],
                          "alpha_ge_1": bool(np.all(rep.alpha >= 1.0)),
                          "final_within_2pct": rep.alpha[-1] - 1.0 < 0.02}}
    out.json("summary.json", summary, "alpha(t) summary")
    return Outcome(summary)


# -- spreading -------------------------------------------------------------------

def run_spreading(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    sp = cfg.section("spreading")
    t0 = max(0.0, path.horizon[0])
    _require_horizon(path, t0, t0 + sp["horizon"])
    res = F.spreading_speed(path, cfg.sim, sp["horizon"], sp["support"], sp["height"], sp["width"],
                            cfg.sim.level)
    info = _media_info(path)
    c0 = info["c0"]
    out.csv("spreading.csv", {"t": "time since start", "X_right": "right flank crossing",
                              "X_left": "left flank crossing", "c0_line": "c0 * t reference"},
            ((t, r, l, c0 * t) for t, r, l in zip(res.times, res.right, res.left)))
    summary = {"media": info, "right_speed": res.right_speed, "left_speed": res.left_speed,
               "c0": c0, "right_rel_error": res.right_speed / c0 - 1, "left_rel_error": res.left_speed / c0 - 1,
               "checks": {"within_5pct": abs(res.right_speed / c0 - 1) < 0.05 and abs(res.left_speed / c0 - 1) < 0.05}}
    out.json("summary.json", summary, "flank speeds against c0")
    return Outcome(summary)


# -- simulate ----------------------------------------------------------------------

def run_simulate(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    sm, an = cfg.section("simulate"), cfg.section("analysis")
    kind = sm["initial"]
    needs_mu = kind in ("front", "super")
    mu = cfg.resolve_mu(path) if needs_mu or cfg.mu is not None or cfg.gamma is not None else None
    t_end = sm["t_end"]
    if kind == "front":
        _require_horizon(path, -sm["tau"], t_end)
        series, state = F.speed_run(path, mu, t_end, sm["tau"], cfg.width, cfg.sim,
                                    cfg.sim.cadence or 0.5, an["fit_ahead"], an["fit_length"])
    else:
        t0 = max(0.0, path.horizon[0])
        _require_horizon(path, t0, t0 + t_end)
        lo, hi = L.front_window(cfg.width)
        if kind == "super":
            prof = lambda x: E.SuperSolution(mu, path)(x, t0)
        elif kind == "step":
            prof = lambda x: (np.asarray(x) <= 0).astype(float)
        else:
            s = cfg.section("spreading")
            prof = lambda x: np.where(np.abs(x) <= s["support"], s["height"], 0.0)
        state = L.init_from_profile(prof, (lo, hi), 1, t0)
        fits = []

        def rec(st):
            try:
                fits.append(F.tail_decay(st, cfg.sim.level, an["fit_ahead"], an["fit_length"]))
            except (InfeasibleError, ValueError):
                fits.append(math.nan)

        state, series = L.evolve(state, path, t0 + t_end, cfg.sim, recorder=rec, mu=mu)
        series.mu_hat = np.asarray(fits)
        if mu is not None:
            series.theoretical_positions = series.theoretical_positions - float(D.travel(path, mu, t0))
    theory = series.theoretical_positions
    out.csv("series.csv", {"t": "time", "X": "level crossing", "X_theory": "int_0^t c (NaN without mu)",
                           "mu_hat": "tail decay fit"},
            zip(series.times, series.positions,
                theory if theory is not None else np.full(series.times.size, math.nan), series.mu_hat))
    out.csv("final_state.csv", {"site": "lattice index", "x": "coordinate", "u": "value"},
            zip(state.sites, state.x, state.values))
    summary = {"initial": kind, "mu": mu, "media": _media_info(path), "t_end": t_end}
    if mu is not None and np.all(np.isfinite(series.positions)):
        a_bar = M.least_mean_value(path)
        ref = D.envelope_speed(mu, a_bar)
        r = an["least_mean_r"]
        est = F.least_mean_speed(series, r)
        th = F.least_mean_speed(series, r, "theory")
        drift = F.relative_drift(series)
        late = series.mu_hat[series.times >= series.times[0] + 10]
        summary.update(reference_speed=ref, least_mean_speed=est.least_mean, regression_speed=est.slope,
                       theory_least_mean_speed=th.least_mean, relative_drift=drift,
                       least_mean_rel_error=est.least_mean / ref - 1,
                       mu_hat_max_rel_error=float(np.nanmax(np.abs(late / mu - 1))) if late.size else None,
                       checks={"drift_2pct": drift < 0.02,
                               "least_mean_2pct": abs(est.least_mean / ref - 1) < 0.02})
    out.json("summary.json", summary, "front speed diagnostics")
    return Outcome(summary)


# -- validate ----------------------------------------------------------------------

def run_validate(cfg: ExperimentConfig, path: M.MediaPath, out: ArtifactWriter, executor=None) -> Outcome:
    v = cfg.section("validate")
    results = V.run_suite(path, cfg.sim, v["mu"], v["pairs"], v["duration"], v["points"],
                          v["lattice_width"], v["tolerance"], int(cfg.media.seed), executor)
    code = V.suite_exit_code(results)
    report = {"media": path.kind, "passed": code == 0, "exit_code": code,
              "properties": [r.to_dict() for r in results]}
    out.json("report.json", report, "per-property results")
    out.csv("report.csv", {"name": "property", "passed": "1 if it holds", "metric": "observed value",
                           "tolerance": "threshold"},
            ((r.name, r.passed, r.metric, r.tolerance) for r in results))
    return Outcome(report, code)


RUNNERS = {
    "speedscan": run_speedscan,
    "front": run_front,
    "stability": run_stability,
    "spreading": run_spreading,
    "validate": run_validate,
    "envelope": run_envelope,
    "simulate": run_simulate,
}
