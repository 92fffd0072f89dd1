"""Experiment configuration: a versioned JSON document validated against a schema.

Unknown keys are rejected. Validation messages name the offending key path
and the line it sits on.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import jsonschema

from . import media as M
from .dispersion import envelope_speed, mu_roots, mu_star
from .errors import ConfigurationError
from .lattice import LeftBoundary, SimConfig

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": _num}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA: dict = _obj({
    "version": {"const": SCHEMA_VERSION},
    "media": _obj({
        "kind": {"enum": list(M.KINDS)},
        "params": _obj({
            "value": _pos,
            "mean": _num, "amplitudes": _numlist, "frequencies": _numlist, "phases": _numlist,
            "low": _pos, "high": _pos, "mean_low": _pos, "mean_high": _pos,
            "a_min": _pos, "a_max": _pos, "node_spacing": _pos,
        }),
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "horizon": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "dt_media": _pos,
        "ramp_width": _pos,
    }, required=["kind"]),
    "mu": _pos,
    "gamma": _pos,
    "sim": _obj({
        "dt": {"oneOf": [_pos, {"type": "null"}]},
        "boundary_left": _obj({
            "kind": {"enum": ["copy", "fixed", "homogeneous-tracker"]},
            "value": _nonneg,
        }),
        "boundary_right": {"enum": ["geometric", "zero", "copy"]},
        "recenter": {"type": "boolean"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "trigger": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "jump": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "cadence": _pos,
        "width": {"type": "integer", "minimum": 16},
    }),
    "front": _obj({
        "taus": {"type": "array", "items": _pos, "minItems": 1},
        "eval_times": {"type": "array", "items": _num, "minItems": 1},
        "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "stationarity_shift": _num,
        "stationarity_tau": _pos,
        "tail_offsets": {"type": "array", "items": _nonneg, "minItems": 1},
    }),
    "envelope": _obj({
        "times": {"type": "array", "items": _num, "minItems": 1},
        "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "step": _pos,
    }),
    "analysis": _obj({
        "fit_ahead": _nonneg,
        "fit_length": _pos,
        "least_mean_r": _pos,
        "monotonicity_tol": _nonneg,
        "alpha_slack": _nonneg,
    }),
    "perturbation": _obj({
        "amplitude": _num,
        "rate": _nonneg,
        "tail_ratio": _pos,
    }),
    "stability": _obj({
        "horizon": _pos, "tau": _pos, "behind": _nonneg, "ahead": _nonneg, "floor": _pos,
    }),
    "spreading": _obj({
        "horizon": _pos, "support": {"type": "integer", "minimum": 0}, "height": _pos,
        "width": {"oneOf": [{"type": "integer", "minimum": 16}, {"type": "null"}]},
    }),
    "simulate": _obj({
        "t_end": _pos,
        "initial": {"enum": ["front", "super", "step", "compact"]},
        "tau": _pos,
    }),
    "speedscan": _obj({
        "a_bar": {"oneOf": [_pos, {"type": "null"}]},
        "gammas": {"type": "array", "items": _pos},
        "mu_grid": _obj({"lo": _pos, "hi": _pos, "n": {"type": "integer", "minimum": 2}}),
    }),
    "validate": _obj({
        "pairs": _posint,
        "duration": _pos,
        "points": _posint,
        "lattice_width": {"type": "integer", "minimum": 16},
        "mu": _pos,
        "tolerance": _pos,
    }),
    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    "output_dir": {"type": "string"},
}, required=["version"])


DEFAULTS: dict = {
    "media": {"kind": "periodic-sum",
              "params": {"mean": 1.0, "amplitudes": [0.5], "frequencies": [1.0], "phases": [-math.pi / 2]},
              "seed": 0, "horizon": [-100.0, 120.0], "dt_media": 1e-2, "ramp_width": 1e-2},
    "sim": {"dt": None, "boundary_left": {"kind": "copy", "value": 0.0}, "boundary_right": "geometric",
            "recenter": True, "level": 0.5, "trigger": 0.25, "jump": 0.25, "cadence": 0.5, "width": 2000},
    "front": {"taus": [10.0, 20.0, 40.0, 80.0], "eval_times": [0.0, 2 * math.pi], "window": [-100, 60],
              "stationarity_shift": 2 * math.pi, "stationarity_tau": 80.0,
              "tail_offsets": [0.0, 5.0, 10.0, 20.0, 40.0]},
    "envelope": {"times": [0.0, 1.0, 2.0], "window": [-20.0, 60.0], "step": 0.5},
    "analysis": {"fit_ahead": 5.0, "fit_length": 10.0, "least_mean_r": 20.0,
                 "monotonicity_tol": 1e-8, "alpha_slack": 1e-6},
    "perturbation": {"amplitude": 0.5, "rate": 0.1, "tail_ratio": 1.0},
    "stability": {"horizon": 100.0, "tau": 80.0, "behind": 50.0, "ahead": 20.0, "floor": 1e-12},
    "spreading": {"horizon": 100.0, "support": 5, "height": 1.0, "width": None},
    "simulate": {"t_end": 100.0, "initial": "front", "tau": 80.0},
    "speedscan": {"a_bar": None, "gammas": [], "mu_grid": {"lo": 0.05, "hi": 3.0, "n": 300}},
    "validate": {"pairs": 200, "duration": 10.0, "points": 1000, "lattice_width": 200,
                 "mu": 0.5, "tolerance": 1e-6},
    "output_dir": "runs",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _line_of(text: str, path) -> Optional[int]:
    """Line of the innermost key on ``path``, found by scanning forward key by key."""
    pos, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def _fail(text: str, path, message: str):
    where = "/".join(str(p) for p in path) or "<root>"
    line = _line_of(text, path) if path else 1
    prefix = f"line {line}: " if line else ""
    raise ConfigurationError(f"{prefix}{where}: {message}")


@dataclass
class ExperimentConfig:
    """Validated configuration with defaults filled in.

    ``mu`` is resolved lazily per media path, since the least mean of a random
    medium depends on its seed.
    """

    raw: dict
    resolved: dict
    media: M.MediaModel
    sim: SimConfig
    width: int
    mu: Optional[float] = None
    gamma: Optional[float] = None
    seeds: list = field(default_factory=list)
    text: str = ""

    def section(self, name: str) -> dict:
        return self.resolved[name]

    def media_for_seed(self, seed: int) -> M.MediaModel:
        from dataclasses import replace
        return replace(self.media, seed=int(seed))

    def resolve_mu(self, path: M.MediaPath) -> float:
        """``mu`` directly, or the small root of ``cbar(mu) = gamma`` at the path's least mean."""
        a_bar = M.least_mean_value(path)
        ms = mu_star(a_bar).mu_star
        if self.mu is None and self.gamma is None:
            raise ConfigurationError("this command needs exactly one of 'mu' or 'gamma'")
        if self.gamma is not None:
            roots = mu_roots(self.gamma, a_bar)
            mu = roots.mu_small
            if abs(envelope_speed(mu, a_bar) - self.gamma) > 1e-9 * max(1.0, self.gamma):
                raise ConfigurationError(f"gamma={self.gamma} could not be resolved to mu")
        else:
            mu = self.mu
        if not 0 < mu < ms:
            line = _line_of(self.text, ["mu"])
            prefix = f"line {line}: " if line else ""
            raise ConfigurationError(f"{prefix}mu={mu} must lie in (0, mu*={ms}) for a_bar={a_bar}")
        return mu


def default_document() -> dict:
    return {"version": SCHEMA_VERSION, **copy.deepcopy(DEFAULTS)}


def parse_config(text: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        msg = err.message
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = path + extra[:1]
            msg = f"unknown key {extra[0]!r}" if extra else msg
        _fail(text, path, msg)
    if "mu" in doc and "gamma" in doc:
        _fail(text, ["gamma"], "specify exactly one of 'mu' or 'gamma', not both")
    if doc.get("perturbation", {}).get("tail_ratio", 1.0) != 1.0:
        _fail(text, ["perturbation", "tail_ratio"],
              "tail ratio must be 1: the perturbation must match the front ahead of it")
    if doc.get("perturbation", {}).get("amplitude", 0.0) <= -1.0:
        _fail(text, ["perturbation", "amplitude"], "amplitude must exceed -1")
    res = _merge(DEFAULTS, {k: v for k, v in doc.items() if k != "version"})
    if "media" in doc and "params" not in doc["media"] and doc["media"].get("kind") != DEFAULTS["media"]["kind"]:
        res["media"]["params"] = {}
    lo, hi = res["media"]["horizon"]
    if not hi > lo:
        _fail(text, ["media", "horizon"], f"empty horizon [{lo}, {hi}]")
    seeds = list(res.get("seeds") or [res["media"]["seed"]])
    if seed_override is not None:
        seeds = [int(seed_override)]
        res["media"]["seed"] = int(seed_override)
    res["seeds"] = seeds
    md = res["media"]
    model = M.MediaModel(md["kind"], dict(md["params"]), int(seeds[0]), (float(lo), float(hi)),
                         float(md["dt_media"]), float(md["ramp_width"]))
    try:
        model.bounds()
    except ConfigurationError as exc:
        _fail(text, ["media"], str(exc))
    a_min, a_max = model.bounds()
    if not (a_min > 0 and a_min <= a_max):
        _fail(text, ["media", "params"], f"invalid bounds a_min={a_min}, a_max={a_max}")
    s = res["sim"]
    bl = s["boundary_left"]
    sim = SimConfig(dt=s["dt"], boundary_left=LeftBoundary(bl["kind"], float(bl["value"])),
                    boundary_right=s["boundary_right"], recenter=s["recenter"], level=s["level"],
                    trigger=s["trigger"], jump=s["jump"], cadence=s["cadence"])
    return ExperimentConfig(raw=doc, resolved=res, media=model, sim=sim, width=int(s["width"]),
                            mu=doc.get("mu"), gamma=doc.get("gamma"), seeds=seeds, text=text)


def load_config(path: Optional[str], seed_override: Optional[int] = None) -> ExperimentConfig:
    if path is None:
        text = json.dumps(default_document(), indent=2)
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, seed_override)
