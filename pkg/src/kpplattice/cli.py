"""Command-line entry point ``kpplattice``.

Exit codes: 0 success, 2 configuration error, 3 infeasible resources,
4 property failure, 5 numerical instability.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from . import __version__
from . import media as M
from .config import SCHEMA, SCHEMA_VERSION, ExperimentConfig, load_config
from .errors import KPPError
from .experiments import RUNNERS, ArtifactWriter, dump_json

log = logging.getLogger("kpplattice")

COMMANDS = {
    "speedscan": "envelope speed curve, mu*, c0 and root pairs",
    "front": "back-propagation front construction and diagnostics",
    "stability": "alpha(t) for a perturbed front",
    "spreading": "flank speeds from compactly supported data",
    "validate": "property suite; exit 0 iff every property holds",
    "simulate": "raw forward evolution with front tracking",
    "envelope": "sub/super-solution values and residuals on a grid",
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", metavar="PATH", default=d(None), help="JSON experiment config")
    p.add_argument("--out", metavar="DIR", default=d(None), help="output directory for this run")
    p.add_argument("--threads", metavar="N", type=int, default=d(1), help="worker threads")
    p.add_argument("--seed-override", metavar="K", type=int, default=d(None),
                   help="replace the media seed (and seed list) with K")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpplattice", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_ in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        _global_flags(sp, suppress=True)
    sub.add_parser("schema", help="print the config JSON schema")
    sub.add_parser("defaults", help="print a complete default config")
    return parser


def _manifest(cfg: ExperimentConfig, command: str, argv, status: str, **extra) -> dict:
    return {"schema_version": SCHEMA_VERSION, "code_version": __version__, "command": command,
            "argv": list(argv), "python": platform.python_version(), "status": status,
            "config": cfg.resolved, "seeds": cfg.seeds, **extra}


def _write_manifest(root: str, data: dict) -> None:
    os.makedirs(root, exist_ok=True)
    tmp = os.path.join(root, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        dump_json(data, fh)
    os.replace(tmp, os.path.join(root, "manifest.json"))


def _run_member(cfg: ExperimentConfig, command: str, seed: int, root: str, executor, out: str) -> dict:
    t0 = time.perf_counter()
    model = cfg.media_for_seed(seed)
    writer = ArtifactWriter(root)
    try:
        path = M.build_media(model)
        outcome = RUNNERS[command](cfg, path, writer, executor)
        code, error = outcome.exit_code, None
    except KPPError as exc:
        code, error = exc.exit_code, f"{type(exc).__name__}: {exc}"
    writer.json("schema.json", {"files": writer.columns}, "column documentation for this run")
    return {"seed": seed, "dir": os.path.relpath(root, out), "exit_code": code, "error": error,
            "files": writer.inventory(), "seconds": time.perf_counter() - t0}


def run(command: str, cfg: ExperimentConfig, out: str, threads: int = 1, argv=()) -> int:
    started = time.perf_counter()
    _write_manifest(out, _manifest(cfg, command, argv, "running"))
    seeds = cfg.seeds
    ensemble = len(seeds) > 1
    members = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        if ensemble:
            futures = [pool.submit(_run_member, cfg, command, s, os.path.join(out, f"seed-{s}"), None, out)
                       for s in seeds]
            members = [f.result() for f in futures]
        else:
            inner = pool if threads > 1 else None
            members = [_run_member(cfg, command, seeds[0], out, inner, out)]
    codes = [m["exit_code"] for m in members if m["exit_code"]]
    code = max(codes) if codes else 0
    for m in members:
        if m["error"]:
            print(f"kpplattice {command}: seed {m['seed']}: {m['error']}", file=sys.stderr)
    timings = {"total_seconds": time.perf_counter() - started,
               "members": {str(m["seed"]): m.pop("seconds") for m in members}}
    _write_manifest(out, _manifest(cfg, command, argv, "complete" if code == 0 else "failed",
                                   exit_code=code, members=members, timings=timings))
    return code


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        dump_json(SCHEMA, sys.stdout)
        return 0
    if args.command == "defaults":
        from .config import default_document
        dump_json(default_document(), sys.stdout)
        return 0
    if args.threads < 1:
        print("kpplattice: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed_override)
    except KPPError as exc:
        print(f"kpplattice: config error: {exc}", file=sys.stderr)
        return exc.exit_code
    out = args.out or os.path.join(cfg.resolved["output_dir"], args.command)
    code = run(args.command, cfg, out, args.threads, argv)
    if args.command == "validate":
        _print_validate(out, cfg)
    return code


def _print_validate(out: str, cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        root = os.path.join(out, f"seed-{seed}") if len(cfg.seeds) > 1 else out
        try:
            with open(os.path.join(root, "report.json"), encoding="utf-8") as fh:
                rep = json.load(fh)
        except OSError:
            continue
        for p in rep["properties"]:
            status = "PASS" if p["passed"] else "FAIL"
            print(f"[seed {seed}] {status} {p['name']}: {p['detail']}")


if __name__ == "__main__":
    raise SystemExit(main())
