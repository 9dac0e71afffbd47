"""Headless command line: batch trials, replay verification, metrics, maps.

Exit codes: 0 success, 1 trial/verification failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, SimConfig, canonical_json, shipped_config
from .engine import ConfigMismatchError, ReplayDivergenceError, Session, verify_replay
from .grid import MapFormatError, parse_map
from .policies import drive, make_policy
from .scenario import finalize_metrics
from .triallog import MalformedLogError, read_log

SHIPPED_MAPS = ("hallway.txt", "retrieval.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hrisim",
        description="Deterministic human-robot-interaction trials, headless or served live.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run trials headless and print metrics")
    run.add_argument("--config", help="config JSON file or shipped config name")
    run.add_argument("--scenario", choices=("hallway", "retrieval"))
    run.add_argument("--map", dest="map_name", help="map file or shipped map name")
    run.add_argument(
        "--policy", choices=("Idle", "WaypointFollower", "Blocker", "GreedyCollector")
    )
    run.add_argument("--seed", default=None, help="seed N, or inclusive sweep A-B")
    run.add_argument("--ticks", type=int, help="tick budget override")
    run.add_argument("--out", help="trial log path; {seed} is substituted in sweeps")
    run.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")

    verify = sub.add_parser("verify", help="re-simulate a trial log and compare")
    verify.add_argument("log", help="trial log (JSONL)")
    verify.add_argument("--config", required=True,
                        help="config the log was recorded under")

    metrics = sub.add_parser("metrics", help="print metrics computed from a log")
    metrics.add_argument("log", help="trial log (JSONL)")

    maps = sub.add_parser("maps", help="validate map files")
    maps.add_argument("paths", nargs="*", help="map files (default: shipped maps)")

    serve = sub.add_parser("serve", help="start the live session server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--log-dir", help="directory for per-session trial logs")
    serve.add_argument("--static-dir", help="also serve page assets from this directory")
    return parser


def _load_overrides(name: str | None) -> dict:
    if name is None:
        return {}
    p = Path(name)
    if p.is_file():
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{name}: top level must be an object")
        return data
    return shipped_config(name)


def _assemble(args, seed: int | None) -> SimConfig:
    cfg = _load_overrides(args.config)
    if args.scenario:
        cfg["scenario"] = args.scenario
    if args.map_name:
        cfg["map"] = args.map_name
    if seed is not None:
        cfg["seed"] = seed
    if args.ticks is not None:
        cfg["tick_budget"] = args.ticks
    if args.policy:
        cfg.setdefault("human_policy", {})["kind"] = args.policy
    return SimConfig.from_dict(cfg)


def _parse_seeds(text: str | None) -> list[int] | None:
    if text is None:
        return None
    if "-" in text.lstrip("-"):
        lo, hi = text.split("-", 1) if not text.startswith("-") else (None, None)
        if lo is None or not lo.strip().isdigit() or not hi.strip().isdigit():
            raise ConfigError(f"bad seed sweep: {text!r} (expected N or A-B)")
        lo_i, hi_i = int(lo), int(hi)
        if hi_i < lo_i:
            raise ConfigError(f"bad seed sweep: {text!r} (A-B needs A <= B)")
        return list(range(lo_i, hi_i + 1))
    try:
        return [int(text)]
    except ValueError:
        raise ConfigError(f"bad seed: {text!r}") from None


def _run_one(args, seed: int | None) -> dict:
    cfg = _assemble(args, seed)
    session = Session(cfg)
    drive(session, make_policy(cfg.raw["human_policy"]))
    if args.out:
        out = Path(args.out.replace("{seed}", str(cfg.seed)))
        out.parent.mkdir(parents=True, exist_ok=True)
        session.log.write(out)
    metrics = finalize_metrics(session.log).to_dict()
    metrics["seed"] = cfg.seed
    metrics["end_reason"] = session.end_reason
    return metrics


def _cmd_run(args) -> int:
    seeds = _parse_seeds(args.seed)
    if seeds is None or len(seeds) == 1:
        metrics = _run_one(args, seeds[0] if seeds else None)
        print(canonical_json(metrics))
        return 0
    if args.out and "{seed}" not in args.out:
        raise ConfigError("sweep --out needs a {seed} placeholder")
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            results = pool.starmap(_run_one, [(args, s) for s in seeds])
    else:
        results = [_run_one(args, s) for s in seeds]
    for metrics in results:
        print(canonical_json(metrics))
    return 0


def _cmd_verify(args) -> int:
    log = read_log(args.log)
    cfg_dict = _load_overrides(args.config)
    cfg = SimConfig.from_dict(cfg_dict)
    try:
        verify_replay(log, cfg)
    except ReplayDivergenceError as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 1
    print(f"replay OK: {len(log.entries)} entries, end tick {log.end_tick()}")
    return 0


def _cmd_metrics(args) -> int:
    log = read_log(args.log)
    print(canonical_json(finalize_metrics(log).to_dict()))
    return 0


def _cmd_maps(args) -> int:
    failures = 0
    if args.paths:
        texts = []
        for path in args.paths:
            p = Path(path)
            if not p.is_file():
                print(f"{path}: no such file", file=sys.stderr)
                failures += 1
                continue
            texts.append((path, p.read_text()))
    else:
        texts = [
            (name, resources.files("hrisim").joinpath(f"data/maps/{name}").read_text())
            for name in SHIPPED_MAPS
        ]
    for name, text in texts:
        try:
            grid = parse_map(text, inflation_radius=0.25)
        except MapFormatError as exc:
            print(f"{name}: INVALID: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(
            f"{name}: {grid.width * grid.resolution:g} x "
            f"{grid.height * grid.resolution:g} m, "
            f"base={'yes' if grid.base else 'no'}, "
            f"rooms={len(grid.room_centers)}, slots={len(grid.gem_slots)}"
        )
    return 1 if failures else 0


def _cmd_serve(args) -> int:
    import os

    import uvicorn

    if args.log_dir:
        os.environ["HAVEN_LOG_DIR"] = args.log_dir
    if args.static_dir:
        os.environ["HAVEN_STATIC_DIR"] = args.static_dir
    from .server import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "verify": _cmd_verify,
        "metrics": _cmd_metrics,
        "maps": _cmd_maps,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, MapFormatError, MalformedLogError, ConfigMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
