"""Trial configuration: JSON files with every default resolved at load time.

A loaded config is a complete, flat-hashable description of a trial; nothing
falls back to hidden defaults later. The config hash (blake2b-8 over
canonical JSON) goes into trial log headers so replays can refuse foreign
logs.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .battery import BatteryMode, BatteryState
from .grid import NavGrid, parse_map
from .motion import MotionParams
from .planner import PlannerParams

PROTOCOL_VERSION = "haven/1"

DEFAULTS: dict = {
    "scenario": "hallway",
    "map": "hallway.txt",
    "seed": 1,
    "dt": 0.02,
    "tick_budget": 9000,  # 3 simulated minutes at 50 Hz
    "motion": {
        "v_max": 0.65,
        "omega_max": 1.8,
        "angle_threshold": math.pi / 3,
        "near_distance": 0.3,
        "arrive_tolerance": 0.1,
        "signal_epsilon": 0.02,
    },
    "planner": {
        "inflation_radius": 0.25,
        "fillet_radius": 0.3,
        "min_fillet_radius": 0.05,
    },
    "battery": {
        "mode": "Disabled",
        "capacity": 60.0,
        "initial": 60.0,
        "margin": 0.5,
        "charge_rate": 6.0,
        "dock_radius": 0.3,
    },
    "viz": {
        "spacing": 0.25,
        "steps_to_project": 12,
        "bubble_radius": 3.0,
    },
    "interaction": {
        "block_radius": 0.6,
        "wait_distance": 1.0,
        "latch_ticks": 25,
        "human_speed": 1.2,
        "human_radius": 0.3,
    },
    "hallway": {
        "hard_mode": False,
        "lateral_shift": 0.7,
        "lookahead": 2.5,
        "obstructions": [],  # [{"pos": [x, y], "room": itinerary index}]
        "human_spawn": None,  # [x, y] override
        "robot_spawn": None,  # room-center index override
    },
    "retrieval": {
        "robot_gems": 5,
        "gem_radius": 0.4,
        "dwell_seconds": 1.5,
        "human_spawn": None,
        "slots": None,  # subset of slot ids to use; None = all
    },
    "human_policy": {"kind": "Idle", "waypoints": []},
}

SCENARIO_KINDS = ("hallway", "retrieval")
POLICY_KINDS = ("Idle", "WaypointFollower", "Blocker", "GreedyCollector")


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(overrides: dict | None = None) -> dict:
    """Full config dict with every default filled in."""
    cfg = _merge(DEFAULTS, overrides or {})
    if cfg["scenario"] not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario: {cfg['scenario']!r}")
    if cfg["human_policy"]["kind"] not in POLICY_KINDS:
        raise ConfigError(f"unknown human policy: {cfg['human_policy']['kind']!r}")
    if cfg["dt"] <= 0.0 or cfg["tick_budget"] <= 0:
        raise ConfigError("dt and tick_budget must be positive")
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return cfg


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve_config(data)


def shipped_config(name: str) -> dict:
    ref = resources.files("hrisim").joinpath(f"data/configs/{name}.json")
    if not ref.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return resolve_config(json.loads(ref.read_text()))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.blake2b(canonical_json(cfg).encode(), digest_size=8).hexdigest()


def map_text_hash(text: str) -> str:
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def resolve_map_text(name: str) -> str:
    """Filesystem path if it exists, else a shipped map of that name."""
    p = Path(name)
    if p.is_file():
        return p.read_text()
    ref = resources.files("hrisim").joinpath(f"data/maps/{name}")
    if ref.is_file():
        return ref.read_text()
    raise ConfigError(f"map not found: {name!r} (no such file or shipped map)")


@dataclass
class SimConfig:
    """Validated, object-form view of a resolved config dict."""

    raw: dict
    grid: NavGrid
    motion: MotionParams
    planner: PlannerParams
    config_hash: str
    map_hash: str

    @classmethod
    def from_dict(cls, cfg: dict) -> "SimConfig":
        cfg = resolve_config(cfg)
        map_text = resolve_map_text(cfg["map"])
        grid = parse_map(map_text, inflation_radius=cfg["planner"]["inflation_radius"])
        motion = MotionParams(**cfg["motion"])
        planner = PlannerParams(
            angle_threshold=cfg["motion"]["angle_threshold"],
            fillet_radius=cfg["planner"]["fillet_radius"],
            min_fillet_radius=cfg["planner"]["min_fillet_radius"],
        )
        return cls(
            raw=cfg,
            grid=grid,
            motion=motion,
            planner=planner,
            config_hash=config_hash(cfg),
            map_hash=map_text_hash(map_text),
        )

    @property
    def dt(self) -> float:
        return self.raw["dt"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def tick_budget(self) -> int:
        return self.raw["tick_budget"]

    @property
    def scenario_kind(self) -> str:
        return self.raw["scenario"]

    def make_battery(self) -> BatteryState:
        b = self.raw["battery"]
        return BatteryState(
            capacity=b["capacity"],
            remaining_range=min(b["initial"], b["capacity"]),
            mode=BatteryMode(b["mode"]),
            base=self.grid.base,
            margin=b["margin"],
            charge_rate=b["charge_rate"],
            dock_radius=b["dock_radius"],
        )
