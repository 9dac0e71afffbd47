"""Scripted stand-ins for the human participant.

Each policy maps the public snapshot (plus its tick) to a movement vector,
exactly the way a live participant's input would arrive: queued one tick
ahead, clamped to the unit disk. None of them carry hidden randomness, so a
trial driven by a policy is as reproducible as its config seed.
"""

from __future__ import annotations

import math

from .config import ConfigError

ARRIVE_TOLERANCE = 0.1


def _toward(src: tuple[float, float], dst: tuple[float, float]) -> tuple[float, float]:
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    norm = math.hypot(dx, dy)
    if norm <= ARRIVE_TOLERANCE:
        return (0.0, 0.0)
    return (dx / norm, dy / norm)


def _human_position(snapshot: dict) -> tuple[float, float]:
    pose = snapshot["human"]["pose"]
    return (pose[0], pose[1])


class IdlePolicy:
    kind = "Idle"

    def move(self, snapshot: dict, tick: int) -> tuple[float, float]:
        return (0.0, 0.0)


class WaypointFollower:
    """Walks the configured points in order, then stands still."""

    kind = "WaypointFollower"

    def __init__(self, waypoints: list):
        self.points = [(float(p[0]), float(p[1])) for p in waypoints]
        self.cursor = 0

    def move(self, snapshot: dict, tick: int) -> tuple[float, float]:
        pos = _human_position(snapshot)
        while (
            self.cursor < len(self.points)
            and math.dist(pos, self.points[self.cursor]) <= ARRIVE_TOLERANCE
        ):
            self.cursor += 1
        if self.cursor >= len(self.points):
            return (0.0, 0.0)
        return _toward(pos, self.points[self.cursor])


class Blocker:
    """Minimal adversary: heads for the midpoint of whatever path the robot
    is currently projecting and parks there."""

    kind = "Blocker"

    def move(self, snapshot: dict, tick: int) -> tuple[float, float]:
        markers = [m for m in snapshot["viz"]["markers"] if not m["dimmed"]]
        if not markers:
            return (0.0, 0.0)
        mid = markers[(len(markers) - 1) // 2]["pos"]
        return _toward(_human_position(snapshot), (mid[0], mid[1]))


STAND_CLEAR_RADIUS = 2.5  # beyond the wait trigger and the projection window


class GreedyCollector:
    """Walks to the nearest of its own uncollected gems and dwells on it.

    Once its set is finished it stands clear of the robot instead of
    parking on the last gem; squatting inside wait_distance would hold the
    robot in Waiting forever and the trial would never complete."""

    kind = "GreedyCollector"

    def move(self, snapshot: dict, tick: int) -> tuple[float, float]:
        pos = _human_position(snapshot)
        best = None
        best_d = math.inf
        for gem in snapshot.get("gems", []):
            if gem["owner"] != "human" or gem["collected"]:
                continue
            d = math.dist(pos, (gem["pos"][0], gem["pos"][1]))
            if d < best_d:
                best, best_d = gem, d
        if best is None:
            robot = snapshot["robot"]["pose"]
            away = (pos[0] - robot[0], pos[1] - robot[1])
            gap = math.hypot(*away)
            if gap < 1e-9 or gap >= STAND_CLEAR_RADIUS:
                return (0.0, 0.0)
            return (away[0] / gap, away[1] / gap)
        return _toward(pos, (best["pos"][0], best["pos"][1]))


def make_policy(spec: dict):
    kind = spec.get("kind", "Idle")
    if kind == "Idle":
        return IdlePolicy()
    if kind == "WaypointFollower":
        return WaypointFollower(spec.get("waypoints") or [])
    if kind == "Blocker":
        return Blocker()
    if kind == "GreedyCollector":
        return GreedyCollector()
    raise ConfigError(f"unknown human policy: {kind!r}")


def drive(session, policy) -> None:
    """Run a session to completion with the policy supplying the human input."""
    while not session.ended:
        session.queue_input(policy.move(session.snapshot(), session.tick_count))
        session.tick()
