"""The two study scenarios as goal state machines, plus trial metrics.

Hallway passing: the robot tours every room center along hallway
centerlines, shifting laterally when the human blocks the lane ahead; hard
mode gates progress on obstructions the human clears by visiting rooms.
Gem retrieval: robot and human each own half the gems in a shared room; the
robot drives to its nearest-by-path gem, the human collects theirs by
dwelling in them.

Scenarios talk to the session through a narrow surface: install_plan /
begin_leg for motion, emit for events, scenario_wait to hold position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import ConfigError, SimConfig
from .geometry import Pose2D
from .motion import current_target
from .planner import PathPlan, PlanningError, plan_path, add_waypoint_chain
from .triallog import TrialLog

HUMAN_ROOM_TOLERANCE = 0.3  # human "reaches" a room center within this
OBSTRUCTION_ON_PATH = 0.3  # obstruction counts as on-path within this of it
PATH_PROBE_STEP = 0.05
UNREACHABLE_RETRY_TICKS = 50

# Default spawn offset that puts the human inside a room but clear of the
# centerlines joining room centers (block radius is 0.6).
HUMAN_SPAWN_OFFSET = (1.0, 0.7)


def loop_order(centers: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Room centers sorted counterclockwise around their centroid, so
    consecutive entries are hallway neighbors on loop-shaped maps."""
    if len(centers) <= 2:
        return list(centers)
    cx = sum(p[0] for p in centers) / len(centers)
    cy = sum(p[1] for p in centers) / len(centers)
    return sorted(centers, key=lambda p: (math.atan2(p[1] - cy, p[0] - cx), p))


def _free_point_near(grid, anchor: tuple[float, float]) -> tuple[float, float]:
    for dx, dy in (HUMAN_SPAWN_OFFSET, (-1.0, 0.7), (1.0, -0.7), (-1.0, -0.7), (0.0, 0.0)):
        p = (anchor[0] + dx, anchor[1] + dy)
        if not grid.is_blocked(p):
            return p
    return anchor


@dataclass
class Obstruction:
    index: int
    pos: tuple[float, float]
    gate_center: tuple[float, float]
    removed: bool = False


class HallwayScenario:
    kind = "hallway"

    def __init__(self, cfg: SimConfig, rng):
        params = cfg.raw["hallway"]
        grid = cfg.grid
        if not grid.room_centers:
            raise ConfigError("hallway scenario needs at least one room center")
        self.loop = loop_order(grid.room_centers)
        n = len(self.loop)

        if params["robot_spawn"] is not None:
            spawn_idx = int(params["robot_spawn"])
            if not 0 <= spawn_idx < n:
                raise ConfigError(f"robot_spawn index out of range: {spawn_idx}")
        else:
            spawn_idx = rng.randrange(n)

        if n >= 2:
            robot_pos = self.loop[spawn_idx]
            self.itinerary = [self.loop[(spawn_idx + k) % n] for k in range(1, n)]
        else:
            # single room: start at the base if the map has one, else done
            robot_pos = grid.base if grid.base is not None else self.loop[0]
            self.itinerary = [self.loop[0]] if grid.base is not None else []

        if params["human_spawn"] is not None:
            human_pos = tuple(params["human_spawn"])
        elif n >= 2:
            others = [j for j in range(n) if j != spawn_idx]
            human_pos = _free_point_near(grid, self.loop[others[rng.randrange(len(others))]])
        else:
            human_pos = _free_point_near(grid, self.loop[0])

        heading = 0.0
        if self.itinerary:
            nxt = self.itinerary[0]
            heading = math.atan2(nxt[1] - robot_pos[1], nxt[0] - robot_pos[0])
        self.robot_spawn = Pose2D(robot_pos[0], robot_pos[1], heading)
        self.human_spawn = Pose2D(human_pos[0], human_pos[1], 0.0)

        self.hard_mode = bool(params["hard_mode"])
        self.obstructions: list[Obstruction] = []
        for i, ob in enumerate(params["obstructions"]):
            room = int(ob["room"])
            if not 0 <= room < len(grid.room_centers):
                raise ConfigError(f"obstruction {i}: room index out of range")
            self.obstructions.append(
                Obstruction(i, tuple(ob["pos"]), grid.room_centers[room])
            )

        self.lateral_shift = params["lateral_shift"]
        self.lookahead = params["lookahead"]
        self.ptr = 0
        self.complete = not self.itinerary
        self.avoid_active = False
        self.avoid_anchor = (0.0, 0.0)
        self.gems: list = []

    # -- per-tick logic ----------------------------------------------------

    def tick(self, session) -> None:
        robot, human = session.robot, session.human

        if self.hard_mode:
            for ob in self.obstructions:
                if not ob.removed and math.dist(human.position, ob.gate_center) <= HUMAN_ROOM_TOLERANCE:
                    ob.removed = True
                    session.emit("ObstructionRemoved", index=ob.index, pos=list(ob.pos))

        if self.complete or session.charge_locked:
            return

        tol = session.cfg.motion.arrive_tolerance
        if current_target(robot) is None:
            if self.ptr < len(self.itinerary) and robot.pose.distance_to(self.itinerary[self.ptr]) <= tol:
                self.ptr += 1
                self.avoid_active = False
            if self.ptr >= len(self.itinerary):
                self.complete = True
                return
            session.begin_leg(self.itinerary[self.ptr])
            return

        if self.hard_mode and self._gated(session):
            session.hold("obstruction")
            return

        blocked = self._lane_block(session)
        if blocked is None:
            self.avoid_active = False
            return
        if self.avoid_active and math.dist(human.position, self.avoid_anchor) <= 0.3:
            return
        self._shift_lane(session, *blocked)

    def _gated(self, session) -> bool:
        """An unremoved obstruction on the remaining path, within wait range."""
        robot = session.robot
        wait_d = session.cfg.raw["interaction"]["wait_distance"]
        for ob in self.obstructions:
            if ob.removed or robot.pose.distance_to(ob.pos) > wait_d:
                continue
            s = robot.plan_progress
            end = min(robot.plan.total_length, s + self.lookahead)
            while s <= end:
                if math.dist(robot.plan.point_at(s), ob.pos) <= OBSTRUCTION_ON_PATH:
                    return True
                s += PATH_PROBE_STEP
        return False

    def _lane_block(self, session):
        """First point of the path ahead (within lookahead) that the human
        sits on; returns (arclength, point, tangent) or None."""
        robot, human = session.robot, session.human
        block_r = session.cfg.raw["interaction"]["block_radius"]
        plan = robot.plan
        s = robot.plan_progress
        end = min(plan.total_length, s + self.lookahead)
        while s <= end:
            p = plan.point_at(s)
            if math.dist(p, human.position) <= block_r:
                lo = max(0.0, s - 0.025)
                hi = min(plan.total_length, s + 0.025)
                a, b = plan.point_at(lo), plan.point_at(hi)
                norm = math.dist(a, b)
                if norm <= 1e-9:
                    return None
                tangent = ((b[0] - a[0]) / norm, (b[1] - a[1]) / norm)
                return s, p, tangent
            s += PATH_PROBE_STEP
        return None

    def _clearance(self, grid, origin, direction, cap=3.0) -> float:
        k = 1
        while k * PATH_PROBE_STEP <= cap:
            p = (origin[0] + k * PATH_PROBE_STEP * direction[0],
                 origin[1] + k * PATH_PROBE_STEP * direction[1])
            if grid.is_blocked(p):
                return k * PATH_PROBE_STEP
            k += 1
        return cap

    def _shift_lane(self, session, s, p_at, tangent) -> None:
        """Replan through a laterally shifted waypoint on the side with the
        wider human-to-wall gap; ties go left."""
        grid, human = session.grid, session.human
        left = (-tangent[1], tangent[0])
        lat_h = (human.position[0] - p_at[0]) * left[0] + (human.position[1] - p_at[1]) * left[1]
        gap_left = self._clearance(grid, p_at, left) - lat_h
        gap_right = self._clearance(grid, p_at, (-left[0], -left[1])) + lat_h
        side = 1.0 if gap_left >= gap_right - 1e-9 else -1.0

        delta = self.lateral_shift
        waypoint = None
        while delta >= 0.05:
            w = (p_at[0] + side * delta * left[0], p_at[1] + side * delta * left[1])
            if not grid.is_blocked(w):
                waypoint = w
                break
            delta -= 0.05
        if waypoint is None:
            return
        goal = self.itinerary[self.ptr]
        try:
            plan = add_waypoint_chain(
                grid, session.robot.pose, [waypoint, goal], params=session.cfg.planner
            )
        except PlanningError:
            return
        session.install_plan(plan)
        self.avoid_active = True
        self.avoid_anchor = human.position

    # -- session-facing queries --------------------------------------------

    def status_message(self, session) -> str:
        if self.complete:
            return "All rooms visited"
        if session.stranded:
            return "Battery empty"
        if session.charging:
            return "Charging"
        if session.returning:
            return "Returning to charge"
        if session.wait_reason == "obstruction":
            return "Waiting for the way to clear"
        if session.waiting:
            return "Waiting for you to move"
        if self.ptr < len(self.itinerary):
            room = self.loop.index(self.itinerary[self.ptr]) + 1
            return f"Going to room {room}"
        return "All rooms visited"

    def hash_fields(self) -> list:
        out: list = [self.ptr, int(self.complete), int(self.avoid_active),
                     self.avoid_anchor[0], self.avoid_anchor[1]]
        out.extend(int(ob.removed) for ob in self.obstructions)
        return out

    def snapshot_extra(self) -> dict:
        return {
            "rooms": [list(p) for p in self.loop],
            "visited": self.ptr,
            "obstructions": [
                {"pos": list(ob.pos), "removed": ob.removed} for ob in self.obstructions
            ],
        }


@dataclass
class Gem:
    id: int
    position: tuple[float, float]
    owner: str  # "robot" (blue) or "human" (red)
    collect_radius: float = 0.4
    collected: bool = False
    dwell: float = 0.0


class RetrievalScenario:
    kind = "retrieval"

    def __init__(self, cfg: SimConfig, rng):
        params = cfg.raw["retrieval"]
        grid = cfg.grid
        if grid.base is None:
            raise ConfigError("retrieval scenario needs a base ('B') on the map")
        slots = list(enumerate(grid.gem_slots))
        if params["slots"] is not None:
            keep = set(params["slots"])
            slots = [(i, p) for i, p in slots if i in keep]
        if not slots:
            raise ConfigError("retrieval scenario needs at least one gem slot")

        robot_count = min(int(params["robot_gems"]), len(slots))
        robot_ids = set(rng.sample([i for i, _ in slots], robot_count))
        self.gems = [
            Gem(i, p, "robot" if i in robot_ids else "human", params["gem_radius"])
            for i, p in slots
        ]
        self.dwell_seconds = params["dwell_seconds"]

        anchor = grid.room_centers[0] if grid.room_centers else grid.base
        heading = math.atan2(anchor[1] - grid.base[1], anchor[0] - grid.base[0])
        self.robot_spawn = Pose2D(grid.base[0], grid.base[1], heading)
        human_pos = tuple(params["human_spawn"]) if params["human_spawn"] else anchor
        self.human_spawn = Pose2D(human_pos[0], human_pos[1], 0.0)

        self.target_id: int | None = None
        self.retry_at = 0
        self.complete = False

    def tick(self, session) -> None:
        robot, human = session.robot, session.human
        dt = session.cfg.dt

        for gem in self.gems:
            if gem.owner != "human" or gem.collected:
                continue
            if math.dist(human.position, gem.position) <= gem.collect_radius:
                gem.dwell += dt
                if gem.dwell + 1e-12 >= self.dwell_seconds:
                    gem.collected = True
                    session.emit("GemCollected", gem=gem.id, collector="human")
            else:
                gem.dwell = 0.0

        if self._all_collected():
            self.complete = True
            return
        if session.charge_locked:
            return

        if self.target_id is not None and current_target(robot) is None:
            gem = self.gems[self._gem_index(self.target_id)]
            if not gem.collected and robot.pose.distance_to(gem.position) <= session.cfg.motion.arrive_tolerance:
                gem.collected = True
                session.emit("GemCollected", gem=gem.id, collector="robot")
            self.target_id = None
            if self._all_collected():
                self.complete = True
                return

        if self.target_id is None and current_target(robot) is None:
            self._pick_next(session)

    def _gem_index(self, gem_id: int) -> int:
        for i, gem in enumerate(self.gems):
            if gem.id == gem_id:
                return i
        raise KeyError(gem_id)

    def _all_collected(self) -> bool:
        return all(g.collected for g in self.gems)

    def _pick_next(self, session) -> None:
        """Nearest uncollected robot gem by planned path length, lowest id on
        ties; unreachable gems are skipped (retried later if none work)."""
        if session.tick_count < self.retry_at:
            session.hold("no-path")
            return
        best: tuple[Gem, PathPlan] | None = None
        pending = False
        for gem in self.gems:
            if gem.owner != "robot" or gem.collected:
                continue
            pending = True
            try:
                plan = plan_path(
                    session.grid, session.robot.pose, gem.position, params=session.cfg.planner
                )
            except PlanningError:
                continue
            if best is None or plan.total_length < best[1].total_length:
                best = (gem, plan)
        if best is None:
            if pending:
                self.retry_at = session.tick_count + UNREACHABLE_RETRY_TICKS
                session.hold("no-path")
            return
        gem, plan = best
        if not session.battery_gate(gem.position, plan):
            return
        session.install_plan(plan)
        self.target_id = gem.id

    def status_message(self, session) -> str:
        if self.complete:
            return "All gems collected"
        if session.stranded:
            return "Battery empty"
        if session.charging:
            return "Charging"
        if session.returning:
            return "Returning to charge"
        if session.waiting:
            return "Waiting for you to move"
        if self.target_id is not None:
            return f"Collecting gem {self.target_id}"
        return "Choosing a gem"

    def hash_fields(self) -> list:
        out: list = [self.target_id if self.target_id is not None else -1,
                     int(self.complete), self.retry_at]
        for gem in self.gems:
            out.append(int(gem.collected))
            out.append(gem.dwell)
        return out

    def snapshot_extra(self) -> dict:
        return {
            "gems": [
                {
                    "id": g.id,
                    "pos": list(g.position),
                    "owner": g.owner,
                    "collected": g.collected,
                }
                for g in self.gems
            ]
        }


def make_scenario(cfg: SimConfig, rng):
    if cfg.scenario_kind == "hallway":
        return HallwayScenario(cfg, rng)
    if cfg.scenario_kind == "retrieval":
        return RetrievalScenario(cfg, rng)
    raise ConfigError(f"unknown scenario: {cfg.scenario_kind!r}")


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class TrialMetrics:
    completion_time: float
    min_separation: float
    reroute_count: int
    wait_time: float
    battery_trips: int
    distance_robot: float
    distance_human: float
    gems_timeline: tuple = ()

    def to_dict(self) -> dict:
        return {
            "completion_time": self.completion_time,
            "min_separation": self.min_separation,
            "reroute_count": self.reroute_count,
            "wait_time": self.wait_time,
            "battery_trips": self.battery_trips,
            "distance_robot": self.distance_robot,
            "distance_human": self.distance_human,
            "gems_timeline": [list(g) for g in self.gems_timeline],
        }


def finalize_metrics(log: TrialLog) -> TrialMetrics:
    """Metrics as a pure function of the log; replaying a trial and
    re-finalizing gives the identical values."""
    log.validate()
    dt = log.header["dt"]
    min_sep = math.inf
    wait_ticks = 0
    dr = dh = 0.0
    detours = trips = 0
    timeline = []
    end_tick = 0
    for e in log.entries:
        if e["kind"] == "Hash":
            min_sep = min(min_sep, e["sep"])
            if e["mode"] == "Waiting":
                wait_ticks += 1
            dr, dh = e["dr"], e["dh"]
        elif e["kind"] == "Event":
            ev = e["event"]
            if ev == "Detour":
                detours += 1
            elif ev == "GoCharge":
                trips += 1
            elif ev == "GemCollected":
                timeline.append((e["tick"], e["data"]["gem"], e["data"]["collector"]))
            elif ev == "TrialEnd":
                end_tick = e["tick"]
    return TrialMetrics(
        completion_time=(end_tick + 1) * dt,
        min_separation=min_sep if math.isfinite(min_sep) else 0.0,
        reroute_count=detours,
        wait_time=wait_ticks * dt,
        battery_trips=trips,
        distance_robot=dr,
        distance_human=dh,
        gems_timeline=tuple(timeline),
    )
