"""Deterministic fixed-timestep session loop: tick order, logging, replay.

Every tick runs the same eight phases in the same order: buffered input,
human step, battery watchdog, block arbitration (against the PREVIOUS
tick's visualization), scenario logic, motion, visualization recompute,
logging. That order is part of the determinism contract; replaying a log's
inputs through the same config reproduces every state hash bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import struct
from dataclasses import dataclass, replace

from .battery import (
    BatteryDecision,
    BatteryMode,
    charge_tick,
    check_at_waypoint,
    check_continuous,
    drain,
)
from .config import SimConfig
from .geometry import Pose2D
from .grid import DynamicObstacle
from .interaction import Action, Arbiter, HumanState, assess_block, clamp_input, step_human
from .motion import Mode, RobotState, current_target, select_mode, set_plan, step
from .planner import (
    NoDetourError,
    PathPlan,
    PlanningError,
    detour,
    dijkstra_field,
    plan_path,
)
from .scenario import make_scenario
from .triallog import TrialLog
from .viz import compute_viz

# conservative slack when reading path distance off the grid field: the
# robot sits at most half a cell diagonal from its cell center
FIELD_SLACK_FACTOR = math.sqrt(2.0) / 2.0


class TrialEndedError(RuntimeError):
    pass


class ConfigMismatchError(ValueError):
    pass


class ReplayDivergenceError(ValueError):
    def __init__(self, tick: int, detail: str):
        super().__init__(f"replay diverged at tick {tick}: {detail}")
        self.tick = tick


@dataclass
class DetourContext:
    origin_progress: float  # original-plan progress when the detour began
    branch: float
    rejoin: float


class Session:
    """One trial: config, grid, robot, human, scenario, arbiter, log."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.rng = random.Random(cfg.seed)
        self.scenario = make_scenario(cfg, self.rng)
        self.robot = RobotState(pose=self.scenario.robot_spawn, battery=cfg.make_battery())
        inter = cfg.raw["interaction"]
        self.human = HumanState(
            pose=self.scenario.human_spawn,
            radius=inter["human_radius"],
            speed=inter["human_speed"],
        )
        self.arbiter = Arbiter(latch_ticks=inter["latch_ticks"])

        self.tick_count = 0
        self.ended = False
        self.end_reason: str | None = None
        self.pending_input: tuple[float, float] | None = None
        self.detour_ctx: DetourContext | None = None
        self.returning = False
        self.stranded = False
        self.wait_reason: str | None = None
        self._force_wait = False
        self._events: list[tuple[str, dict]] = []

        self.dist_robot = 0.0
        self.dist_human = 0.0
        self.min_separation = self.robot.pose.distance_to(self.human.position)
        self.wait_ticks = 0
        self.reroute_count = 0
        self.battery_trips = 0
        self.gems_timeline: list[tuple[int, int, str]] = []

        batt = self.robot.battery
        self._base_field = None
        if batt.mode is BatteryMode.CONTINUOUS and batt.base is not None:
            self._base_field = dijkstra_field(self.grid, batt.base)

        self.log = TrialLog.new(cfg.config_hash, cfg.map_hash, cfg.dt)
        self.viz = self._compute_viz()

    # -- plumbing used by scenarios and the server ---------------------------

    @property
    def charging(self) -> bool:
        return self.robot.battery.charging

    @property
    def charge_locked(self) -> bool:
        return self.charging or self.returning or self.stranded

    @property
    def waiting(self) -> bool:
        return self.robot.mode is Mode.WAITING

    @property
    def dt(self) -> float:
        return self.cfg.dt

    def emit(self, kind: str, **data) -> None:
        self._events.append((kind, data))
        if kind == "Detour":
            self.reroute_count += 1
        elif kind == "GoCharge":
            self.battery_trips += 1
        elif kind == "GemCollected":
            self.gems_timeline.append((self.tick_count, data["gem"], data["collector"]))

    def hold(self, reason: str) -> None:
        """Scenario request: stand still this tick."""
        self._force_wait = True
        if self.wait_reason is None:
            self.wait_reason = reason

    def queue_input(self, move: tuple[float, float]) -> None:
        """Buffer a movement vector; applied at the start of the next tick."""
        self.pending_input = clamp_input(move)

    def _queue_exact(self, move: tuple[float, float]) -> None:
        # replay path: logged inputs were already clamped at live time
        self.pending_input = (move[0], move[1])

    def install_plan(self, plan: PathPlan) -> None:
        set_plan(self.robot, plan)
        self.detour_ctx = None

    def begin_leg(self, dest: tuple[float, float]) -> bool:
        """Plan to the next destination, unless the battery says charge first."""
        plan = plan_path(self.grid, self.robot.pose, dest, params=self.cfg.planner)
        if not self.battery_gate(dest, plan):
            return False
        self.install_plan(plan)
        return True

    def battery_gate(self, dest: tuple[float, float], leg_plan: PathPlan) -> bool:
        """At-waypoint battery check for an already-planned leg; True means
        proceed, False means a charge trip was started instead."""
        batt = self.robot.battery
        if batt.mode is not BatteryMode.AT_WAYPOINT or batt.charging or batt.base is None:
            return True
        dest = (dest[0], dest[1])
        if leg_plan.primitives:
            end_heading = leg_plan.primitives[-1].end_heading
        else:
            end_heading = self.robot.pose.heading
        try:
            home = plan_path(
                self.grid, Pose2D(dest[0], dest[1], end_heading), batt.base,
                params=self.cfg.planner,
            ).total_length
        except PlanningError:
            home = None
        lengths = {
            (self.robot.pose.position, dest): leg_plan.total_length,
            (dest, batt.base): home,
        }
        decision = check_at_waypoint(
            batt, self.robot.pose.position, dest,
            lambda a, b: lengths.get(((a[0], a[1]), (b[0], b[1]))),
        )
        if decision is BatteryDecision.GO_CHARGE:
            self._start_charge_trip("waypoint")
            return False
        return True

    def _start_charge_trip(self, trigger: str) -> None:
        plan = plan_path(
            self.grid, self.robot.pose, self.robot.battery.base, params=self.cfg.planner
        )
        self.install_plan(plan)
        self.emit("GoCharge", trigger=trigger)
        if plan.empty:
            # already parked on the dock point; nothing to drive
            self.robot.battery.charging = True
        else:
            self.returning = True

    def _dist_to_base(self, point: tuple[float, float]) -> float | None:
        if self._base_field is None:
            return None
        cell = self.grid.cell_of(point)
        if not self.grid.in_bounds(cell):
            return None
        value = self._base_field[cell]
        if not math.isfinite(value):
            return None
        return value + FIELD_SLACK_FACTOR * self.grid.resolution

    # -- the tick ------------------------------------------------------------

    def tick(self) -> None:
        if self.ended:
            raise TrialEndedError("trial already ended")
        t = self.tick_count
        cfg = self.cfg
        robot, human = self.robot, self.human
        self.wait_reason = None
        self._force_wait = False
        prev_mode = robot.mode
        prev_signal = self.viz.signal.direction

        # (1) buffered input
        if self.pending_input is not None:
            human.input = self.pending_input
            self.log.append_input(t, self.pending_input)
            self.pending_input = None

        # (2) human motion
        before = human.position
        step_human(human, self.grid, cfg.dt)
        self.dist_human += math.dist(before, human.position)

        # (3) battery watchdog
        batt = robot.battery
        if batt.mode is BatteryMode.CONTINUOUS and not self.charge_locked:
            decision = check_continuous(batt, robot.pose.position, self._dist_to_base)
            if decision is BatteryDecision.ABANDON_AND_CHARGE:
                self._start_charge_trip("continuous")

        # (4) block arbitration against the previous tick's markers
        if current_target(robot) is not None and cfg.raw["viz"]["steps_to_project"] > 0:
            self._arbitrate()
        elif self.arbiter.waiting:
            self.arbiter.waiting = False

        # (5) scenario logic (may replan)
        self.scenario.tick(self)

        # (6) motion
        self._step_motion()

        # (7) visualization recompute
        self.viz = self._compute_viz()

        # (8) logging
        for kind, data in self._events:
            self.log.append_event(t, kind, data)
        self._events = []
        if robot.mode is not prev_mode:
            self.log.append_event(
                t, "ModeChange", {"from": prev_mode.value, "to": robot.mode.value}
            )
        if robot.mode is Mode.WAITING and prev_mode is not Mode.WAITING:
            self.log.append_event(t, "Wait", {"reason": self.wait_reason or "human"})
        signal = self.viz.signal.direction
        if signal is not prev_signal:
            self.log.append_event(t, "Signal", {"direction": signal.value})
        sep = robot.pose.distance_to(human.position)
        self.min_separation = min(self.min_separation, sep)
        if robot.mode is Mode.WAITING:
            self.wait_ticks += 1
        self.log.append_hash(
            t, self.state_hash(), robot.mode.value, sep, self.dist_robot, self.dist_human
        )
        if self.scenario.complete:
            self._end_trial(t, "goal_met")
        elif t + 1 >= cfg.tick_budget:
            self._end_trial(t, "budget")
        self.tick_count = t + 1

    def _arbitrate(self) -> None:
        cfg = self.cfg
        robot, human = self.robot, self.human
        inter = cfg.raw["interaction"]
        active_markers = [m for m in self.viz.markers if not m.dimmed]
        active = assess_block(
            active_markers, robot.pose.position, robot.plan.goal, human,
            block_radius=inter["block_radius"], wait_distance=inter["wait_distance"],
        )
        original = None
        before_branch = False
        if self.detour_ctx is not None and robot.original_plan is not None:
            original_markers = [
                replace(m, dimmed=False) for m in self.viz.markers if m.dimmed
            ]
            original = assess_block(
                original_markers, robot.pose.position, robot.original_plan.goal, human,
                block_radius=inter["block_radius"], wait_distance=inter["wait_distance"],
            )
            before_branch = self._original_progress() < self.detour_ctx.branch
        action = self.arbiter.decide(
            active, original, self.detour_ctx is not None, before_branch
        )
        if action is Action.WAIT:
            self._force_wait = True
            if self.wait_reason is None:
                self.wait_reason = "human"
        elif action is Action.DETOUR:
            self._try_detour()
        elif action is Action.REVERT:
            self._revert()

    def _original_progress(self) -> float:
        return self.detour_ctx.origin_progress + self.robot.plan_progress

    def _try_detour(self) -> None:
        robot = self.robot
        if self.detour_ctx is not None and robot.original_plan is not None:
            base_plan = robot.original_plan
            base_progress = self._original_progress()
        else:
            base_plan = robot.plan
            base_progress = robot.plan_progress
        try:
            dplan, branch, rejoin = detour(
                base_plan, self.grid, robot.pose,
                DynamicObstacle(self.human.position, self.human.radius),
                progress=base_progress, params=self.cfg.planner,
            )
        except (NoDetourError, PlanningError):
            self.arbiter.note_detour_failed()
            self._force_wait = True
            if self.wait_reason is None:
                self.wait_reason = "no-detour"
            return
        set_plan(robot, dplan)
        robot.original_plan = base_plan
        self.detour_ctx = DetourContext(base_progress, branch, rejoin)
        self.emit("Detour", branch=branch, rejoin=rejoin)

    def _revert(self) -> None:
        robot = self.robot
        original = robot.original_plan
        progress = min(self._original_progress(), original.total_length)
        robot.plan = original
        robot.plan_progress = progress
        robot.target_index = original.index_at(progress)
        robot.near_aligned = False
        robot.original_plan = None
        self.detour_ctx = None
        self.emit("Revert", progress=progress)

    def _step_motion(self) -> None:
        cfg = self.cfg
        robot, human = self.robot, self.human
        batt = robot.battery
        if self.stranded:
            robot.mode = Mode.IDLE
            return
        if batt.charging:
            robot.mode = Mode.CHARGING
            charge_tick(batt, batt.at_base(robot.pose.position), cfg.dt)
            return
        if self._force_wait:
            robot.mode = Mode.WAITING
            return

        robot.mode = select_mode(robot, cfg.motion)
        if robot.mode in (Mode.ARC_PURSUIT, Mode.FORWARD):
            inter = cfg.raw["interaction"]
            if robot.pose.distance_to(human.position) < inter["wait_distance"]:
                moved = cfg.motion.v_max * cfg.dt
                ahead = (
                    robot.pose.x + moved * math.cos(robot.pose.heading),
                    robot.pose.y + moved * math.sin(robot.pose.heading),
                )
                if math.dist(ahead, human.position) < inter["block_radius"]:
                    robot.mode = Mode.WAITING
                    if self.wait_reason is None:
                        self.wait_reason = "safety"
                    return
        outcome = step(robot, cfg.motion, cfg.dt)
        if outcome.moved:
            drain(batt, outcome.moved)
            self.dist_robot += outcome.moved
        if outcome.completed:
            self.detour_ctx = None
            robot.original_plan = None
            if self.returning and batt.at_base(robot.pose.position):
                batt.charging = True
                self.returning = False
        if (
            batt.mode is not BatteryMode.DISABLED
            and batt.depleted
            and not batt.at_base(robot.pose.position)
            and not self.stranded
        ):
            self.stranded = True
            self.returning = False
            set_plan(robot, PathPlan([], goal=robot.pose.position))
            self.detour_ctx = None
            self.emit("Stranded")

    def _compute_viz(self):
        original_progress = None
        if self.detour_ctx is not None and self.robot.original_plan is not None:
            original_progress = self._original_progress()
        v = self.cfg.raw["viz"]
        return compute_viz(
            self.robot, self.cfg.motion, self.human.position,
            self.scenario.status_message(self),
            spacing=v["spacing"], steps_to_project=v["steps_to_project"],
            original_progress=original_progress, bubble_radius=v["bubble_radius"],
        )

    def _end_trial(self, tick: int, reason: str) -> None:
        self.ended = True
        self.end_reason = reason
        self.log.append_event(
            tick, "TrialEnd",
            {"reason": reason, "did_not_finish": not self.scenario.complete},
        )

    def end_trial_now(self, reason: str = "disconnect") -> None:
        """External termination (participant disconnect); closes the log."""
        if self.ended:
            return
        self._end_trial(max(self.tick_count - 1, 0), reason)

    # -- observation ----------------------------------------------------------

    def state_hash(self) -> str:
        h = hashlib.blake2b(digest_size=8)

        def f(x: float) -> None:
            h.update(struct.pack("<d", x))

        def i(x: int) -> None:
            h.update(struct.pack("<q", x))

        robot, human, batt = self.robot, self.human, self.robot.battery
        f(robot.pose.x)
        f(robot.pose.y)
        f(robot.pose.heading)
        f(robot.plan_progress)
        i(robot.target_index)
        i(int(robot.near_aligned))
        i(list(Mode).index(robot.mode))
        f(batt.remaining_range)
        f(batt.capacity)
        i(list(BatteryMode).index(batt.mode))
        i(int(batt.charging))
        f(human.pose.x)
        f(human.pose.y)
        f(human.pose.heading)
        f(human.input[0])
        f(human.input[1])
        i(int(self.returning))
        i(int(self.stranded))
        i(int(self.detour_ctx is not None))
        ctx = self.detour_ctx
        f(ctx.origin_progress if ctx else 0.0)
        f(ctx.branch if ctx else 0.0)
        f(ctx.rejoin if ctx else 0.0)
        i(self.arbiter.cooldown)
        i(int(self.arbiter.waiting))
        for value in self.scenario.hash_fields():
            if isinstance(value, float):
                f(value)
            else:
                i(int(value))
        return h.hexdigest()

    def metrics_so_far(self) -> dict:
        return {
            "completion_time": self.tick_count * self.cfg.dt,
            "min_separation": self.min_separation,
            "reroute_count": self.reroute_count,
            "wait_time": self.wait_ticks * self.cfg.dt,
            "battery_trips": self.battery_trips,
            "distance_robot": self.dist_robot,
            "distance_human": self.dist_human,
            "gems_timeline": [list(g) for g in self.gems_timeline],
        }

    def snapshot(self) -> dict:
        v = self.viz
        robot, human = self.robot, self.human
        return {
            "tick": self.tick_count,
            "robot": {
                "pose": [robot.pose.x, robot.pose.y, robot.pose.heading],
                "mode": robot.mode.value,
                "battery": robot.battery.fraction,
            },
            "human": {"pose": [human.pose.x, human.pose.y, human.pose.heading]},
            "viz": {
                "markers": [
                    {"pos": [m.position[0], m.position[1]], "kind": m.kind.value,
                     "dimmed": m.dimmed}
                    for m in v.markers
                ],
                "signal": v.signal.direction.value,
                "bubble": {"visible": v.bubble.visible, "message": v.bubble.message},
                "battery": v.battery.fraction,
            },
            "gems": self.scenario.snapshot_extra().get("gems", []),
            "scenario": self.scenario.snapshot_extra(),
            "metrics": self.metrics_so_far(),
        }

    def run(self, ticks: int | None = None, inputs: dict[int, tuple[float, float]] | None = None) -> None:
        """Run until the trial ends (or for a tick count); inputs are applied
        at exactly the ticks given."""
        while not self.ended:
            if ticks is not None and self.tick_count >= ticks:
                break
            if inputs is not None and self.tick_count in inputs:
                self.queue_input(inputs[self.tick_count])
            self.tick()


def replay(log: TrialLog, cfg: SimConfig) -> TrialLog:
    """Re-simulate a recorded trial from its inputs; the emitted log must be
    bit-identical to the recorded one."""
    if log.header["config_hash"] != cfg.config_hash:
        raise ConfigMismatchError(
            f"log was recorded under config {log.header['config_hash']}, "
            f"not {cfg.config_hash}"
        )
    if log.header["map_hash"] != cfg.map_hash:
        raise ConfigMismatchError("map hash mismatch between log and config")
    session = Session(cfg)
    inputs = log.inputs()
    end = log.end_tick()
    while not session.ended and session.tick_count <= end:
        t = session.tick_count
        if t in inputs:
            session._queue_exact(inputs[t])
        session.tick()
    if not session.ended:
        # the recorded trial was cut short externally; close the same way
        session.end_trial_now(log.events("TrialEnd")[0]["data"]["reason"])
    return session.log


def verify_replay(log: TrialLog, cfg: SimConfig) -> None:
    """Raises ReplayDivergenceError naming the first divergent tick."""
    fresh = replay(log, cfg)
    old_lines, new_lines = log.lines(), fresh.lines()
    for idx in range(max(len(old_lines), len(new_lines))):
        a = old_lines[idx] if idx < len(old_lines) else None
        b = new_lines[idx] if idx < len(new_lines) else None
        if a != b:
            tick = -1
            for line in (a, b):
                if line is not None:
                    try:
                        tick = json.loads(line).get("tick", -1)
                        break
                    except ValueError:
                        pass
            raise ReplayDivergenceError(tick, f"line {idx + 1} differs")
