"""Human avatar kinematics and the blocked-path protocol.

The human is a holonomic disc driven by a unit-clamped input vector with
axis-separated wall sliding. Each tick the engine assesses whether the human
sits on the robot's visible path projection and arbitrates between
continuing, waiting, detouring, and reverting to the retained original plan.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .geometry import Pose2D
from .grid import NavGrid
from .viz import PathMarker

HUMAN_RADIUS = 0.3
HUMAN_SPEED = 1.2
BLOCK_RADIUS = 0.6  # human radius + clearance
WAIT_DISTANCE = 1.0
DECISION_LATCH_TICKS = 25  # 0.5 s at 50 Hz; guards detour/revert flapping


@dataclass
class HumanState:
    pose: Pose2D
    radius: float = HUMAN_RADIUS
    speed: float = HUMAN_SPEED
    input: tuple[float, float] = (0.0, 0.0)

    @property
    def position(self) -> tuple[float, float]:
        return self.pose.position


def clamp_input(vec: tuple[float, float]) -> tuple[float, float]:
    x, y = float(vec[0]), float(vec[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        return (0.0, 0.0)
    mag = math.hypot(x, y)
    if mag > 1.0:
        return (x / mag, y / mag)
    return (x, y)


def step_human(state: HumanState, grid: NavGrid, dt: float) -> HumanState:
    """Translate by input * speed * dt, resolving collisions per axis so the
    human slides along walls instead of sticking to them."""
    ix, iy = clamp_input(state.input)
    if ix == 0.0 and iy == 0.0:
        return state
    dx = ix * state.speed * dt
    dy = iy * state.speed * dt
    x, y = state.pose.x, state.pose.y
    if dx != 0.0 and not grid.is_blocked((x + dx, y)):
        x += dx
    if dy != 0.0 and not grid.is_blocked((x, y + dy)):
        y += dy
    heading = math.atan2(iy, ix)
    state.pose = Pose2D(x, y, heading)
    return state


@dataclass(frozen=True)
class BlockAssessment:
    blocked: bool
    near_robot: bool
    near_destination: bool
    first_blocked_marker: int | None = None


def assess_block(
    markers: list[PathMarker],
    robot_pos: tuple[float, float],
    plan_goal: tuple[float, float] | None,
    human: HumanState,
    block_radius: float = BLOCK_RADIUS,
    wait_distance: float = WAIT_DISTANCE,
) -> BlockAssessment:
    """Does the human sit on the visible projection, and are they close to
    the robot or its destination? Dimmed (superseded) markers don't count."""
    pos = human.position
    first = None
    for marker in markers:
        if marker.dimmed:
            continue
        if math.dist(marker.position, pos) <= block_radius:
            first = marker.index
            break
    near_robot = math.dist(robot_pos, pos) < wait_distance
    near_dest = plan_goal is not None and math.dist(plan_goal, pos) < wait_distance
    return BlockAssessment(
        blocked=first is not None,
        near_robot=near_robot,
        near_destination=near_dest,
        first_blocked_marker=first,
    )


class Action(enum.Enum):
    CONTINUE = "Continue"
    DETOUR = "Detour"
    WAIT = "Wait"
    REVERT = "Revert"
    RESUME = "Resume"


@dataclass
class Arbiter:
    """Per-session decision state: the waiting flag and the anti-flap latch.

    A Detour or Revert arms the latch; while it runs, those two decisions are
    suppressed (a block during the window waits instead), so a stationary
    human can never make the robot alternate plans tick over tick.
    """

    latch_ticks: int = DECISION_LATCH_TICKS
    cooldown: int = 0
    waiting: bool = False

    def decide(
        self,
        active: BlockAssessment,
        original: BlockAssessment | None,
        detour_active: bool,
        before_branch: bool,
    ) -> Action:
        if self.cooldown > 0:
            self.cooldown -= 1
        if self.waiting:
            if active.blocked:
                return Action.WAIT
            self.waiting = False
            return Action.RESUME
        if active.blocked:
            if active.near_robot or active.near_destination:
                self.waiting = True
                return Action.WAIT
            if self.cooldown > 0:
                self.waiting = True
                return Action.WAIT
            self.cooldown = self.latch_ticks
            return Action.DETOUR
        if (
            detour_active
            and original is not None
            and not original.blocked
            and before_branch
            and self.cooldown == 0
        ):
            self.cooldown = self.latch_ticks
            return Action.REVERT
        return Action.CONTINUE

    def note_detour_failed(self) -> None:
        """Planner found no way around: hold position instead."""
        self.cooldown = 0
        self.waiting = True
