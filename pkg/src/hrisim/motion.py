"""Robot motion controller: threshold-gated rotate-in-place vs. arc pursuit.

The controller aims at the endpoint of the current translational primitive.
Rotation primitives need no special casing: standing at one puts the full
turn into the aim angle, and the threshold rule rotates in place exactly
when the plan said to. Pure pursuit toward an arc endpoint reproduces the
arc's curvature (chord geometry), so plans are traced as drawn.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .battery import BatteryState
from .geometry import Pose2D, pursuit_curvature, signed_angle_to, wrap_angle
from .planner import DiscontinuousPlanError, PathPlan

SIGNAL_EPSILON = 0.02  # rad; aligned enough to drop the turn signal
MAX_PLAN_START_GAP = 0.5  # m; plans must begin near the robot


class Mode(enum.Enum):
    IDLE = "Idle"
    ROTATE_IN_PLACE = "RotateInPlace"
    ARC_PURSUIT = "ArcPursuit"
    FORWARD = "Forward"
    WAITING = "Waiting"
    CHARGING = "Charging"


@dataclass(frozen=True)
class MotionParams:
    v_max: float = 0.65
    omega_max: float = 1.8
    angle_threshold: float = math.pi / 3
    near_distance: float = 0.3
    arrive_tolerance: float = 0.1
    signal_epsilon: float = SIGNAL_EPSILON

    def __post_init__(self):
        if min(self.v_max, self.omega_max, self.angle_threshold, self.near_distance,
               self.arrive_tolerance, self.signal_epsilon) <= 0.0:
            raise ValueError("motion parameters must be strictly positive")
        if self.angle_threshold >= math.pi:
            raise ValueError("angle_threshold must be below pi")
        if self.arrive_tolerance >= self.near_distance:
            raise ValueError("arrive_tolerance must be below near_distance")


@dataclass
class RobotState:
    pose: Pose2D
    battery: BatteryState
    plan: PathPlan = field(default_factory=lambda: PathPlan([], goal=(0.0, 0.0)))
    mode: Mode = Mode.IDLE
    plan_progress: float = 0.0
    target_index: int = 0
    near_aligned: bool = False  # latched once the near-case rotation finishes
    original_plan: PathPlan | None = None


@dataclass(frozen=True)
class StepOutcome:
    moved: float = 0.0
    arrived: bool = False  # reached a primitive endpoint this tick
    completed: bool = False  # whole plan finished this tick


def current_target(state: RobotState) -> tuple[float, float] | None:
    """Endpoint of the current translational primitive, None when done."""
    prims = state.plan.primitives
    idx = state.target_index
    while idx < len(prims) and prims[idx].length == 0.0:
        idx += 1
    if idx >= len(prims):
        return None
    return prims[idx].end_point


def pending_rotation(state: RobotState):
    """The zero-length rotation primitive awaiting execution, if any.

    Plan rotations are executed to full alignment before the next segment
    starts; the bare threshold rule would stop rotating at angle_threshold
    and let pursuit swing wide on a long following leg."""
    prims = state.plan.primitives
    idx = state.target_index
    if idx < len(prims) and prims[idx].length == 0.0:
        return prims[idx]
    return None


def set_plan(state: RobotState, plan: PathPlan) -> RobotState:
    if not plan.empty:
        start = plan.primitives[0].start_point
        gap = state.pose.distance_to(start)
        if gap > MAX_PLAN_START_GAP:
            raise DiscontinuousPlanError(
                f"plan starts {gap:.2f} m from the robot (limit {MAX_PLAN_START_GAP})"
            )
    state.plan = plan
    state.plan_progress = 0.0
    state.target_index = 0
    state.near_aligned = False
    state.original_plan = None
    state.mode = Mode.IDLE if plan.empty or current_target(state) is None else Mode.FORWARD
    return state


def select_mode(state: RobotState, params: MotionParams) -> Mode:
    """Pure threshold rule; the near-aligned latch only downgrades the
    near case to Forward after its rotation has finished."""
    target = current_target(state)
    if target is None:
        return Mode.IDLE
    if pending_rotation(state) is not None:
        return Mode.ROTATE_IN_PLACE
    alpha = signed_angle_to(state.pose, target)
    dist = state.pose.distance_to(target)
    if abs(alpha) > params.angle_threshold:
        return Mode.ROTATE_IN_PLACE
    if dist < params.near_distance:
        return Mode.FORWARD if state.near_aligned else Mode.ROTATE_IN_PLACE
    if abs(alpha) > params.signal_epsilon:
        return Mode.ARC_PURSUIT
    return Mode.FORWARD


def step(state: RobotState, params: MotionParams, dt: float) -> StepOutcome:
    """Advance one tick in the already-selected mode; returns what moved."""
    if state.mode in (Mode.IDLE, Mode.WAITING, Mode.CHARGING):
        return StepOutcome()
    target = current_target(state)
    if target is None:
        state.mode = Mode.IDLE
        return StepOutcome()
    pose = state.pose

    rotation = pending_rotation(state)
    if rotation is not None:
        remaining = wrap_angle(rotation.end_heading - pose.heading)
        max_turn = params.omega_max * dt
        if abs(remaining) <= max_turn:
            state.pose = Pose2D(pose.x, pose.y, rotation.end_heading)
            state.target_index += 1
            state.near_aligned = False
        else:
            turn = math.copysign(max_turn, remaining)
            state.pose = Pose2D(pose.x, pose.y, wrap_angle(pose.heading + turn))
        return StepOutcome()

    alpha = signed_angle_to(pose, target)
    dist = pose.distance_to(target)

    if state.mode is Mode.ROTATE_IN_PLACE:
        turn = math.copysign(min(params.omega_max * dt, abs(alpha)), alpha)
        state.pose = Pose2D(pose.x, pose.y, wrap_angle(pose.heading + turn))
        if dist < params.near_distance and abs(alpha - turn) <= params.signal_epsilon:
            state.near_aligned = True
        return StepOutcome()

    # ArcPursuit and Forward both translate at v_max
    if state.mode is Mode.ARC_PURSUIT:
        omega = pursuit_curvature(pose, target) * params.v_max
        omega = max(-params.omega_max, min(params.omega_max, omega))
    else:
        omega = 0.0
    moved = params.v_max * dt
    new_pose = Pose2D(
        pose.x + moved * math.cos(pose.heading),
        pose.y + moved * math.sin(pose.heading),
        wrap_angle(pose.heading + omega * dt),
    )
    state.pose = new_pose
    limit = state.plan.cum_end(state.target_index)
    state.plan_progress = min(state.plan_progress + moved, limit)

    arrived = new_pose.distance_to(target) <= params.arrive_tolerance
    completed = False
    if arrived:
        completed = _advance(state, params) is None
    return StepOutcome(moved=moved, arrived=arrived, completed=completed)


def _advance(state: RobotState, params: MotionParams) -> tuple[float, float] | None:
    """Snap progress to the finished primitive's end, then aim at the next
    primitive: pending rotations stop the walk (they execute over the coming
    ticks); translational primitives already within arrive_tolerance are
    snapped past."""
    prims = state.plan.primitives
    idx = state.target_index
    while True:
        state.plan_progress = state.plan.cum_end(idx) if idx < len(prims) else state.plan.total_length
        idx += 1
        state.target_index = idx
        state.near_aligned = False
        if idx >= len(prims) or all(p.length == 0.0 for p in prims[idx:]):
            state.target_index = len(prims)
            state.plan_progress = state.plan.total_length
            state.mode = Mode.IDLE
            return None
        nxt = prims[idx]
        if nxt.length == 0.0:
            return nxt.end_point  # rotation pending; executes next ticks
        if state.pose.distance_to(nxt.end_point) > params.arrive_tolerance:
            return nxt.end_point
