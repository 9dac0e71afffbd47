"""The four visualization channels, computed as plain state each tick.

Rendering (colors, billboarding, sprites) belongs to the client; this module
only decides what exists: path markers over a sliding window, the turn
signal with its deadband, thought-bubble visibility, and the battery
fraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .battery import BatteryState
from .geometry import ArcPrimitive
from .motion import Mode, MotionParams, RobotState, current_target
from .geometry import signed_angle_to
from .planner import PathPlan

DEFAULT_SPACING = 0.25
DEFAULT_STEPS_TO_PROJECT = 12
BUBBLE_RADIUS = 3.0


class MarkerKind(enum.Enum):
    LINEAR = "Linear"
    ARC = "Arc"


class SignalDirection(enum.Enum):
    NONE = "None"
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class PathMarker:
    position: tuple[float, float]
    kind: MarkerKind
    dimmed: bool
    index: int
    arclength: float


@dataclass(frozen=True)
class TurnSignal:
    direction: SignalDirection = SignalDirection.NONE


@dataclass(frozen=True)
class ThoughtBubble:
    visible: bool = False
    message: str = ""


@dataclass(frozen=True)
class BatteryIndicator:
    fraction: float = 1.0


@dataclass
class VizState:
    markers: list[PathMarker] = field(default_factory=list)
    signal: TurnSignal = TurnSignal()
    bubble: ThoughtBubble = ThoughtBubble()
    battery: BatteryIndicator = BatteryIndicator()


def project_path(
    plan: PathPlan,
    progress: float,
    spacing: float = DEFAULT_SPACING,
    steps_to_project: int = DEFAULT_STEPS_TO_PROJECT,
    dimmed: bool = False,
) -> list[PathMarker]:
    """Markers ahead of `progress` at arclength multiples of `spacing`,
    closed by the exact plan endpoint, truncated to the window size.
    Rotations emit nothing; a marker on a primitive boundary belongs to the
    later primitive."""
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    if steps_to_project <= 0 or plan.empty:
        return []
    total = plan.total_length
    if total - progress <= 1e-9:
        return []
    arclengths = []
    k = 1
    while len(arclengths) < steps_to_project:
        s = progress + k * spacing
        if s > total - spacing + 1e-9:
            break
        arclengths.append(s)
        k += 1
    if len(arclengths) < steps_to_project:
        arclengths.append(total)
    markers = []
    for index, s in enumerate(arclengths):
        prim = plan.primitives[plan.index_at(s)]
        kind = MarkerKind.ARC if isinstance(prim, ArcPrimitive) else MarkerKind.LINEAR
        markers.append(
            PathMarker(
                position=plan.point_at(s),
                kind=kind,
                dimmed=dimmed,
                index=index,
                arclength=s,
            )
        )
    return markers


def turn_signal(state: RobotState, params: MotionParams) -> TurnSignal:
    if state.mode not in (Mode.ROTATE_IN_PLACE, Mode.ARC_PURSUIT):
        return TurnSignal(SignalDirection.NONE)
    target = current_target(state)
    if target is None:
        return TurnSignal(SignalDirection.NONE)
    try:
        alpha = signed_angle_to(state.pose, target)
    except ValueError:
        return TurnSignal(SignalDirection.NONE)
    if alpha > params.signal_epsilon:
        return TurnSignal(SignalDirection.LEFT)
    if alpha < -params.signal_epsilon:
        return TurnSignal(SignalDirection.RIGHT)
    return TurnSignal(SignalDirection.NONE)


def thought_bubble(
    robot_pos: tuple[float, float],
    human_pos: tuple[float, float],
    message: str,
    bubble_radius: float = BUBBLE_RADIUS,
) -> ThoughtBubble:
    visible = math.dist(robot_pos, human_pos) < bubble_radius
    return ThoughtBubble(visible=visible, message=message)


def battery_indicator(batt: BatteryState) -> BatteryIndicator:
    return BatteryIndicator(fraction=batt.fraction)


def compute_viz(
    state: RobotState,
    params: MotionParams,
    human_pos: tuple[float, float],
    message: str,
    spacing: float = DEFAULT_SPACING,
    steps_to_project: int = DEFAULT_STEPS_TO_PROJECT,
    original_progress: float | None = None,
    bubble_radius: float = BUBBLE_RADIUS,
) -> VizState:
    """Assemble all channels; during a detour the superseded original plan
    projects dimmed markers alongside the active ones."""
    markers = project_path(state.plan, state.plan_progress, spacing, steps_to_project)
    if state.original_plan is not None and original_progress is not None:
        markers = markers + project_path(
            state.original_plan, original_progress, spacing, steps_to_project, dimmed=True
        )
    return VizState(
        markers=markers,
        signal=turn_signal(state, params),
        bubble=thought_bubble(state.pose.position, human_pos, message, bubble_radius),
        battery=battery_indicator(state.battery),
    )
