"""Planar poses, signed-angle arithmetic, and path primitives.

Everything here is a pure value or a pure function; the motion controller,
planner, and marker projection are all built on top of these.

Conventions: world frame is x-right / y-up, headings are radians in
(-pi, pi], positive rotation is counterclockwise (a positive signed angle
means the target is to the robot's left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Below this separation a bearing to the target is undefined.
DEGENERATE_DISTANCE = 1e-9


class DegenerateTargetError(ValueError):
    """Target coincides with the query position; no bearing exists."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi].

    The boundary is assigned to +pi, so a target directly behind resolves
    to a left rotation.
    """
    r = math.fmod(theta, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


@dataclass
class Pose2D:
    """Planar position in meters plus heading in radians, kept normalized."""

    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")
        self.heading = wrap_angle(self.heading)

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, point: tuple[float, float]) -> float:
        return math.hypot(point[0] - self.x, point[1] - self.y)


def signed_angle_to(pose: Pose2D, target: tuple[float, float]) -> float:
    """Signed angle in (-pi, pi] from the pose's heading to the bearing of target.

    Positive means the target lies to the left (counterclockwise).

    Raises:
        DegenerateTargetError: target within 1e-9 m of the pose position.
    """
    dx = target[0] - pose.x
    dy = target[1] - pose.y
    if math.hypot(dx, dy) <= DEGENERATE_DISTANCE:
        raise DegenerateTargetError(f"target {target} coincides with pose position")
    return wrap_angle(math.atan2(dy, dx) - pose.heading)


def pursuit_curvature(pose: Pose2D, target: tuple[float, float]) -> float:
    """Curvature (1/m, signed, positive = left) of the circle tangent to the
    current heading that passes through target.

    kappa = 2 sin(alpha) / d. Zero when already facing the target, so arc
    motion degenerates to driving straight.
    """
    d = pose.distance_to(target)
    if d <= DEGENERATE_DISTANCE:
        raise DegenerateTargetError(f"target {target} coincides with pose position")
    alpha = signed_angle_to(pose, target)
    return 2.0 * math.sin(alpha) / d


@dataclass(frozen=True)
class LinePrimitive:
    """Straight segment from start to end."""

    start: tuple[float, float]
    end: tuple[float, float]

    def __post_init__(self):
        if self.length <= 1e-9:
            raise ValueError("degenerate line primitive (length <= 1e-9 m)")

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def heading(self) -> float:
        return math.atan2(self.end[1] - self.start[1], self.end[0] - self.start[0])

    @property
    def start_heading(self) -> float:
        return self.heading

    @property
    def end_heading(self) -> float:
        return self.heading

    @property
    def start_point(self) -> tuple[float, float]:
        return self.start

    @property
    def end_point(self) -> tuple[float, float]:
        return self.end


@dataclass(frozen=True)
class ArcPrimitive:
    """Circular arc: center, radius > 0, start angle, signed sweep (|sweep| <= 2pi).

    Positive sweep runs counterclockwise. Arc length is radius * |sweep|.
    """

    center: tuple[float, float]
    radius: float
    start_angle: float
    sweep: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"arc radius must be positive, got {self.radius}")
        if abs(self.sweep) > TWO_PI + 1e-12:
            raise ValueError(f"|sweep| may not exceed 2pi, got {self.sweep}")

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point_at_angle(self, angle: float) -> tuple[float, float]:
        return (
            self.center[0] + self.radius * math.cos(angle),
            self.center[1] + self.radius * math.sin(angle),
        )

    def heading_at(self, s: float) -> float:
        """Tangent heading at arc length s from the start."""
        angle = self.start_angle + math.copysign(s / self.radius, self.sweep)
        # tangent is the radial direction rotated +-90 deg depending on travel sense
        return wrap_angle(angle + math.copysign(math.pi / 2.0, self.sweep))

    @property
    def start_heading(self) -> float:
        return self.heading_at(0.0)

    @property
    def end_heading(self) -> float:
        return self.heading_at(self.length)

    @property
    def start_point(self) -> tuple[float, float]:
        return self.point_at_angle(self.start_angle)

    @property
    def end_point(self) -> tuple[float, float]:
        return self.point_at_angle(self.start_angle + self.sweep)


@dataclass(frozen=True)
class RotatePrimitive:
    """In-place rotation at a fixed point; contributes no translational length."""

    position: tuple[float, float]
    start_heading: float
    end_heading: float

    @property
    def length(self) -> float:
        return 0.0

    @property
    def start_point(self) -> tuple[float, float]:
        return self.position

    @property
    def end_point(self) -> tuple[float, float]:
        return self.position


Primitive = LinePrimitive | ArcPrimitive | RotatePrimitive


def sample_primitive(prim: LinePrimitive | ArcPrimitive, s: float) -> tuple[float, float]:
    """Point at arc length s from the primitive's start.

    s must lie in [0, length]; s = length yields the exact endpoint.
    """
    length = prim.length
    if s < -1e-9 or s > length + 1e-9:
        raise ValueError(f"arclength {s} outside [0, {length}]")
    s = min(max(s, 0.0), length)
    if isinstance(prim, LinePrimitive):
        if s >= length:
            return prim.end
        t = s / length
        return (
            prim.start[0] + t * (prim.end[0] - prim.start[0]),
            prim.start[1] + t * (prim.end[1] - prim.start[1]),
        )
    if s >= length:
        return prim.end_point
    angle = prim.start_angle + math.copysign(s / prim.radius, prim.sweep)
    return prim.point_at_angle(angle)
