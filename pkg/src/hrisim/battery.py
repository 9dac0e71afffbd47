"""Battery model in meters of remaining range, drained by translation only.

Two management modes: AtWaypointCheck compares the next leg plus the return
trip against remaining range at each waypoint; ContinuousMonitor watches the
live distance to base every tick and abandons the current path when the
margin is about to be eaten. Both compare planned path lengths, not straight
lines, so walls can't strand the robot.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class BatteryMode(enum.Enum):
    DISABLED = "Disabled"
    AT_WAYPOINT = "AtWaypointCheck"
    CONTINUOUS = "ContinuousMonitor"


class BatteryDecision(enum.Enum):
    PROCEED = "Proceed"
    GO_CHARGE = "GoCharge"
    ABANDON_AND_CHARGE = "AbandonAndCharge"


DEFAULT_CAPACITY = 60.0
DEFAULT_MARGIN = 0.5
DEFAULT_CHARGE_RATE = 6.0  # meters of range per second
DOCK_RADIUS = 0.3


@dataclass
class BatteryState:
    capacity: float = DEFAULT_CAPACITY
    remaining_range: float = DEFAULT_CAPACITY
    mode: BatteryMode = BatteryMode.DISABLED
    base: tuple[float, float] | None = None
    charging: bool = False
    margin: float = DEFAULT_MARGIN
    charge_rate: float = DEFAULT_CHARGE_RATE
    dock_radius: float = DOCK_RADIUS

    def __post_init__(self):
        if self.capacity <= 0.0:
            raise ValueError("capacity must be positive")
        if not 0.0 <= self.remaining_range <= self.capacity:
            raise ValueError("remaining_range outside [0, capacity]")

    @property
    def fraction(self) -> float:
        return self.remaining_range / self.capacity

    @property
    def depleted(self) -> bool:
        return self.remaining_range <= 0.0

    def at_base(self, robot: tuple[float, float]) -> bool:
        return self.base is not None and math.dist(robot, self.base) <= self.dock_radius


def drain(batt: BatteryState, translated: float) -> BatteryState:
    if translated < 0.0:
        raise ValueError("translated distance must be non-negative")
    if batt.mode is not BatteryMode.DISABLED:
        batt.remaining_range = max(0.0, batt.remaining_range - translated)
    return batt


def check_at_waypoint(
    batt: BatteryState,
    robot: tuple[float, float],
    next_dest: tuple[float, float],
    path_length,
) -> BatteryDecision:
    """At a waypoint: go charge unless the next leg plus the trip home fits.

    path_length(a, b) returns the planned path length between two points, or
    None when unplannable (treated as must-charge-later risk: proceed).
    """
    if batt.mode is not BatteryMode.AT_WAYPOINT or batt.charging or batt.base is None:
        return BatteryDecision.PROCEED
    leg = path_length(robot, next_dest)
    home = path_length(next_dest, batt.base)
    if leg is None or home is None:
        return BatteryDecision.PROCEED
    if leg + home > batt.remaining_range:
        return BatteryDecision.GO_CHARGE
    return BatteryDecision.PROCEED


def check_continuous(
    batt: BatteryState,
    robot: tuple[float, float],
    distance_to_base,
) -> BatteryDecision:
    """Every tick: abandon and head home once range hits the distance plus
    margin. Idempotent while charging or already heading home (callers pass
    heading_home via batt.charging or skip the install)."""
    if batt.mode is not BatteryMode.CONTINUOUS or batt.charging or batt.base is None:
        return BatteryDecision.PROCEED
    dist = distance_to_base(robot)
    if dist is None:
        return BatteryDecision.PROCEED
    if batt.remaining_range <= dist + batt.margin:
        return BatteryDecision.ABANDON_AND_CHARGE
    return BatteryDecision.PROCEED


def charge_tick(batt: BatteryState, at_base: bool, dt: float) -> bool:
    """Recharge while docked; returns True when charging just finished."""
    if not batt.charging or not at_base:
        return False
    batt.remaining_range = min(batt.capacity, batt.remaining_range + batt.charge_rate * dt)
    if batt.remaining_range >= batt.capacity:
        batt.charging = False
        return True
    return False
