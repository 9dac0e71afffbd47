"""Occupancy grid, obstacle inflation, and the plain-text map format.

Map files: first line "W H resolution", then H rows of exactly W characters.
Row 1 of the file is the top of the world (largest y). Legend:

    '#'  blocked
    '.'  free
    'B'  charging base (free)
    'C'  room center (free)
    0-9  gem spawn slot (free), each digit at most once
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

FREE_CHARS = ".BC0123456789"


class MapFormatError(ValueError):
    """Malformed map text; message carries the offending line number."""


@dataclass(frozen=True)
class DynamicObstacle:
    """Disc obstacle injected at planning time (the human, in practice)."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


@dataclass
class NavGrid:
    """Immutable occupancy snapshot with a robot-radius inflated mask.

    `blocked` is indexed [row, col] with row 0 at the bottom of the world;
    cell (row, col) spans x in [col*res, (col+1)*res).
    """

    width: int
    height: int
    resolution: float
    blocked: np.ndarray
    inflation_radius: float
    base: tuple[float, float] | None = None
    room_centers: list[tuple[float, float]] = field(default_factory=list)
    gem_slots: list[tuple[float, float]] = field(default_factory=list)
    source_text: str = ""
    inflated: np.ndarray = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.blocked = np.asarray(self.blocked, dtype=bool)
        self.blocked.setflags(write=False)
        if self.inflated is None:
            self.inflated = inflate(self.blocked, self.inflation_radius, self.resolution)
        self.inflated.setflags(write=False)

    def cell_of(self, point: tuple[float, float]) -> tuple[int, int]:
        return (int(point[1] // self.resolution), int(point[0] // self.resolution))

    def center_of(self, cell: tuple[int, int]) -> tuple[float, float]:
        row, col = cell
        return ((col + 0.5) * self.resolution, (row + 0.5) * self.resolution)

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        row, col = cell
        return 0 <= row < self.height and 0 <= col < self.width

    def is_blocked(self, point: tuple[float, float]) -> bool:
        """Inflated-mask query; anything out of bounds counts as blocked."""
        cell = self.cell_of(point)
        if not self.in_bounds(cell):
            return True
        return bool(self.inflated[cell])

    def with_obstacles(self, obstacles: list[DynamicObstacle]) -> "NavGrid":
        """Copy of this grid with disc obstacles stamped into the inflated mask.

        A cell is blocked when its center lies within obstacle radius +
        inflation radius + half the cell diagonal, which guarantees every
        point of every remaining free cell keeps the full clearance.
        """
        if not obstacles:
            return self
        mask = np.array(self.inflated)
        half_diag = self.resolution * math.sqrt(2.0) / 2.0
        cols = (np.arange(self.width) + 0.5) * self.resolution
        rows = (np.arange(self.height) + 0.5) * self.resolution
        xx, yy = np.meshgrid(cols, rows)
        for obs in obstacles:
            r = obs.radius + self.inflation_radius + half_diag
            mask |= (xx - obs.center[0]) ** 2 + (yy - obs.center[1]) ** 2 <= r * r
        return NavGrid(
            width=self.width,
            height=self.height,
            resolution=self.resolution,
            blocked=self.blocked,
            inflation_radius=self.inflation_radius,
            base=self.base,
            room_centers=self.room_centers,
            gem_slots=self.gem_slots,
            source_text=self.source_text,
            inflated=mask,
        )


def inflate(blocked: np.ndarray, radius: float, resolution: float) -> np.ndarray:
    """Grow the blocked mask so cell centers within `radius` of any blocked
    cell center are also blocked. Superset of the raw mask by construction."""
    if radius <= 0 or not blocked.any():
        return np.array(blocked)
    free_dist = ndimage.distance_transform_edt(~blocked) * resolution
    return free_dist <= radius + 1e-12


def parse_map(text: str, inflation_radius: float) -> NavGrid:
    """Parse a map file into a NavGrid. Raises MapFormatError with the
    offending line number on any deviation from the format."""
    lines = text.splitlines()
    if not lines:
        raise MapFormatError("line 1: empty map file")
    header = lines[0].split()
    if len(header) != 3:
        raise MapFormatError("line 1: header must be 'W H resolution'")
    try:
        width, height = int(header[0]), int(header[1])
        resolution = float(header[2])
    except ValueError as exc:
        raise MapFormatError(f"line 1: {exc}") from exc
    if width <= 0 or height <= 0 or resolution <= 0:
        raise MapFormatError("line 1: W, H, resolution must be positive")
    rows = lines[1:]
    if len(rows) != height:
        raise MapFormatError(f"line {len(lines)}: expected {height} rows, found {len(rows)}")

    blocked = np.zeros((height, width), dtype=bool)
    base = None
    room_centers: list[tuple[float, float]] = []
    slot_digits: list[tuple[int, tuple[float, float]]] = []
    for file_row, line in enumerate(rows):
        if len(line) != width:
            raise MapFormatError(f"line {file_row + 2}: expected {width} chars, found {len(line)}")
        row = height - 1 - file_row
        for col, ch in enumerate(line):
            if ch == "#":
                blocked[row, col] = True
                continue
            if ch not in FREE_CHARS:
                raise MapFormatError(f"line {file_row + 2}: invalid character {ch!r}")
            center = ((col + 0.5) * resolution, (row + 0.5) * resolution)
            if ch == "B":
                if base is not None:
                    raise MapFormatError(f"line {file_row + 2}: multiple 'B' cells")
                base = center
            elif ch == "C":
                room_centers.append(center)
            elif ch.isdigit():
                slot_digits.append((int(ch), center))

    digits = [d for d, _ in slot_digits]
    if len(digits) != len(set(digits)):
        raise MapFormatError("duplicate gem slot digits")
    slot_digits.sort(key=lambda item: item[0])

    # room centers ordered by file scan order: top row first, left to right
    room_centers.sort(key=lambda p: (-p[1], p[0]))

    return NavGrid(
        width=width,
        height=height,
        resolution=resolution,
        blocked=blocked,
        inflation_radius=inflation_radius,
        base=base,
        room_centers=room_centers,
        gem_slots=[p for _, p in slot_digits],
        source_text=text,
    )


def load_map(path: str, inflation_radius: float) -> NavGrid:
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        return parse_map(fh.read(), inflation_radius)
