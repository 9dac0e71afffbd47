"""Grid path planning that emits typed primitive plans.

Pipeline: A* over the 8-connected inflated grid (diagonal cost sqrt(2), no
corner cutting, fixed N, NE, E, SE, S, SW, W, NW expansion order for
determinism), string-pulling smoothing into a polyline, then junction
conversion: turns above the controller's angle threshold become in-place
rotations, smaller turns become tangent fillet arcs.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ArcPrimitive,
    LinePrimitive,
    Primitive,
    Pose2D,
    RotatePrimitive,
    sample_primitive,
    wrap_angle,
)
from .grid import DynamicObstacle, NavGrid

SQRT2 = math.sqrt(2.0)

# (drow, dcol) in fixed expansion order: N, NE, E, SE, S, SW, W, NW
NEIGHBORS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))

CONTINUITY_TOL = 1e-6
DIVERGENCE_CLEARANCE = 0.25  # meters; detour branch/rejoin detection
SAMPLE_STEP = 0.05  # meters; collision and divergence sampling


class PlanningError(Exception):
    pass


class BlockedEndpointError(PlanningError):
    pass


class NoPathError(PlanningError):
    pass


class NoDetourError(PlanningError):
    """The injected obstacle walls off every route to the goal."""


class DiscontinuousPlanError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerParams:
    angle_threshold: float = math.pi / 3  # junctions sharper than this rotate in place
    fillet_radius: float = 0.3
    min_fillet_radius: float = 0.05


@dataclass
class PathPlan:
    """Ordered rotate/line/arc primitives; continuous and collision-checked."""

    primitives: list[Primitive]
    goal: tuple[float, float]
    total_length: float = field(init=False)
    _cum: list[float] = field(init=False, repr=False)

    def __post_init__(self):
        _check_continuity(self.primitives)
        cum = [0.0]
        for prim in self.primitives:
            cum.append(cum[-1] + prim.length)
        self._cum = cum
        self.total_length = cum[-1]

    @property
    def empty(self) -> bool:
        return not self.primitives

    def cum_start(self, index: int) -> float:
        """Arclength at which primitive `index` begins."""
        return self._cum[index]

    def cum_end(self, index: int) -> float:
        return self._cum[index + 1]

    def index_at(self, s: float) -> int:
        """Translational primitive containing arclength s; an arclength on a
        primitive boundary belongs to the later primitive."""
        if self.empty:
            raise ValueError("empty plan has no primitives")
        s = min(max(s, 0.0), self.total_length)
        idx = bisect_right(self._cum, s + 1e-12) - 1
        idx = min(idx, len(self.primitives) - 1)
        # boundary may sit on a zero-length rotation; take the next
        # translational primitive, or the last one at the very end
        while idx < len(self.primitives) and self.primitives[idx].length == 0.0:
            idx += 1
        if idx >= len(self.primitives):
            idx = len(self.primitives) - 1
            while idx > 0 and self.primitives[idx].length == 0.0:
                idx -= 1
        return idx

    def point_at(self, s: float) -> tuple[float, float]:
        if self.empty:
            raise ValueError("empty plan has no points")
        idx = self.index_at(s)
        prim = self.primitives[idx]
        if prim.length == 0.0:
            return prim.start_point
        local = min(max(s - self._cum[idx], 0.0), prim.length)
        return sample_primitive(prim, local)

    def sample_points(self, step: float = SAMPLE_STEP) -> np.ndarray:
        """Dense (n, 2) samples along the translational primitives, endpoint included."""
        pts: list[tuple[float, float]] = []
        for prim in self.primitives:
            if prim.length == 0.0:
                continue
            n = max(1, int(math.ceil(prim.length / step)))
            for k in range(n):
                pts.append(sample_primitive(prim, prim.length * k / n))
        if pts or self.primitives:
            last = self.primitives[-1]
            pts.append(last.end_point)
        return np.array(pts) if pts else np.zeros((0, 2))


def _check_continuity(primitives: list[Primitive]) -> None:
    for prev, nxt in zip(primitives, primitives[1:]):
        if math.dist(prev.end_point, nxt.start_point) > CONTINUITY_TOL:
            raise DiscontinuousPlanError(
                f"gap between {prev.end_point} and {nxt.start_point}"
            )
        dh = abs(wrap_angle(nxt.start_heading - prev.end_heading))
        if dh > CONTINUITY_TOL:
            raise DiscontinuousPlanError(
                f"heading kink of {dh:.2e} rad at {nxt.start_point}"
            )


def astar_cells(
    grid: NavGrid, start_cell: tuple[int, int], goal_cell: tuple[int, int]
) -> list[tuple[int, int]]:
    """Cell path from start to goal, inclusive. Deterministic tie-breaking:
    priority (f, h, push order), neighbors expanded in the fixed order."""
    blocked = grid.inflated
    height, width = blocked.shape
    res = grid.resolution

    def heuristic(cell: tuple[int, int]) -> float:
        dy = abs(cell[0] - goal_cell[0])
        dx = abs(cell[1] - goal_cell[1])
        return res * (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy))

    g_score = {start_cell: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = heuristic(start_cell)
    open_heap = [(h0, h0, 0, start_cell)]
    closed = set()
    seq = 1
    while open_heap:
        _, _, _, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        if cell == goal_cell:
            path = [cell]
            while cell in came:
                cell = came[cell]
                path.append(cell)
            path.reverse()
            return path
        closed.add(cell)
        row, col = cell
        base_g = g_score[cell]
        for drow, dcol in NEIGHBORS:
            nrow, ncol = row + drow, col + dcol
            if not (0 <= nrow < height and 0 <= ncol < width):
                continue
            if blocked[nrow, ncol]:
                continue
            if drow != 0 and dcol != 0:
                # no corner cutting: both orthogonal neighbors must be free
                if blocked[row + drow, col] or blocked[row, col + dcol]:
                    continue
                step = SQRT2 * res
            else:
                step = res
            neighbor = (nrow, ncol)
            tentative = base_g + step
            if tentative < g_score.get(neighbor, math.inf) - 1e-12:
                g_score[neighbor] = tentative
                came[neighbor] = cell
                h = heuristic(neighbor)
                heapq.heappush(open_heap, (tentative + h, h, seq, neighbor))
                seq += 1
    raise NoPathError(f"no grid path from {start_cell} to {goal_cell}")


def line_is_free(grid: NavGrid, p: tuple[float, float], q: tuple[float, float]) -> bool:
    """Every sample of segment pq lies on an unblocked inflated cell."""
    dist = math.dist(p, q)
    step = min(grid.resolution / 4.0, SAMPLE_STEP)
    n = max(1, int(math.ceil(dist / step)))
    for k in range(n + 1):
        t = k / n
        point = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
        if grid.is_blocked(point):
            return False
    return True


def string_pull(grid: NavGrid, points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Greedy shortcutting: from each anchor keep the farthest visible point."""
    if len(points) <= 2:
        return list(points)
    pulled = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not line_is_free(grid, points[i], points[j]):
            j -= 1
        pulled.append(points[j])
        i = j
    return pulled


def _drop_collinear(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = [points[0]]
    for p in points[1:]:
        if math.dist(out[-1], p) > 1e-9:
            out.append(p)
    if len(out) <= 2:
        return out
    kept = [out[0]]
    for prev, cur, nxt in zip(out, out[1:], out[2:]):
        h1 = math.atan2(cur[1] - prev[1], cur[0] - prev[0])
        h2 = math.atan2(nxt[1] - cur[1], nxt[0] - cur[0])
        if abs(wrap_angle(h2 - h1)) > 1e-9:
            kept.append(cur)
    kept.append(out[-1])
    return kept


def _arc_is_free(grid: NavGrid, arc: ArcPrimitive) -> bool:
    n = max(2, int(math.ceil(arc.length / min(grid.resolution / 4.0, SAMPLE_STEP))))
    for k in range(n + 1):
        if grid.is_blocked(sample_primitive(arc, arc.length * k / n)):
            return False
    return True


def _fillet(
    grid: NavGrid,
    cursor: tuple[float, float],
    corner: tuple[float, float],
    nxt: tuple[float, float],
    turn: float,
    params: PlannerParams,
) -> ArcPrimitive | None:
    """Tangent arc replacing the corner, or None when no collision-free
    radius fits."""
    h1 = math.atan2(corner[1] - cursor[1], corner[0] - cursor[0])
    in_avail = math.dist(cursor, corner)
    out_avail = math.dist(corner, nxt) / 2.0
    half = abs(turn) / 2.0
    tan_half = math.tan(half)
    if tan_half <= 0.0:
        return None
    radius = min(params.fillet_radius, in_avail / tan_half, out_avail / tan_half)
    u1 = (math.cos(h1), math.sin(h1))
    h2 = wrap_angle(h1 + turn)
    u2 = (math.cos(h2), math.sin(h2))
    side = 1.0 if turn > 0 else -1.0
    while radius >= params.min_fillet_radius:
        t = radius * tan_half
        p1 = (corner[0] - t * u1[0], corner[1] - t * u1[1])
        p2 = (corner[0] + t * u2[0], corner[1] + t * u2[1])
        # left normal of u1 is (-sin h1, cos h1); center sits radius along it
        center = (p1[0] + side * radius * -math.sin(h1), p1[1] + side * radius * math.cos(h1))
        start_angle = math.atan2(p1[1] - center[1], p1[0] - center[0])
        arc = ArcPrimitive(center=center, radius=radius, start_angle=start_angle, sweep=turn)
        if math.dist(arc.end_point, p2) > CONTINUITY_TOL:
            return None
        if _arc_is_free(grid, arc):
            return arc
        radius /= 2.0
    return None


def polyline_to_primitives(
    grid: NavGrid,
    polyline: list[tuple[float, float]],
    start_heading: float,
    params: PlannerParams,
) -> list[Primitive]:
    """Lines joined by fillet arcs (small turns) or in-place rotations
    (turns above the angle threshold, and fillet fallbacks)."""
    points = _drop_collinear(polyline)
    if len(points) < 2:
        return []
    prims: list[Primitive] = []
    first_heading = math.atan2(points[1][1] - points[0][1], points[1][0] - points[0][0])
    initial_turn = wrap_angle(first_heading - start_heading)
    if abs(initial_turn) > params.angle_threshold:
        prims.append(RotatePrimitive(points[0], wrap_angle(start_heading), first_heading))

    cursor = points[0]
    heading = first_heading
    for i in range(1, len(points) - 1):
        corner, nxt = points[i], points[i + 1]
        out_heading = math.atan2(nxt[1] - corner[1], nxt[0] - corner[0])
        turn = wrap_angle(out_heading - heading)
        arc = None
        if abs(turn) <= params.angle_threshold:
            arc = _fillet(grid, cursor, corner, nxt, turn, params)
        if arc is not None:
            if math.dist(cursor, arc.start_point) > 1e-9:
                prims.append(LinePrimitive(cursor, arc.start_point))
            prims.append(arc)
            cursor = arc.end_point
        else:
            if math.dist(cursor, corner) > 1e-9:
                prims.append(LinePrimitive(cursor, corner))
            prims.append(RotatePrimitive(corner, heading, out_heading))
            cursor = corner
        heading = out_heading
    if math.dist(cursor, points[-1]) > 1e-9:
        prims.append(LinePrimitive(cursor, points[-1]))
    return prims


def plan_path(
    grid: NavGrid,
    start: Pose2D,
    goal: tuple[float, float],
    extra: list[DynamicObstacle] | None = None,
    params: PlannerParams = PlannerParams(),
) -> PathPlan:
    """Collision-free primitive plan from the start pose to the goal point."""
    work = grid.with_obstacles(extra) if extra else grid
    if math.dist(start.position, goal) <= 1e-9:
        return PathPlan([], goal=goal)
    start_cell = work.cell_of(start.position)
    goal_cell = work.cell_of(goal)
    if not work.in_bounds(start_cell) or work.inflated[start_cell]:
        raise BlockedEndpointError(f"start {start.position} on a blocked cell")
    if not work.in_bounds(goal_cell) or work.inflated[goal_cell]:
        raise BlockedEndpointError(f"goal {goal} on a blocked cell")

    if start_cell == goal_cell or line_is_free(work, start.position, goal):
        polyline = [start.position, goal]
    else:
        cells = astar_cells(work, start_cell, goal_cell)
        polyline = [start.position] + [work.center_of(c) for c in cells[1:-1]] + [goal]
        polyline = string_pull(work, polyline)
    prims = polyline_to_primitives(work, polyline, start.heading, params)
    return PathPlan(prims, goal=goal)


def add_waypoint_chain(
    grid: NavGrid,
    start: Pose2D,
    waypoints: list[tuple[float, float]],
    extra: list[DynamicObstacle] | None = None,
    params: PlannerParams = PlannerParams(),
) -> PathPlan:
    """Concatenated per-leg plans through every waypoint in order.

    Heading kinks at the joins become rotations; collinear lines merge.
    Planning failures carry the offending leg index.
    """
    if not waypoints:
        return PathPlan([], goal=start.position)
    prims: list[Primitive] = []
    pose = start
    for leg, waypoint in enumerate(waypoints):
        try:
            leg_plan = plan_path(grid, pose, waypoint, extra=extra, params=params)
        except PlanningError as exc:
            raise NoPathError(f"leg {leg}: {exc}") from exc
        if not leg_plan.empty:
            prims = _join(prims, leg_plan.primitives)
            last = prims[-1]
            pose = Pose2D(last.end_point[0], last.end_point[1], last.end_heading)
        else:
            pose = Pose2D(waypoint[0], waypoint[1], pose.heading)
    return PathPlan(prims, goal=waypoints[-1])


def _join(prims: list[Primitive], nxt: list[Primitive]) -> list[Primitive]:
    if not prims:
        return list(nxt)
    if not nxt:
        return prims
    out = list(prims)
    tail, head = out[-1], nxt[0]
    kink = wrap_angle(head.start_heading - tail.end_heading)
    if abs(kink) > CONTINUITY_TOL:
        out.append(RotatePrimitive(tail.end_point, tail.end_heading, head.start_heading))
    elif isinstance(tail, LinePrimitive) and isinstance(head, LinePrimitive):
        out[-1] = LinePrimitive(tail.start, head.end)
        return out + list(nxt[1:])
    return out + list(nxt)


def detour(
    original: PathPlan,
    grid: NavGrid,
    robot_pose: Pose2D,
    human: DynamicObstacle,
    progress: float = 0.0,
    params: PlannerParams = PlannerParams(),
) -> tuple[PathPlan, float, float]:
    """Replan around the human; returns (detour_plan, branch, rejoin).

    Branch and rejoin are arclengths on the original plan: the first point
    where the detour diverges beyond the clearance and the first point after
    that where it comes back within it. A detour that never diverges reports
    branch = rejoin = the original total length.
    """
    try:
        detour_plan = plan_path(grid, robot_pose, original.goal, extra=[human], params=params)
    except PlanningError as exc:
        raise NoDetourError(str(exc)) from exc

    orig_pts = _arclength_samples(original, progress)
    det_pts = _arclength_samples(detour_plan, 0.0)
    if len(orig_pts) == 0 or len(det_pts) == 0:
        return detour_plan, original.total_length, original.total_length

    n = min(len(orig_pts), len(det_pts))
    gaps = np.hypot(
        orig_pts[:n, 0] - det_pts[:n, 0], orig_pts[:n, 1] - det_pts[:n, 1]
    )
    diverged = np.nonzero(gaps > DIVERGENCE_CLEARANCE)[0]
    if len(diverged) == 0:
        return detour_plan, original.total_length, original.total_length
    branch = progress + diverged[0] * SAMPLE_STEP

    # rejoin: first detour sample after the branch within clearance of the
    # original path; report the nearest original arclength
    tail = det_pts[diverged[0]:]
    d2 = (
        (tail[:, 0:1] - orig_pts[None, :, 0]) ** 2
        + (tail[:, 1:2] - orig_pts[None, :, 1]) ** 2
    )
    mins = d2.min(axis=1)
    back = np.nonzero(mins <= DIVERGENCE_CLEARANCE**2)[0]
    if len(back) == 0:
        rejoin = original.total_length
    else:
        rejoin = progress + int(d2[back[0]].argmin()) * SAMPLE_STEP
    return detour_plan, min(branch, original.total_length), min(rejoin, original.total_length)


def _arclength_samples(plan: PathPlan, from_s: float) -> np.ndarray:
    if plan.empty or plan.total_length <= from_s:
        return np.zeros((0, 2))
    steps = int((plan.total_length - from_s) / SAMPLE_STEP) + 1
    return np.array([plan.point_at(from_s + k * SAMPLE_STEP) for k in range(steps)])


def dijkstra_field(grid: NavGrid, source: tuple[float, float]) -> np.ndarray:
    """Shortest grid path length (meters) from every free cell to `source`
    over the inflated mask; inf where unreachable. Used for O(1) per-tick
    distance-to-base queries."""
    blocked = grid.inflated
    height, width = blocked.shape
    res = grid.resolution
    dist = np.full((height, width), math.inf)
    src = grid.cell_of(source)
    if not grid.in_bounds(src) or blocked[src]:
        return dist
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, (row, col) = heapq.heappop(heap)
        if d > dist[row, col] + 1e-12:
            continue
        for drow, dcol in NEIGHBORS:
            nrow, ncol = row + drow, col + dcol
            if not (0 <= nrow < height and 0 <= ncol < width) or blocked[nrow, ncol]:
                continue
            if drow != 0 and dcol != 0:
                if blocked[row + drow, col] or blocked[row, col + dcol]:
                    continue
                nd = d + SQRT2 * res
            else:
                nd = d + res
            if nd < dist[nrow, ncol] - 1e-12:
                dist[nrow, ncol] = nd
                heapq.heappush(heap, (nd, (nrow, ncol)))
    return dist
