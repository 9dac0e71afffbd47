import math
import random

import numpy as np
import pytest

from hrisim.grid import DynamicObstacle, MapFormatError, NavGrid, inflate, parse_map
from hrisim import grid as grid_mod


def make_text(rows, resolution=0.5):
    width = len(rows[0])
    height = len(rows)
    return "\n".join([f"{width} {height} {resolution}"] + list(rows)) + "\n"


def test_parse_small_map():
    text = make_text(
        [
            "#####",
            "#..C#",
            "#.B.#",
            "#####",
        ]
    )
    g = parse_map(text, inflation_radius=0.0)
    assert (g.width, g.height, g.resolution) == (5, 4, 0.5)
    # file top row is the highest y band; blocked array row 0 is y=0
    assert g.blocked[0].all() and g.blocked[3].all()
    assert not g.blocked[1, 2]
    assert g.base == (1.25, 0.75)
    assert g.room_centers == [(1.75, 1.25)]
    assert g.source_text == text


def test_parse_rejects_bad_inputs():
    with pytest.raises(MapFormatError, match="line 1"):
        parse_map("not a header\n##\n##\n", 0.0)
    with pytest.raises(MapFormatError, match="line 3"):
        parse_map("2 2 0.5\n##\n#\n", 0.0)  # short row
    with pytest.raises(MapFormatError, match="line 4"):
        parse_map("2 3 0.5\n##\n##\n#X\n", 0.0)  # unknown char
    with pytest.raises(MapFormatError, match="rows"):
        parse_map("2 3 0.5\n##\n##\n", 0.0)
    with pytest.raises(MapFormatError, match="multiple 'B'"):
        parse_map(make_text(["BB", ".."]), 0.0)
    with pytest.raises(MapFormatError, match="slot"):
        parse_map(make_text(["33", ".."]), 0.0)


def test_gem_slots_ordered_by_digit():
    g = parse_map(make_text(["2.0", "..1", "..."]), 0.0)
    assert len(g.gem_slots) == 3
    # slot order follows the digit, not scan order; top file row is y=1.25
    assert g.gem_slots[0] == (1.25, 1.25)
    assert g.gem_slots[1] == (1.25, 0.75)
    assert g.gem_slots[2] == (0.25, 1.25)


def test_cell_center_round_trip():
    g = parse_map(make_text(["....", "....", "...."], resolution=0.25), 0.0)
    for cell in [(0, 0), (2, 3), (1, 1)]:
        assert g.cell_of(g.center_of(cell)) == cell
    assert not g.in_bounds((3, 0))
    assert g.is_blocked((-0.01, 0.1))
    assert g.is_blocked((0.1, 10.0))


def test_inflation_matches_brute_force():
    rng = random.Random(7)
    for _ in range(25):
        h, w = rng.randint(4, 12), rng.randint(4, 12)
        blocked = np.zeros((h, w), dtype=bool)
        for _ in range(rng.randint(1, 8)):
            blocked[rng.randrange(h), rng.randrange(w)] = True
        res = rng.choice([0.1, 0.25, 0.5])
        radius = rng.choice([0.0, res, 2.3 * res])
        got = inflate(blocked, radius, res)
        # oracle: a cell is inflated iff some blocked cell center is within
        # radius of its center
        want = np.zeros_like(blocked)
        obstacles = list(zip(*np.nonzero(blocked)))
        for r in range(h):
            for c in range(w):
                want[r, c] = any(
                    math.hypot(r - br, c - bc) * res <= radius + 1e-12
                    for br, bc in obstacles
                )
        assert (got == want).all()
        assert (got | blocked == got).all()  # superset of the raw mask


def test_with_obstacles_guarantees_clearance():
    g = parse_map(make_text(["." * 20] * 20, resolution=0.25), inflation_radius=0.3)
    rng = random.Random(3)
    for _ in range(20):
        center = (rng.uniform(1.0, 4.0), rng.uniform(1.0, 4.0))
        obs = DynamicObstacle(center=center, radius=0.3)
        stamped = g.with_obstacles([obs])
        assert not g.inflated.all()
        # every free point of the stamped grid clears radius + inflation
        for _ in range(300):
            p = (rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0))
            if not stamped.is_blocked(p):
                assert math.dist(p, center) >= 0.3 + 0.3
        # the original grid is untouched
        assert stamped is not g
        assert stamped.inflated.sum() > g.inflated.sum()


def test_with_obstacles_rejects_bad_radius():
    with pytest.raises(ValueError):
        DynamicObstacle(center=(0.0, 0.0), radius=0.0)


def test_shipped_maps_parse():
    import importlib.resources as res

    maps = res.files("hrisim").joinpath("data/maps")
    hall = parse_map(maps.joinpath("hallway.txt").read_text(), 0.3)
    room = parse_map(maps.joinpath("retrieval.txt").read_text(), 0.3)
    assert (hall.width, hall.height) == (160, 160)
    assert len(hall.room_centers) == 4
    assert hall.base is None and not hall.gem_slots
    assert (room.width, room.height) == (100, 80)
    assert room.base is not None and len(room.gem_slots) == 10
    for i, a in enumerate(room.gem_slots):
        for b in room.gem_slots[i + 1 :]:
            assert math.dist(a, b) >= 1.5
    for g in (hall, room):
        for marker in g.room_centers + g.gem_slots + ([g.base] if g.base else []):
            assert not g.is_blocked(marker)
