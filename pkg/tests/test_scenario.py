import math

import pytest

from hrisim.config import ConfigError, SimConfig, shipped_config
from hrisim.engine import Session
from hrisim.geometry import Pose2D
from hrisim.motion import Mode
from hrisim.planner import plan_path
from hrisim.scenario import finalize_metrics, loop_order
from hrisim.triallog import MalformedLogError, TrialLog

LOOP = [(4.05, 4.05), (12.05, 4.05), (12.05, 12.05), (4.05, 12.05)]


def hallway_cfg(**hallway):
    return SimConfig.from_dict(
        {
            "scenario": "hallway",
            "map": "hallway.txt",
            "viz": {"steps_to_project": 0},
            "hallway": hallway,
        }
    )


def retrieval_cfg(seed=1, **retrieval):
    return SimConfig.from_dict(
        {"scenario": "retrieval", "map": "retrieval.txt", "seed": seed,
         "retrieval": retrieval}
    )


# -- hallway ------------------------------------------------------------------


def test_loop_order_is_counterclockwise():
    assert loop_order(LOOP) == LOOP
    # input order never matters
    assert loop_order(list(reversed(LOOP))) == LOOP
    assert loop_order([LOOP[2], LOOP[0], LOOP[3], LOOP[1]]) == LOOP
    # degenerate inputs pass through
    assert loop_order([(1.0, 2.0)]) == [(1.0, 2.0)]
    assert loop_order([]) == []


def point_segment_distance(p, a, b):
    ax, ay = b[0] - a[0], b[1] - a[1]
    denom = ax * ax + ay * ay
    t = 0.0 if denom == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / denom))
    return math.dist(p, (a[0] + t * ax, a[1] + t * ay))


def test_spawn_invariants_across_seeds():
    cfg_dict = shipped_config("hallway")
    for seed in range(1, 51):
        cfg_dict["seed"] = seed
        s = Session(SimConfig.from_dict(cfg_dict))
        sc = s.scenario
        spawn = (s.robot.pose.x, s.robot.pose.y)
        assert spawn in LOOP
        # itinerary tours the other rooms in loop order
        assert len(sc.itinerary) == 3
        i0 = LOOP.index(spawn)
        assert sc.itinerary == [LOOP[(i0 + k) % 4] for k in range(1, 4)]
        # the parked human never blocks a centerline leg
        legs = [spawn] + sc.itinerary
        human = s.human.position
        for a, b in zip(legs, legs[1:]):
            assert point_segment_distance(human, a, b) > 0.6
        assert not s.grid.is_blocked(human)


def test_idle_human_tour_completes_in_room_order():
    cfg_dict = shipped_config("hallway")
    for seed in (1, 2, 3, 4, 5, 6, 7, 8):
        cfg_dict["seed"] = seed
        s = Session(SimConfig.from_dict(cfg_dict))
        itinerary = list(s.scenario.itinerary)
        visit_tick = {p: None for p in itinerary}
        while not s.ended:
            s.tick()
            pos = (s.robot.pose.x, s.robot.pose.y)
            for p in itinerary:
                if visit_tick[p] is None and math.dist(pos, p) <= 0.1:
                    visit_tick[p] = s.tick_count
        assert s.end_reason == "goal_met"
        ticks = [visit_tick[p] for p in itinerary]
        assert all(t is not None for t in ticks)
        assert ticks == sorted(ticks)


def test_single_room_map_tours_from_base():
    cfg = SimConfig.from_dict(
        {"scenario": "hallway", "map": "retrieval.txt", "viz": {"steps_to_project": 0}}
    )
    s = Session(cfg)
    assert (s.robot.pose.x, s.robot.pose.y) == cfg.grid.base
    assert s.scenario.itinerary == [cfg.grid.room_centers[0]]
    s.run()
    assert s.end_reason == "goal_met"


def test_lane_shift_passes_parked_human_on_wider_side():
    # human parked on the first corridor, right of the centerline: more room
    # on the left, so the robot announces Left and passes above
    cfg = hallway_cfg(robot_spawn=0, human_spawn=[8.05, 3.8])
    s = Session(cfg)
    crossing = None
    while not s.ended:
        s.tick()
        if crossing is None and s.robot.pose.x >= 8.05 and s.robot.pose.y < 6.0:
            crossing = (s.tick_count, s.robot.pose.y)
    assert s.end_reason == "goal_met"
    assert crossing is not None
    cross_tick, cross_y = crossing
    assert cross_y > 4.3  # passed on the left of the lane
    assert s.min_separation > 0.6
    lefts = [e for e in s.log.events("Signal")
             if e["data"]["direction"] == "Left" and e["tick"] <= cross_tick]
    assert lefts
    # lane shifts are scenario replans, not arbiter detours
    assert s.log.events("Detour") == []


def test_hard_mode_obstruction_gates_until_room_visited():
    cfg = hallway_cfg(
        hard_mode=True,
        robot_spawn=0,
        human_spawn=[2.0, 2.0],
        obstructions=[{"pos": [8.05, 4.05], "room": 0}],
    )
    s = Session(cfg)
    while not s.ended and s.tick_count < 600:
        s.tick()
        if s.robot.mode is Mode.WAITING and s.wait_reason == "obstruction":
            break
    assert s.robot.mode is Mode.WAITING and s.wait_reason == "obstruction"
    assert s.robot.pose.distance_to((8.05, 4.05)) <= 1.0
    waited_at = s.tick_count
    for _ in range(200):  # holds as long as the human stays away
        s.tick()
    assert s.robot.mode is Mode.WAITING
    assert not s.scenario.obstructions[0].removed

    s.human.pose = Pose2D(4.05, 12.05, 0.0)  # the gating room's center
    s.tick()
    assert s.scenario.obstructions[0].removed
    removed = s.log.events("ObstructionRemoved")
    assert len(removed) == 1 and removed[0]["tick"] > waited_at
    s.human.pose = Pose2D(2.0, 2.0, 0.0)  # wander back out of the way
    s.run()
    assert s.end_reason == "goal_met"
    waits = s.log.events("Wait")
    assert any(e["data"]["reason"] == "obstruction" for e in waits)


def test_hard_mode_times_out_when_human_never_helps():
    cfg = SimConfig.from_dict(
        {
            "scenario": "hallway",
            "map": "hallway.txt",
            "tick_budget": 2000,
            "viz": {"steps_to_project": 0},
            "hallway": {
                "hard_mode": True,
                "robot_spawn": 0,
                "human_spawn": [2.0, 2.0],
                "obstructions": [{"pos": [8.05, 4.05], "room": 0}],
            },
        }
    )
    s = Session(cfg)
    s.run()
    assert s.end_reason == "budget"
    end = s.log.events("TrialEnd")[0]
    assert end["data"]["did_not_finish"] is True
    assert s.wait_ticks > 1000  # spent most of the trial holding


def test_scenario_config_validation():
    with pytest.raises(ConfigError):
        hallway_cfg(robot_spawn=4) and Session(hallway_cfg(robot_spawn=4))
    with pytest.raises(ConfigError):
        Session(hallway_cfg(obstructions=[{"pos": [1.0, 1.0], "room": 9}]))
    # hallway needs room centers; retrieval needs a base
    with pytest.raises(ConfigError):
        Session(SimConfig.from_dict({"scenario": "retrieval", "map": "hallway.txt"}))
    with pytest.raises(ConfigError):
        Session(SimConfig.from_dict({"scenario": "retrieval", "map": "retrieval.txt",
                                     "retrieval": {"slots": []}}))


def test_status_messages_track_progress():
    s = Session(hallway_cfg(robot_spawn=0))
    s.tick()
    assert s.scenario.status_message(s).startswith("Going to room")
    s.run()
    assert s.scenario.status_message(s) == "All rooms visited"


# -- retrieval ----------------------------------------------------------------


def test_gem_ownership_split_is_seeded():
    for seed in range(1, 51):
        s = Session(retrieval_cfg(seed=seed))
        owners = [g.owner for g in s.scenario.gems]
        assert owners.count("robot") == 5 and owners.count("human") == 5
        again = Session(retrieval_cfg(seed=seed))
        assert [g.owner for g in again.scenario.gems] == owners


def test_gem_ownership_overrides():
    all_robot = Session(retrieval_cfg(robot_gems=10))
    assert all(g.owner == "robot" for g in all_robot.scenario.gems)
    none_robot = Session(retrieval_cfg(robot_gems=0))
    assert all(g.owner == "human" for g in none_robot.scenario.gems)
    subset = Session(retrieval_cfg(robot_gems=5, slots=[0, 1, 2]))
    assert [g.id for g in subset.scenario.gems] == [0, 1, 2]
    assert all(g.owner == "robot" for g in subset.scenario.gems)


def test_first_target_is_nearest_by_planned_path():
    for seed in range(1, 21):
        s = Session(retrieval_cfg(seed=seed))
        spawn = s.robot.pose
        best_id, best_len = None, math.inf
        for gem in s.scenario.gems:
            if gem.owner != "robot":
                continue
            length = plan_path(s.grid, spawn, gem.position, params=s.cfg.planner).total_length
            if length < best_len:
                best_id, best_len = gem.id, length
        s.tick()
        assert s.scenario.target_id == best_id


def test_equidistant_gems_go_to_lowest_id():
    s = Session(retrieval_cfg(robot_gems=5, slots=[3, 4]))
    # same spot, same planned length: an honest tie
    s.scenario.gems[1].position = s.scenario.gems[0].position
    s.tick()
    assert s.scenario.target_id == 3
    s.run()
    assert [g[1] for g in s.gems_timeline] == [3, 4]


def test_robot_only_collects_its_current_target():
    s = Session(retrieval_cfg(robot_gems=10, slots=[0, 1, 2]))
    s.tick()
    assert s.scenario.target_id == 0
    # redirect to the far gem; the route passes near gem 1 without effect
    far = s.scenario.gems[2]
    s.scenario.target_id = far.id
    s.install_plan(plan_path(s.grid, s.robot.pose, far.position, params=s.cfg.planner))
    while not s.ended and not far.collected:
        s.tick()
    assert far.collected
    assert not s.scenario.gems[1].collected
    s.run()
    assert s.end_reason == "goal_met"
    assert [g[1] for g in s.gems_timeline] == [2, 1, 0]
    assert all(g[2] == "robot" for g in s.gems_timeline)


def test_human_dwell_timing_is_exact():
    # park the human on a gem from tick 0: 1.5 s at 50 Hz is 75 ticks
    s = Session(retrieval_cfg(robot_gems=0, human_spawn=[5.05, 6.05]))
    gem8 = s.scenario.gems[8]
    for _ in range(74):
        s.tick()
    assert not gem8.collected
    assert gem8.dwell == pytest.approx(1.48)
    s.tick()
    assert gem8.collected
    events = s.log.events("GemCollected")
    assert len(events) == 1
    assert events[0]["tick"] == 74
    assert events[0]["data"] == {"gem": 8, "collector": "human"}


def test_dwell_resets_when_human_steps_out():
    s = Session(retrieval_cfg(robot_gems=0, human_spawn=[5.05, 6.05]))
    gem8 = s.scenario.gems[8]
    for _ in range(50):
        s.tick()
    assert gem8.dwell == pytest.approx(1.0)
    s.human.pose = Pose2D(2.0, 4.0, 0.0)  # step away: progress is lost
    s.tick()
    assert gem8.dwell == 0.0
    s.human.pose = Pose2D(5.05, 6.05, 0.0)
    for _ in range(74):
        s.tick()
    assert not gem8.collected
    s.tick()
    assert gem8.collected


def sealed_box_map():
    w, h = 50, 30
    rows = [["."] * w for _ in range(h)]  # indexed bottom-up
    for gx in range(w):
        rows[0][gx] = rows[h - 1][gx] = "#"
    for gy in range(h):
        rows[gy][0] = rows[gy][w - 1] = "#"
    for gx in range(30, 45):
        rows[8][gx] = rows[21][gx] = "#"
    for gy in range(8, 22):
        rows[gy][30] = rows[gy][44] = "#"
    rows[5][5] = "B"
    rows[15][15] = "1"
    rows[15][37] = "0"  # walled in
    return "50 30 0.1\n" + "\n".join("".join(r) for r in reversed(rows)) + "\n"


def test_unreachable_gem_is_skipped_not_fatal(tmp_path):
    p = tmp_path / "sealed.txt"
    p.write_text(sealed_box_map())
    cfg = SimConfig.from_dict(
        {
            "scenario": "retrieval",
            "map": str(p),
            "tick_budget": 600,
            "retrieval": {"robot_gems": 2, "human_spawn": [1.0, 2.5]},
        }
    )
    s = Session(cfg)
    s.run()
    assert s.end_reason == "budget"
    collected = s.log.events("GemCollected")
    assert len(collected) == 1
    assert collected[0]["data"]["gem"] == 1
    assert not s.scenario.gems[0].collected
    waits = s.log.events("Wait")
    assert waits and waits[0]["data"]["reason"] == "no-path"
    assert s.log.events("TrialEnd")[0]["data"]["did_not_finish"] is True


# -- metrics ------------------------------------------------------------------


def synthetic_log():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    log.append_hash(0, "a" * 16, "Forward", 2.0, 0.013, 0.0)
    log.append_event(1, "Detour", {"branch": 1.0, "rejoin": 2.0})
    log.append_hash(1, "b" * 16, "ArcPursuit", 1.7, 0.026, 0.024)
    log.append_hash(2, "c" * 16, "Waiting", 0.9, 0.026, 0.048)
    log.append_event(3, "GoCharge", {"trigger": "waypoint"})
    log.append_hash(3, "d" * 16, "Waiting", 1.1, 0.026, 0.072)
    log.append_event(4, "GoCharge", {"trigger": "continuous"})
    log.append_event(4, "GemCollected", {"gem": 7, "collector": "human"})
    log.append_hash(4, "e" * 16, "Forward", 1.5, 0.039, 0.096)
    log.append_event(99, "TrialEnd", {"reason": "budget", "did_not_finish": True})
    return log


def test_finalize_metrics_from_log_alone():
    m = finalize_metrics(synthetic_log())
    assert m.completion_time == pytest.approx(2.0)  # end tick 99 at 50 Hz
    assert m.min_separation == 0.9
    assert m.reroute_count == 1
    assert m.wait_time == pytest.approx(0.04)  # two Waiting ticks
    assert m.battery_trips == 2
    assert m.distance_robot == 0.039
    assert m.distance_human == 0.096
    assert m.gems_timeline == ((4, 7, "human"),)


def test_wait_time_zero_without_waiting_ticks():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    log.append_hash(0, "a" * 16, "Forward", 2.0, 0.013, 0.0)
    log.append_event(0, "TrialEnd", {"reason": "goal_met", "did_not_finish": False})
    m = finalize_metrics(log)
    assert m.wait_time == 0.0
    assert m.battery_trips == 0
    assert m.gems_timeline == ()


def test_finalize_requires_well_formed_log():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    log.append_hash(0, "a" * 16, "Forward", 2.0, 0.0, 0.0)
    with pytest.raises(MalformedLogError):
        finalize_metrics(log)


def test_finalized_metrics_match_live_counters():
    for cfg_dict in (shipped_config("retrieval"), shipped_config("hallway")):
        cfg_dict["seed"] = 3
        cfg = SimConfig.from_dict(cfg_dict)
        s = Session(cfg)
        s.run()
        m = finalize_metrics(s.log)
        live = s.metrics_so_far()
        assert m.completion_time == live["completion_time"]
        assert m.min_separation == live["min_separation"]
        assert m.reroute_count == live["reroute_count"]
        assert m.wait_time == live["wait_time"]
        assert m.battery_trips == live["battery_trips"]
        assert m.distance_robot == live["distance_robot"]
        assert m.distance_human == live["distance_human"]
        assert [list(g) for g in m.gems_timeline] == live["gems_timeline"]
