import math
import random

import pytest

from hrisim.config import SimConfig, shipped_config
from hrisim.engine import (
    ConfigMismatchError,
    ReplayDivergenceError,
    Session,
    TrialEndedError,
    replay,
    verify_replay,
)
from hrisim.geometry import Pose2D
from hrisim.motion import Mode
from hrisim.planner import plan_path
from hrisim.scenario import finalize_metrics


def retrieval_cfg(seed=1, tick_budget=9000, battery=None, **retrieval):
    cfg = {
        "scenario": "retrieval",
        "map": "retrieval.txt",
        "seed": seed,
        "tick_budget": tick_budget,
        "retrieval": retrieval,
    }
    if battery:
        cfg["battery"] = battery
    return SimConfig.from_dict(cfg)


def scripted_inputs(seed, ticks, every=40):
    """Seeded pseudo-random move commands at regular ticks."""
    rng = random.Random(seed)
    return {
        t: (rng.uniform(-1, 1), rng.uniform(-1, 1))
        for t in range(0, ticks, every)
    }


# -- determinism ---------------------------------------------------------------


def test_same_config_same_inputs_same_log():
    cfg = retrieval_cfg(seed=9, tick_budget=1200)
    inputs = scripted_inputs(5, 1200)
    a, b = Session(cfg), Session(cfg)
    a.run(inputs=inputs)
    b.run(inputs=inputs)
    assert a.log.lines() == b.log.lines()


def test_idle_robot_zero_input_is_a_fixed_point():
    # no robot gems: nothing to plan for, nobody moves, state is frozen
    s = Session(retrieval_cfg(robot_gems=0, tick_budget=200))
    s.run()
    hashes = [e for e in s.log.entries if e["kind"] == "Hash"]
    assert len(hashes) == 200
    assert len({e["state"] for e in hashes}) == 1
    assert all(e["dr"] == 0.0 and e["dh"] == 0.0 for e in hashes)
    assert all(e["mode"] == "Idle" for e in hashes)


def test_one_ulp_pose_change_flips_the_hash():
    a, b = Session(retrieval_cfg()), Session(retrieval_cfg())
    for _ in range(10):
        a.tick()
        b.tick()
    assert a.state_hash() == b.state_hash()
    pose = b.robot.pose
    b.robot.pose = Pose2D(math.nextafter(pose.x, math.inf), pose.y, pose.heading)
    assert a.state_hash() != b.state_hash()
    b.robot.pose = pose
    assert a.state_hash() == b.state_hash()


def test_snapshot_frequency_does_not_touch_state():
    cfg = retrieval_cfg(seed=4, tick_budget=400)
    inputs = scripted_inputs(7, 400)
    a, b = Session(cfg), Session(cfg)
    while not a.ended:
        if a.tick_count in inputs:
            a.queue_input(inputs[a.tick_count])
        a.tick()
        a.snapshot()  # every tick
    b.run(inputs=inputs)  # never
    assert a.log.lines() == b.log.lines()


# -- input handling --------------------------------------------------------------


def test_input_buffered_until_next_tick():
    s = Session(retrieval_cfg())
    for _ in range(3):
        s.tick()
    y0 = s.human.pose.y
    s.queue_input((0.0, 1.0))
    assert s.human.pose.y == y0  # nothing moves until the tick runs
    s.tick()
    assert s.human.pose.y == pytest.approx(y0 + 1.2 * 0.02)
    entries = [e for e in s.log.entries if e["kind"] == "Input"]
    assert entries == [{"kind": "Input", "tick": 3, "move": [0.0, 1.0]}]


def test_latest_queued_input_wins():
    s = Session(retrieval_cfg())
    s.queue_input((1.0, 0.0))
    s.queue_input((0.0, 1.0))
    s.tick()
    entries = [e for e in s.log.entries if e["kind"] == "Input"]
    assert entries == [{"kind": "Input", "tick": 0, "move": [0.0, 1.0]}]


def test_inputs_are_clamped_to_the_unit_disk():
    s = Session(retrieval_cfg())
    s.queue_input((3.0, 4.0))
    s.tick()
    entry = next(e for e in s.log.entries if e["kind"] == "Input")
    assert entry["move"] == [0.6, 0.8]
    s.queue_input((0.3, -0.4))  # already inside: unchanged
    s.tick()
    entry = [e for e in s.log.entries if e["kind"] == "Input"][-1]
    assert entry["move"] == [0.3, -0.4]


# -- replay ---------------------------------------------------------------------


def test_replay_reproduces_the_log_bit_for_bit():
    cfg = retrieval_cfg(seed=11, tick_budget=1500)
    s = Session(cfg)
    s.run(inputs=scripted_inputs(3, 1500))
    fresh = replay(s.log, cfg)
    assert fresh.lines() == s.log.lines()
    verify_replay(s.log, cfg)  # should not raise


def test_replay_refuses_foreign_config():
    cfg = retrieval_cfg(seed=1, tick_budget=300)
    s = Session(cfg)
    s.run()
    with pytest.raises(ConfigMismatchError):
        replay(s.log, retrieval_cfg(seed=2, tick_budget=300))


def test_verify_replay_names_the_first_divergent_tick():
    cfg = retrieval_cfg(seed=6, tick_budget=400)
    s = Session(cfg)
    s.run(inputs=scripted_inputs(8, 400))
    target = next(
        e for e in s.log.entries if e["kind"] == "Hash" and e["tick"] == 250
    )
    original = target["state"]
    target["state"] = ("0" if original[0] != "0" else "1") + original[1:]
    with pytest.raises(ReplayDivergenceError) as err:
        verify_replay(s.log, cfg)
    assert err.value.tick == 250


def test_replay_after_disconnect_end():
    cfg = retrieval_cfg(seed=2)
    s = Session(cfg)
    s.run(ticks=120, inputs={10: (1.0, 0.0), 80: (0.0, -1.0)})
    s.end_trial_now()
    s.log.validate()
    end = s.log.events("TrialEnd")[0]
    assert end["tick"] == 119 and end["data"]["reason"] == "disconnect"
    assert replay(s.log, cfg).lines() == s.log.lines()
    with pytest.raises(TrialEndedError):
        s.tick()


def test_metrics_are_a_pure_function_of_the_log():
    cfg = retrieval_cfg(seed=13, tick_budget=1500)
    s = Session(cfg)
    s.run(inputs=scripted_inputs(9, 1500))
    assert finalize_metrics(replay(s.log, cfg)) == finalize_metrics(s.log)


# -- battery integration ----------------------------------------------------------


def leg_and_home(cfg):
    """Planned out-and-back lengths for the single-gem trip, the same way the
    waypoint check sees them."""
    s = Session(cfg)
    gem = s.scenario.gems[0].position
    leg = plan_path(s.grid, s.robot.pose, gem, params=s.cfg.planner)
    end_heading = leg.primitives[-1].end_heading if leg.primitives else 0.0
    home = plan_path(
        s.grid, Pose2D(gem[0], gem[1], end_heading), s.grid.base, params=s.cfg.planner
    )
    return leg.total_length, home.total_length


def test_waypoint_check_trigger_is_exact():
    base_cfg = retrieval_cfg(robot_gems=1, slots=[5])
    leg, home = leg_and_home(base_cfg)
    need = leg + home

    # remaining range exactly equal: proceed without a charge trip
    exact = retrieval_cfg(
        robot_gems=1, slots=[5],
        battery={"mode": "AtWaypointCheck", "capacity": 60.0, "initial": need},
    )
    s = Session(exact)
    s.run()
    assert s.end_reason == "goal_met"
    assert s.log.events("GoCharge") == []

    # one ulp short: the trip home comes first
    shy = retrieval_cfg(
        robot_gems=1, slots=[5],
        battery={"mode": "AtWaypointCheck", "capacity": 60.0,
                 "initial": math.nextafter(need, -math.inf)},
    )
    s = Session(shy)
    s.run()
    assert s.end_reason == "goal_met"
    charges = s.log.events("GoCharge")
    assert len(charges) == 1
    assert charges[0]["tick"] == 0
    assert charges[0]["data"]["trigger"] == "waypoint"
    assert not s.log.events("Stranded")


def test_waypoint_battery_tours_all_gems_without_stranding():
    for seed in (1, 2, 3):
        cfg = retrieval_cfg(
            seed=seed, robot_gems=10, tick_budget=20000,
            battery={"mode": "AtWaypointCheck", "capacity": 26.0, "initial": 13.0},
        )
        s = Session(cfg)
        s.run()
        assert s.end_reason == "goal_met"
        assert not s.log.events("Stranded")
        charges = s.log.events("GoCharge")
        assert charges and all(e["data"]["trigger"] == "waypoint" for e in charges)
        # each charge trip actually reaches the dock
        mode_events = s.log.events("ModeChange")
        charging_ticks = [e["tick"] for e in mode_events if e["data"]["to"] == "Charging"]
        assert len(charging_ticks) == len(charges)
        verify_replay(s.log, cfg)


def test_continuous_monitor_never_strands():
    rng = random.Random(99)
    for seed in range(1, 9):
        initial = rng.uniform(8.0, 20.0)
        cfg = retrieval_cfg(
            seed=seed, robot_gems=10, tick_budget=20000,
            battery={"mode": "ContinuousMonitor", "capacity": 40.0, "initial": initial},
        )
        s = Session(cfg)
        batt = s.robot.battery
        while not s.ended:
            s.tick()
            assert not s.stranded
            if not batt.at_base(s.robot.pose.position):
                assert batt.remaining_range > 0.0
        assert s.end_reason == "goal_met"
        for e in s.log.events("GoCharge"):
            assert e["data"]["trigger"] == "continuous"


def test_charge_trip_from_the_dock_itself():
    # trigger with the robot already parked on the base: no travel needed
    cfg = retrieval_cfg(
        robot_gems=1, slots=[0],
        battery={"mode": "AtWaypointCheck", "capacity": 60.0, "initial": 1.0},
    )
    s = Session(cfg)
    s.tick()
    assert s.charging
    assert not s.returning
    s.run()
    assert s.end_reason == "goal_met"


# -- blocking, detours, reverts ----------------------------------------------------


def blocked_path_cfg(seed=1, **retrieval):
    retrieval.setdefault("robot_gems", 1)
    retrieval.setdefault("slots", [2])
    retrieval.setdefault("human_spawn", [3.0, 0.936])  # parked on the route
    return retrieval_cfg(seed=seed, **retrieval)


def test_far_blocker_triggers_detour_and_robot_passes():
    s = Session(blocked_path_cfg())
    s.run()
    assert s.end_reason == "goal_met"
    detours = s.log.events("Detour")
    assert detours
    assert s.log.events("Revert") == []  # blocker never moved
    assert s.min_separation > 0.45
    assert s.scenario.gems[0].collected


def test_revert_reinstates_the_original_plan():
    s = Session(blocked_path_cfg())
    while not s.ended and not s.log.events("Detour"):
        s.tick()
    detour_tick = s.log.events("Detour")[0]["tick"]
    original = s.robot.original_plan
    assert original is not None
    s.human.pose = Pose2D(3.0, 6.5, 0.0)  # blocker walks away
    while not s.ended and not s.log.events("Revert"):
        s.tick()
    reverts = s.log.events("Revert")
    assert reverts
    assert reverts[0]["tick"] - detour_tick >= 25  # cooldown must expire first
    assert s.robot.plan is original
    assert s.detour_ctx is None
    s.run()
    assert s.end_reason == "goal_met"


def test_near_blocker_waits_then_resumes_quickly():
    s = Session(blocked_path_cfg(human_spawn=[1.5, 0.8]))
    while not s.ended and s.robot.mode is not Mode.WAITING:
        s.tick()
        assert s.tick_count < 200
    waits = s.log.events("Wait")
    assert waits and waits[0]["data"]["reason"] in ("human", "safety")
    for _ in range(60):
        s.tick()
    assert s.robot.mode is Mode.WAITING  # sticky while the human stays put

    s.human.pose = Pose2D(1.5, 6.0, 0.0)
    resumed_at = None
    for _ in range(50):
        s.tick()
        if s.robot.mode in (Mode.FORWARD, Mode.ARC_PURSUIT, Mode.ROTATE_IN_PLACE):
            resumed_at = s.tick_count
            break
    assert resumed_at is not None  # moving again within one second
    s.run()
    assert s.end_reason == "goal_met"
    assert finalize_metrics(s.log).wait_time > 0.0


def test_translation_respects_the_safety_bubble():
    # a chasing human: the robot may never translate into the block radius
    for seed in (3, 4, 5):
        cfg = retrieval_cfg(seed=seed, robot_gems=10, tick_budget=600)
        s = Session(cfg)
        violations = []
        while not s.ended:
            chase = (s.robot.pose.x - s.human.pose.x, s.robot.pose.y - s.human.pose.y)
            s.queue_input(chase)
            before = s.dist_robot
            s.tick()
            translated = s.dist_robot > before
            sep = s.robot.pose.distance_to(s.human.position)
            if translated and sep < 0.599:
                violations.append((s.tick_count, sep))
        assert violations == []
        assert s.wait_ticks > 0  # the gate actually engaged


def test_detours_resolve_by_revert_or_completion():
    for seed in range(1, 7):
        cfg = retrieval_cfg(seed=seed, robot_gems=10, tick_budget=4000)
        rng = random.Random(seed * 17)
        s = Session(cfg)
        while not s.ended:
            if s.tick_count % 25 == 0:
                # drift roughly toward the robot with some wobble
                dx = s.robot.pose.x - s.human.pose.x + rng.uniform(-2, 2)
                dy = s.robot.pose.y - s.human.pose.y + rng.uniform(-2, 2)
                s.queue_input((dx, dy))
            s.tick()
        detours = len(s.log.events("Detour"))
        reverts = len(s.log.events("Revert"))
        assert reverts <= detours
        assert not s.log.events("Stranded")
        # a trial that ends cleanly leaves no dangling detour bookkeeping
        if s.end_reason == "goal_met":
            assert s.detour_ctx is None


# -- state hash coverage ------------------------------------------------------------


def test_state_hash_sees_battery_and_scenario_state():
    cfg = retrieval_cfg(
        robot_gems=5,
        battery={"mode": "ContinuousMonitor", "capacity": 40.0, "initial": 20.0},
    )
    s = Session(cfg)
    h0 = s.state_hash()
    assert s.state_hash() == h0  # pure

    batt = s.robot.battery
    old = batt.remaining_range
    batt.remaining_range = math.nextafter(old, 0.0)
    assert s.state_hash() != h0
    batt.remaining_range = old
    assert s.state_hash() == h0

    gem = s.scenario.gems[0]
    gem.dwell = math.nextafter(gem.dwell, 1.0)
    assert s.state_hash() != h0
    gem.dwell = 0.0
    assert s.state_hash() == h0

    s.human.input = (0.0, math.nextafter(0.0, 1.0))
    assert s.state_hash() != h0
