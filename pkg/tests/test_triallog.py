import json

import pytest

from hrisim.triallog import (
    EVENT_KINDS,
    MalformedLogError,
    TrialLog,
    canonical_line,
    parse_log,
    read_log,
)


def minimal_log():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    log.append_input(0, (1.0, 0.0))
    log.append_hash(0, "a" * 16, "Forward", 2.0, 0.013, 0.024)
    log.append_event(1, "Detour", {"branch": 1.5, "rejoin": 3.0})
    log.append_hash(1, "b" * 16, "ArcPursuit", 1.9, 0.026, 0.048)
    log.append_event(1, "TrialEnd", {"reason": "goal_met", "did_not_finish": False})
    return log


def test_roundtrip_is_bit_identical():
    log = minimal_log()
    text = log.dumps()
    back = parse_log(text)
    assert back.dumps() == text
    assert back.header == log.header
    assert back.entries == log.entries


def test_canonical_lines_sort_keys():
    line = canonical_line({"tick": 3, "kind": "Input", "move": [0.0, 1.0]})
    assert line == '{"kind":"Input","move":[0.0,1.0],"tick":3}'


def test_write_and_read(tmp_path):
    log = minimal_log()
    p = tmp_path / "trial.jsonl"
    log.write(p)
    assert read_log(p).dumps() == log.dumps()
    # one JSON object per line, header first
    lines = p.read_text().splitlines()
    assert json.loads(lines[0])["kind"] == "Header"
    assert all(json.loads(ln) for ln in lines)


def test_header_fields():
    log = minimal_log()
    assert log.header["version"] == "haven/1"
    assert log.header["config_hash"] == "c" * 16
    assert log.header["map_hash"] == "m" * 16
    assert log.header["dt"] == 0.02


def test_event_kind_closed_set():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    with pytest.raises(ValueError):
        log.append_event(0, "Teleport", {})
    for kind in EVENT_KINDS:
        log.append_event(0, kind, {})
    assert len(log.events()) == len(EVENT_KINDS)
    assert len(log.events("Detour")) == 1


def test_inputs_latest_wins():
    log = TrialLog.new("c" * 16, "m" * 16, 0.02)
    log.append_input(5, (1.0, 0.0))
    log.append_input(5, (0.0, 1.0))
    log.append_input(7, (0.5, 0.5))
    assert log.inputs() == {5: (0.0, 1.0), 7: (0.5, 0.5)}


def test_end_tick_requires_single_trailing_end():
    log = minimal_log()
    assert log.end_tick() == 1
    log.validate()

    no_end = TrialLog.new("c" * 16, "m" * 16, 0.02)
    no_end.append_hash(0, "a" * 16, "Idle", 1.0, 0.0, 0.0)
    with pytest.raises(MalformedLogError):
        no_end.end_tick()

    not_last = minimal_log()
    not_last.append_hash(2, "c" * 16, "Idle", 1.0, 0.0, 0.0)
    with pytest.raises(MalformedLogError):
        not_last.end_tick()

    doubled = minimal_log()
    doubled.append_event(2, "TrialEnd", {"reason": "budget", "did_not_finish": True})
    with pytest.raises(MalformedLogError):
        doubled.end_tick()


def test_validate_rejects_tick_regression():
    log = minimal_log()
    log.entries.insert(1, {"kind": "Hash", "tick": 5, "state": "x", "mode": "Idle",
                           "sep": 1.0, "dr": 0.0, "dh": 0.0})
    with pytest.raises(MalformedLogError):
        log.validate()


def test_parse_rejects_malformed_text():
    with pytest.raises(MalformedLogError):
        parse_log("")
    with pytest.raises(MalformedLogError):
        parse_log("not json\n")
    with pytest.raises(MalformedLogError):
        parse_log('{"kind":"Hash","tick":0}\n')  # header missing
    good = minimal_log().dumps()
    bad_version = good.replace("haven/1", "haven/9")
    with pytest.raises(MalformedLogError):
        parse_log(bad_version)
    headerless = json.loads(good.splitlines()[0])
    del headerless["config_hash"]
    with pytest.raises(MalformedLogError):
        parse_log(canonical_line(headerless) + "\n" + "\n".join(good.splitlines()[1:]))
