"""Trial logs: line-delimited JSON, one record per line, header first.

The log is the single source of truth for a trial: inputs at the tick they
were applied, events as they fired, and one state-hash record per tick
carrying the separation/odometry samples that metrics are computed from.
Serialization is canonical (sorted keys, no spaces) so byte comparison of
two logs is meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

LOG_VERSION = "haven/1"

EVENT_KINDS = (
    "ModeChange",
    "Signal",
    "Detour",
    "Revert",
    "Wait",
    "GoCharge",
    "Stranded",
    "GemCollected",
    "ObstructionRemoved",
    "TrialEnd",
)


class MalformedLogError(ValueError):
    pass


def canonical_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class TrialLog:
    header: dict
    entries: list[dict] = field(default_factory=list)

    @classmethod
    def new(cls, config_hash: str, map_hash: str, dt: float) -> "TrialLog":
        return cls(
            header={
                "kind": "Header",
                "version": LOG_VERSION,
                "config_hash": config_hash,
                "map_hash": map_hash,
                "dt": dt,
            }
        )

    def append_input(self, tick: int, move: tuple[float, float]) -> None:
        self.entries.append(
            {"kind": "Input", "tick": tick, "move": [move[0], move[1]]}
        )

    def append_event(self, tick: int, event: str, data: dict) -> None:
        if event not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {event}")
        self.entries.append({"kind": "Event", "tick": tick, "event": event, "data": data})

    def append_hash(
        self, tick: int, state: str, mode: str, sep: float, dr: float, dh: float
    ) -> None:
        self.entries.append(
            {
                "kind": "Hash",
                "tick": tick,
                "state": state,
                "mode": mode,
                "sep": sep,
                "dr": dr,
                "dh": dh,
            }
        )

    def lines(self) -> list[str]:
        return [canonical_line(self.header)] + [canonical_line(e) for e in self.entries]

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    def events(self, kind: str | None = None) -> list[dict]:
        out = [e for e in self.entries if e["kind"] == "Event"]
        if kind is not None:
            out = [e for e in out if e["event"] == kind]
        return out

    def inputs(self) -> dict[int, tuple[float, float]]:
        """Latest input per tick (later lines win, matching live ingestion)."""
        moves: dict[int, tuple[float, float]] = {}
        for e in self.entries:
            if e["kind"] == "Input":
                moves[e["tick"]] = (e["move"][0], e["move"][1])
        return moves

    def end_tick(self) -> int:
        ends = self.events("TrialEnd")
        if len(ends) != 1 or self.entries[-1] is not ends[0]:
            raise MalformedLogError("log must contain exactly one TrialEnd, last")
        return ends[0]["tick"]

    def validate(self) -> None:
        last = -1
        for e in self.entries:
            if e["kind"] not in ("Input", "Event", "Hash"):
                raise MalformedLogError(f"unknown entry kind: {e.get('kind')!r}")
            tick = e.get("tick")
            if not isinstance(tick, int) or tick < last:
                raise MalformedLogError(f"ticks must be non-decreasing (saw {tick})")
            last = tick
        self.end_tick()


def parse_log(text: str) -> TrialLog:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedLogError("empty log")
    try:
        records = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise MalformedLogError(f"line {exc.lineno}: {exc.msg}") from exc
    header = records[0]
    if header.get("kind") != "Header":
        raise MalformedLogError("first line must be the header")
    if header.get("version") != LOG_VERSION:
        raise MalformedLogError(f"unsupported log version: {header.get('version')!r}")
    for key in ("config_hash", "map_hash", "dt"):
        if key not in header:
            raise MalformedLogError(f"header missing {key!r}")
    return TrialLog(header=header, entries=records[1:])


def read_log(path: str | Path) -> TrialLog:
    return parse_log(Path(path).read_text())
