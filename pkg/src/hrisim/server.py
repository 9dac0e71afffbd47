"""Live session server: one WebSocket per participant, engine-authoritative.

Frames are single JSON objects tagged by "kind" (protocol "haven/1", see
PROTOCOL.md). The client only ever supplies movement vectors; they reach the
simulation through the engine's buffered-input path, so every live session
leaves a replayable trial log. Each started session persists exactly one log
file, disconnects and backpressure cutoffs included.
"""

from __future__ import annotations

import asyncio
import json
import os
import random
import secrets
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .config import PROTOCOL_VERSION, ConfigError, SimConfig, shipped_config
from .engine import Session
from .scenario import finalize_metrics

STALE_TICKS = 25
GRACE_SECONDS = 3.0
BACKPRESSURE_SECONDS = 2.0
MAX_SESSIONS = 64
DEFAULT_DECIMATION = 2

app = FastAPI(title="hrisim session server")

_active_sessions = 0


def _turbo() -> bool:
    # no wall-clock pacing: used by tests and batch drivers
    return bool(os.environ.get("HAVEN_TURBO"))


def _log_dir() -> Path:
    return Path(os.environ.get("HAVEN_LOG_DIR", "logs"))


def _session_id() -> str:
    return f"{time.strftime('%Y%m%d-%H%M%S')}-{secrets.token_hex(4)}"


@app.get("/healthz")
async def healthz() -> PlainTextResponse:
    return PlainTextResponse("ok")


def _frame(kind: str, **fields) -> str:
    return json.dumps({"kind": kind, **fields}, sort_keys=True, separators=(",", ":"))


class _Conn:
    """Per-connection state shared between the reader and the tick loop."""

    def __init__(self, ws: WebSocket, decimation: int):
        self.ws = ws
        self.decimation = decimation
        self.out: asyncio.Queue[str] = asyncio.Queue(
            maxsize=max(2, int(BACKPRESSURE_SECONDS * 50 / decimation))
        )
        self.latest_input: tuple[int, tuple[float, float]] | None = None
        self.got_input = asyncio.Event()
        self.disconnected = False
        self.violation: str | None = None

    def send(self, frame: str) -> bool:
        """Queue a frame; False means the client fell 2 s behind."""
        try:
            self.out.put_nowait(frame)
            return True
        except asyncio.QueueFull:
            return False


async def _sender(conn: _Conn) -> None:
    try:
        while True:
            frame = await conn.out.get()
            await conn.ws.send_text(frame)
    except Exception:
        # socket gone; the reader flags the disconnect for the tick loop
        return


async def _reader(conn: _Conn) -> None:
    while True:
        try:
            text = await conn.ws.receive_text()
        except (WebSocketDisconnect, RuntimeError):
            conn.disconnected = True
            conn.got_input.set()
            return
        try:
            msg = json.loads(text)
            kind = msg.get("kind")
        except (ValueError, AttributeError):
            conn.violation = "malformed frame"
            conn.got_input.set()
            return
        if kind == "Input":
            move = msg.get("move")
            tick = msg.get("tick")
            if (
                not isinstance(move, (list, tuple)) or len(move) != 2
                or not all(isinstance(v, (int, float)) for v in move)
                or not isinstance(tick, int)
            ):
                conn.violation = "malformed Input"
                conn.got_input.set()
                return
            conn.latest_input = (tick, (float(move[0]), float(move[1])))
            conn.got_input.set()
        elif kind == "Ping":
            conn.send(_frame("Pong", nonce=msg.get("nonce")))
        elif kind == "Join":
            conn.violation = "duplicate Join"
            conn.got_input.set()
            return
        else:
            conn.violation = f"unknown message kind: {kind!r}"
            conn.got_input.set()
            return


async def _refuse(ws: WebSocket, error: str, detail: str) -> None:
    """Best-effort error frame and close before a session exists."""
    try:
        await ws.send_text(_frame("Error", error=error, detail=detail))
        await ws.close()
    except (WebSocketDisconnect, RuntimeError):
        pass


def _persist(session: Session, session_id: str) -> None:
    directory = _log_dir()
    directory.mkdir(parents=True, exist_ok=True)
    session.log.write(directory / f"{session_id}.jsonl")


async def _expect_join(ws: WebSocket) -> dict | None:
    try:
        text = await asyncio.wait_for(ws.receive_text(), timeout=30.0)
        msg = json.loads(text)
    except (asyncio.TimeoutError, ValueError):
        return None
    return msg if isinstance(msg, dict) else None


@app.websocket("/session")
async def session_socket(ws: WebSocket) -> None:
    global _active_sessions
    await ws.accept()

    try:
        msg = await _expect_join(ws)
    except (WebSocketDisconnect, RuntimeError):
        return
    if msg is None or msg.get("kind") != "Join":
        await _refuse(ws, "protocol-violation", "first frame must be Join")
        return
    if _active_sessions >= MAX_SESSIONS:
        await _refuse(ws, "capacity-exceeded", "")
        return

    scenario = msg.get("scenario")
    try:
        cfg_dict = shipped_config(str(scenario))
    except ConfigError:
        await _refuse(ws, "unknown-scenario", str(scenario))
        return

    params = ws.query_params
    if "seed" in params:
        try:
            cfg_dict["seed"] = int(params["seed"])
        except ValueError:
            await _refuse(ws, "bad-seed", params["seed"])
            return
    else:
        cfg_dict["seed"] = random.SystemRandom().randrange(2**63)
    try:
        decimation = max(1, min(25, int(params.get("decimation", DEFAULT_DECIMATION))))
    except ValueError:
        decimation = DEFAULT_DECIMATION

    try:
        cfg = SimConfig.from_dict(cfg_dict)
        session = Session(cfg)
    except ConfigError as exc:
        await _refuse(ws, "bad-config", str(exc))
        return

    session_id = _session_id()
    conn = _Conn(ws, decimation)
    _active_sessions += 1
    sender = None
    reader = None
    persisted = False
    try:
        await ws.send_text(
            _frame(
                "Welcome",
                session=session_id,
                protocol=PROTOCOL_VERSION,
                config=cfg.raw,
                map=cfg.grid.source_text,
            )
        )
        sender = asyncio.create_task(_sender(conn))
        reader = asyncio.create_task(_reader(conn))
        await _run_session(session, conn)
        _persist(session, session_id)
        persisted = True
    except WebSocketDisconnect:
        pass
    finally:
        _active_sessions -= 1
        if sender is not None:
            sender.cancel()
        if reader is not None:
            reader.cancel()
        if not session.ended:
            session.end_trial_now("disconnect")
        if not persisted:
            _persist(session, session_id)
        try:
            await ws.close()
        except (WebSocketDisconnect, RuntimeError):
            pass


async def _run_session(session: Session, conn: _Conn) -> None:
    # paused until the participant moves, or a short grace period expires
    grace = 0.05 if _turbo() else GRACE_SECONDS
    try:
        await asyncio.wait_for(conn.got_input.wait(), timeout=grace)
    except asyncio.TimeoutError:
        pass

    dt = session.dt
    next_deadline = time.monotonic() + dt
    logged = len(session.log.entries)
    while not session.ended:
        if conn.disconnected:
            session.end_trial_now("disconnect")
            break
        if conn.violation is not None:
            conn.send(_frame("Error", error="protocol-violation", detail=conn.violation))
            session.end_trial_now("disconnect")
            break

        if conn.latest_input is not None:
            tick, move = conn.latest_input
            conn.latest_input = None
            if tick < session.tick_count - STALE_TICKS:
                conn.send(_frame("Event", tick=session.tick_count,
                                 event="StaleInput", data={"tick": tick}))
            else:
                session.queue_input(move)

        session.tick()

        ok = True
        for entry in session.log.entries[logged:]:
            if entry["kind"] == "Event":
                ok = conn.send(_frame("Event", tick=entry["tick"],
                                      event=entry["event"], data=entry["data"])) and ok
        logged = len(session.log.entries)
        if ok and session.tick_count % conn.decimation == 0:
            ok = conn.send(_frame("Snapshot", **session.snapshot()))
        if not ok:
            # two seconds of undelivered frames: cut the session loose
            session.end_trial_now("disconnect")
            break

        if _turbo():
            # free-run, but stay in lockstep with a client that keeps up so a
            # scripted session never sees stale snapshots; a lagging client
            # gets no pacing favors and hits the backpressure cutoff instead
            await asyncio.sleep(0)
            waited = 0
            while (0 < conn.out.qsize() <= 4 and waited < 200
                   and not conn.disconnected):
                await asyncio.sleep(0.001)
                waited += 1
        else:
            now = time.monotonic()
            await asyncio.sleep(max(0.0, next_deadline - now))
            next_deadline = max(next_deadline + dt, now)

    if session.ended and session.end_reason != "disconnect":
        metrics = finalize_metrics(session.log).to_dict()
        conn.send(_frame("End", reason=session.end_reason, metrics=metrics))
    # bounded drain so tail frames (End, Error) reach a live client
    waited = 0
    while not conn.out.empty() and waited < 200 and not conn.disconnected:
        await asyncio.sleep(0.01)
        waited += 1


# registered last so /session and /healthz keep precedence over the catch-all
_static_dir = os.environ.get("HAVEN_STATIC_DIR")
if _static_dir:
    app.mount("/", StaticFiles(directory=_static_dir, html=True), name="static")
