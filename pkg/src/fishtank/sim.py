"""Headless session harness.

Runs one complete session with a simulated patient over an in-process
loopback: every patient sample is encoded as a protocol message and decoded
server-side, and every broadcast message travels back the same way, so
calibration, filtering, transport, and mechanics are exercised exactly as in a
networked session, minus the sockets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, IO

from .capture import CalibrationMap
from .config import GameConfig
from .game import Engine, GameEvent, GameState
from .patient import Patient, PatientModel
from .protocol import Broadcaster, InputSample, StateUpdate, Welcome, decode, encode
from .session import SessionWriter

TickHook = Callable[[GameState, "list[GameEvent]"], None]


@dataclass(frozen=True)
class RunResult:
    session_id: str
    final_state: GameState
    events: list[GameEvent]
    ticks: int


def run_session(
    cfg: GameConfig,
    model: PatientModel,
    duration: float,
    session_id: str = "sim",
    out: IO[str] | None = None,
    broadcast_rate: float = 20.0,
    hand_trace_rate: float = 10.0,
    on_tick: TickHook | None = None,
) -> RunResult:
    """Drive a full session for `duration` simulated seconds.

    Timestamps are logical (tick / tick_rate), so identical inputs produce
    byte-identical session files.
    """
    engine = Engine(cfg)
    broadcaster = Broadcaster(cfg.tick_rate, broadcast_rate)
    writer = (
        SessionWriter(
            out,
            session_id=session_id,
            cfg=cfg,
            started_at=0.0,
            hand_trace_rate=hand_trace_rate,
        )
        if out is not None
        else None
    )

    # the patient joins as a client: greet it, let it calibrate itself
    welcome = decode(encode(Welcome(session_id=session_id, config=cfg.to_dict())))
    assert isinstance(welcome, Welcome)
    patient = Patient(model, calibration=CalibrationMap.from_dict(welcome.config["calibration"]))

    events = engine.start()
    all_events = list(events)
    if writer is not None:
        for ev in events:
            writer.record_event(ev)
        writer.record_state(engine.state)

    dt = cfg.dt
    ticks = max(0, round(duration * cfg.tick_rate))
    for tick in range(1, ticks + 1):
        t = tick / cfg.tick_rate
        wire = encode(InputSample(patient.step(t, dt)))
        msg = decode(wire)
        assert isinstance(msg, InputSample)
        if writer is not None:
            writer.record_raw(tick, msg.sample)
        state, tick_events = engine.tick((msg.sample,))
        all_events.extend(tick_events)
        if writer is not None:
            for ev in tick_events:
                writer.record_event(ev)
            writer.record_state(state)
        for out_msg in broadcaster.feed(state, tick_events):
            reply = decode(encode(out_msg))
            if isinstance(reply, StateUpdate):
                patient.observe(reply)
        if on_tick is not None:
            on_tick(state, tick_events)

    end_events = engine.end("duration")
    all_events.extend(end_events)
    if writer is not None:
        for ev in end_events:
            writer.record_event(ev)
        writer.record_state(engine.state, force=True)
        writer.close()
    return RunResult(
        session_id=session_id,
        final_state=engine.state,
        events=all_events,
        ticks=ticks,
    )
