"""Client-server wire protocol.

Messages are UTF-8 JSON objects with a "type" discriminator. encode/decode map
message values to and from JSON bodies; for raw byte streams a 4-byte
big-endian length prefix frames each body (WebSocket transports carry bodies
directly, one per frame). Unknown JSON fields are ignored on decode so old
servers tolerate newer clients.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import IO, Iterator, Mapping, Union

from . import PROTOCOL_VERSION
from .capture import RawSample
from .game import EventKind, GameEvent, GameState
from .vec import Vec3


class MalformedMessage(ValueError):
    """Bytes that do not parse into a known, well-formed message."""


class UnsupportedVersion(ValueError):
    """Hello carries a protocol version this server does not speak."""


class UnauthorizedMessageKind(ValueError):
    """Message kind not permitted for the sender's declared role."""


CLIENT_KINDS = ("patient", "therapist", "simulator")
CONTROL_ACTIONS = ("start", "pause", "resume", "end")

ERR_UNSUPPORTED_VERSION = "unsupported_version"
ERR_UNAUTHORIZED = "unauthorized"
ERR_MALFORMED = "malformed"
ERR_SLOW_CONSUMER = "slow_consumer"


@dataclass(frozen=True)
class Hello:
    client_kind: str
    protocol_version: str = PROTOCOL_VERSION


@dataclass(frozen=True)
class InputSample:
    sample: RawSample


@dataclass(frozen=True)
class Control:
    action: str


@dataclass(frozen=True)
class TherapistOverride:
    """Partial difficulty reconfiguration, applied from the next tick."""

    patch: Mapping[str, float]


@dataclass(frozen=True)
class Welcome:
    session_id: str
    config: Mapping


@dataclass(frozen=True)
class StateUpdate:
    tick: int
    t: float
    fish_pos: Vec3
    fish_vel: Vec3
    hand_pos: Vec3
    agent_mode: str
    progress: float
    task_statuses: tuple[str, ...]


@dataclass(frozen=True)
class EventNotice:
    event: GameEvent


@dataclass(frozen=True)
class Error:
    code: str
    message: str = ""


ClientMessage = Union[Hello, InputSample, Control, TherapistOverride]
ServerMessage = Union[Welcome, StateUpdate, EventNotice, Error]
Message = Union[ClientMessage, ServerMessage]

ALLOWED_BY_ROLE = {
    "patient": (Hello, InputSample, Control),
    "simulator": (Hello, InputSample, Control),
    "therapist": (Hello, TherapistOverride, Control),
}


def _to_dict(m: Message) -> dict:
    if isinstance(m, Hello):
        return {
            "type": "hello",
            "client_kind": m.client_kind,
            "protocol_version": m.protocol_version,
        }
    if isinstance(m, InputSample):
        s = m.sample
        return {"type": "input_sample", "t": s.t, "u": s.u, "v": s.v, "valid": s.valid}
    if isinstance(m, Control):
        return {"type": "control", "action": m.action}
    if isinstance(m, TherapistOverride):
        return {"type": "therapist_override", "patch": dict(m.patch)}
    if isinstance(m, Welcome):
        return {"type": "welcome", "session_id": m.session_id, "config": dict(m.config)}
    if isinstance(m, StateUpdate):
        return {
            "type": "state_update",
            "tick": m.tick,
            "t": m.t,
            "fish_pos": list(m.fish_pos),
            "fish_vel": list(m.fish_vel),
            "hand_pos": list(m.hand_pos),
            "agent_mode": m.agent_mode,
            "progress": m.progress,
            "task_statuses": list(m.task_statuses),
        }
    if isinstance(m, EventNotice):
        ev = m.event
        return {"type": "event", "kind": ev.kind.value, "t": ev.t, "data": dict(ev.data)}
    if isinstance(m, Error):
        return {"type": "error", "code": m.code, "message": m.message}
    raise MalformedMessage(f"not a protocol message: {type(m).__name__}")


def encode(m: Message) -> bytes:
    """Message value to canonical JSON body (no framing)."""
    return json.dumps(_to_dict(m), sort_keys=True, separators=(",", ":")).encode()


def decode(data: bytes | str) -> Message:
    """JSON body to message value; raises MalformedMessage on anything else."""
    try:
        d = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedMessage(f"bad JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise MalformedMessage("message must be a JSON object")
    try:
        kind = d["type"]
        if kind == "hello":
            return Hello(client_kind=d["client_kind"], protocol_version=d["protocol_version"])
        if kind == "input_sample":
            return InputSample(
                RawSample(t=d["t"], u=d["u"], v=d["v"], valid=bool(d["valid"]))
            )
        if kind == "control":
            action = d["action"]
            if action not in CONTROL_ACTIONS:
                raise MalformedMessage(f"unknown control action: {action!r}")
            return Control(action=action)
        if kind == "therapist_override":
            return TherapistOverride(patch=dict(d["patch"]))
        if kind == "welcome":
            return Welcome(session_id=d["session_id"], config=dict(d["config"]))
        if kind == "state_update":
            return StateUpdate(
                tick=d["tick"],
                t=d["t"],
                fish_pos=Vec3(*d["fish_pos"]),
                fish_vel=Vec3(*d["fish_vel"]),
                hand_pos=Vec3(*d["hand_pos"]),
                agent_mode=d["agent_mode"],
                progress=d["progress"],
                task_statuses=tuple(d["task_statuses"]),
            )
        if kind == "event":
            return EventNotice(GameEvent(kind=EventKind(d["kind"]), t=d["t"], data=d["data"]))
        if kind == "error":
            return Error(code=d["code"], message=d.get("message", ""))
    except MalformedMessage:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedMessage(f"bad message fields: {exc}") from exc
    raise MalformedMessage(f"unknown message type: {d.get('type')!r}")


def check_version(hello: Hello) -> None:
    if hello.protocol_version != PROTOCOL_VERSION:
        raise UnsupportedVersion(
            f"server speaks {PROTOCOL_VERSION}, client sent {hello.protocol_version!r}"
        )
    if hello.client_kind not in CLIENT_KINDS:
        raise MalformedMessage(f"unknown client kind: {hello.client_kind!r}")


def check_authorized(role: str, m: ClientMessage) -> None:
    allowed = ALLOWED_BY_ROLE.get(role, ())
    if not isinstance(m, allowed):
        raise UnauthorizedMessageKind(f"{type(m).__name__} not allowed for role {role!r}")


def state_update_from(state: GameState) -> StateUpdate:
    return StateUpdate(
        tick=state.tick,
        t=state.t,
        fish_pos=state.fish.pos,
        fish_vel=state.fish.vel,
        hand_pos=state.hand.pos,
        agent_mode=state.agent.mode.value,
        progress=state.progress.fraction,
        task_statuses=tuple(task.status.value for task in state.tasks.tasks),
    )


class Broadcaster:
    """Downsamples StateUpdates to the broadcast rate; events always pass.

    All of a tick's EventNotices are emitted before that tick's StateUpdate,
    so a subscriber never sees a state newer than the last event it received.
    """

    def __init__(self, tick_rate: float, rate: float) -> None:
        if rate > tick_rate:
            raise ValueError("broadcast rate cannot exceed the tick rate")
        self.stride = max(1, round(tick_rate / rate))

    def feed(self, state: GameState, events: list[GameEvent]) -> list[ServerMessage]:
        out: list[ServerMessage] = [EventNotice(ev) for ev in events]
        if state.tick % self.stride == 0:
            out.append(state_update_from(state))
        return out


def write_frame(fp: IO[bytes], body: bytes) -> None:
    fp.write(struct.pack(">I", len(body)))
    fp.write(body)


def read_frames(fp: IO[bytes]) -> Iterator[bytes]:
    while True:
        head = fp.read(4)
        if not head:
            return
        if len(head) < 4:
            raise MalformedMessage("truncated frame header")
        (size,) = struct.unpack(">I", head)
        body = fp.read(size)
        if len(body) < size:
            raise MalformedMessage("truncated frame body")
        yield body
