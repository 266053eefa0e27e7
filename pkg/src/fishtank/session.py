"""Session persistence and therapist metrics.

One append-only JSONL file per session: a header line with the full config
snapshot, then raw input samples (tagged with the tick that consumed them),
a downsampled hand trace, game events, and therapist overrides, in write
order. Every line is a complete JSON object, so a crash costs at most the
final partial line, and a session can be re-executed from its own file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO, Mapping

from .agent import AgentMode
from .capture import HandState, RawSample
from .config import GameConfig
from .game import Engine, EventKind, GameEvent, GameState
from .vec import Vec3


class SessionClosed(RuntimeError):
    """Write attempted after the session file was finalized."""


class InsufficientData(ValueError):
    """Metrics requested from a record without enough samples."""


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


class SessionWriter:
    """Single writer for one session file; every append is flushed whole."""

    def __init__(
        self,
        fp: IO[str],
        session_id: str,
        cfg: GameConfig,
        patient_alias: str = "anonymous",
        started_at: float = 0.0,
        hand_trace_rate: float = 10.0,
    ) -> None:
        self._fp = fp
        self._closed = False
        self._stride = max(1, round(cfg.tick_rate / hand_trace_rate))
        self._last_state_tick: int | None = None
        self._write(
            {
                "kind": "header",
                "format": 1,
                "session_id": session_id,
                "patient": patient_alias,
                "started_at": started_at,
                "hand_trace_rate": hand_trace_rate,
                "config": cfg.to_dict(),
            }
        )

    def _write(self, obj: dict) -> None:
        if self._closed:
            raise SessionClosed("session file already closed")
        self._fp.write(_dump(obj))
        self._fp.flush()

    def record_raw(self, tick: int, s: RawSample) -> None:
        self._write({"kind": "raw", "tick": tick, "t": s.t, "u": s.u, "v": s.v, "valid": s.valid})

    def record_event(self, ev: GameEvent) -> None:
        self._write({"kind": "event", "event": ev.kind.value, "t": ev.t, "data": dict(ev.data)})

    def record_override(self, tick: int, patch: Mapping[str, float]) -> None:
        self._write({"kind": "override", "tick": tick, "patch": dict(patch)})

    def record_state(self, state: GameState, force: bool = False) -> None:
        """Store the hand pose, downsampled to the trace rate.

        `force` writes regardless of the stride (used for the final state, so
        the trace always ends exactly where the session did); a tick is never
        written twice.
        """
        if state.tick == self._last_state_tick:
            return
        if state.tick % self._stride != 0 and not force:
            return
        self._last_state_tick = state.tick
        hand = state.hand
        self._write(
            {
                "kind": "hand",
                "t": state.t,
                "pos": list(hand.pos),
                "vel": list(hand.vel),
                "speed": hand.speed,
                "tracked": not state.tracking_lost,
            }
        )

    def close(self) -> None:
        self._closed = True


@dataclass
class SessionRecord:
    """A session file loaded back into memory."""

    header: dict | None
    events: list[GameEvent] = field(default_factory=list)
    hand_trace: list[HandState] = field(default_factory=list)
    hand_tracked: list[bool] = field(default_factory=list)
    raw: list[tuple[int, RawSample]] = field(default_factory=list)
    overrides: list[tuple[int, dict]] = field(default_factory=list)
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return self.header is not None

    @property
    def config(self) -> GameConfig:
        if self.header is None:
            raise InsufficientData("record has no header")
        return GameConfig.from_dict(self.header["config"])

    @property
    def session_id(self) -> str:
        return self.header["session_id"] if self.header else ""

    def ended_at(self) -> float | None:
        for ev in reversed(self.events):
            if ev.kind is EventKind.SESSION_ENDED:
                return ev.t
        return None


def load_session(fp: IO[str]) -> SessionRecord:
    """Read a session file, salvaging every complete line.

    A final line without a newline (crash truncation) or with broken JSON is
    dropped and flagged; events are re-sorted by time in case writers
    interleaved.
    """
    record = SessionRecord(header=None)
    data = fp.read()
    lines = data.split("\n")
    tail = lines.pop()
    if tail:
        record.truncated = True
    for line in lines:
        if not line:
            continue
        try:
            d = json.loads(line)
        except ValueError:
            record.truncated = True
            continue
        kind = d.get("kind")
        if kind == "header" and record.header is None:
            record.header = d
        elif kind == "event":
            record.events.append(
                GameEvent(kind=EventKind(d["event"]), t=d["t"], data=d["data"])
            )
        elif kind == "hand":
            record.hand_trace.append(
                HandState(
                    pos=Vec3(*d["pos"]), vel=Vec3(*d["vel"]), speed=d["speed"], t=d["t"]
                )
            )
            record.hand_tracked.append(bool(d.get("tracked", True)))
        elif kind == "raw":
            record.raw.append(
                (d["tick"], RawSample(t=d["t"], u=d["u"], v=d["v"], valid=d["valid"]))
            )
        elif kind == "override":
            record.overrides.append((d["tick"], d["patch"]))
    if record.header is None:
        record.truncated = True
    record.events.sort(key=lambda ev: ev.t)
    return record


@dataclass(frozen=True)
class SessionMetrics:
    movement_volume: float
    mean_speed: float
    peak_speed: float
    task_times: dict[str, float]
    endorsed_touches: int
    occupancy: dict[str, float]
    tracking_loss: float

    def to_dict(self) -> dict:
        return {
            "movement_volume": self.movement_volume,
            "mean_speed": self.mean_speed,
            "peak_speed": self.peak_speed,
            "task_times": dict(self.task_times),
            "endorsed_touches": self.endorsed_touches,
            "occupancy": dict(self.occupancy),
            "tracking_loss": self.tracking_loss,
        }


def compute_metrics(record: SessionRecord) -> SessionMetrics:
    """Derive the therapist summary from a loaded record.

    Path length sums hand-trace displacements; occupancy integrates the
    transition log over the session span; task times pair activation with
    completion events.
    """
    trace = record.hand_trace
    if len(trace) < 2:
        raise InsufficientData("need at least 2 hand samples")
    volume = 0.0
    prev = trace[0]
    peak = trace[0].speed
    for cur in trace[1:]:
        volume += cur.pos.sub(prev.pos).norm()
        peak = max(peak, cur.speed)
        prev = cur
    span = trace[-1].t - trace[0].t
    mean = volume / span if span > 0 else 0.0

    start_t = 0.0
    end_t = record.ended_at()
    if end_t is None:
        end_t = max(trace[-1].t, record.events[-1].t if record.events else 0.0)

    occupancy = {mode.value: 0.0 for mode in AgentMode}
    mode = AgentMode.WANDER.value
    mark = start_t
    lost_time = 0.0
    # tracking starts unlocked only when the log shows a first acquisition
    lost_since: float | None = None
    for ev in record.events:
        if ev.kind is EventKind.TRACKING_RECOVERED:
            lost_since = start_t
            break
        if ev.kind is EventKind.TRACKING_LOST:
            break
    task_started: dict[str, float] = {}
    task_times: dict[str, float] = {}
    endorsed = 0
    for ev in record.events:
        if ev.kind is EventKind.AGENT_TRANSITION:
            occupancy[mode] += ev.t - mark
            mode = str(ev.data["to"])
            mark = ev.t
        elif ev.kind is EventKind.TOUCH_ENDORSED:
            endorsed += 1
        elif ev.kind is EventKind.TASK_ACTIVATED:
            task_started[str(ev.data["zone"])] = ev.t
        elif ev.kind is EventKind.TASK_COMPLETED:
            zone = str(ev.data["zone"])
            if zone in task_started:
                task_times[zone] = ev.t - task_started[zone]
        elif ev.kind is EventKind.TRACKING_LOST:
            lost_since = ev.t
        elif ev.kind is EventKind.TRACKING_RECOVERED:
            if lost_since is not None:
                lost_time += ev.t - lost_since
                lost_since = None
    occupancy[mode] += end_t - mark
    if lost_since is not None:
        lost_time += end_t - lost_since
    total = end_t - start_t
    if total > 0:
        occupancy = {k: v / total for k, v in occupancy.items()}
    else:
        occupancy = {k: (1.0 if k == mode else 0.0) for k in occupancy}

    return SessionMetrics(
        movement_volume=volume,
        mean_speed=mean,
        peak_speed=peak,
        task_times=task_times,
        endorsed_touches=endorsed,
        occupancy=occupancy,
        tracking_loss=lost_time,
    )


def render_metrics(m: SessionMetrics) -> str:
    lines = [
        "Session summary",
        f"  movement volume: {m.movement_volume:.3f} m",
        f"  mean speed:      {m.mean_speed:.3f} m/s",
        f"  peak speed:      {m.peak_speed:.3f} m/s",
        f"  endorsed touches: {m.endorsed_touches}",
        f"  tracking loss:   {m.tracking_loss:.2f} s",
        "  agent occupancy:",
    ]
    for mode in AgentMode:
        lines.append(f"    {mode.value:<12} {m.occupancy[mode.value] * 100:6.2f} %")
    if m.task_times:
        lines.append("  task completion:")
        for zone, seconds in m.task_times.items():
            lines.append(f"    {zone:<12} {seconds:.2f} s")
    return "\n".join(lines) + "\n"


def metrics_csv(m: SessionMetrics) -> str:
    """One row per task plus a summary row."""
    out = ["row,zone,seconds,movement_volume,mean_speed,peak_speed,endorsed,tracking_loss"]
    for zone, seconds in m.task_times.items():
        out.append(f"task,{zone},{seconds:.3f},,,,,")
    out.append(
        "summary,,,"
        f"{m.movement_volume:.6f},{m.mean_speed:.6f},{m.peak_speed:.6f},"
        f"{m.endorsed_touches},{m.tracking_loss:.3f}"
    )
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    regenerated: list[GameEvent]
    recorded: list[GameEvent]
    first_divergence: int | None = None
    divergence_tick: int | None = None
    trace_divergence_tick: int | None = None


def replay_session(record: SessionRecord) -> ReplayResult:
    """Re-run the engine from the recorded config and inputs.

    The recorded raw samples carry the tick that consumed them, so the replay
    feeds the exact same batches; overrides are re-applied before their tick.
    Both the event log and the downsampled hand trace are diffed against the
    record: events alone can miss a small input change that never shifts a
    transition, but the hand filter cannot.
    """
    cfg = record.config
    engine = Engine(cfg)
    rate = record.header.get("hand_trace_rate", 10.0) if record.header else 10.0
    stride = max(1, round(cfg.tick_rate / rate))
    regenerated: list[GameEvent] = list(engine.start())
    trace: list[HandState] = []
    tracked: list[bool] = []
    traced_tick = -1

    def trace_state(state: GameState, force: bool = False) -> None:
        nonlocal traced_tick
        if state.tick == traced_tick or (state.tick % stride != 0 and not force):
            return
        traced_tick = state.tick
        # trace lines carry the state clock, not the estimator's sample time
        trace.append(replace(state.hand, t=state.t))
        tracked.append(not state.tracking_lost)

    trace_state(engine.state)
    end_t = record.ended_at()
    last_tick = max((tick for tick, _ in record.raw), default=0)
    if end_t is not None:
        last_tick = max(last_tick, round(end_t * cfg.tick_rate))

    by_tick: dict[int, list[RawSample]] = {}
    for tick, sample in record.raw:
        by_tick.setdefault(tick, []).append(sample)
    overrides_at: dict[int, list[dict]] = {}
    for tick, patch in record.overrides:
        overrides_at.setdefault(tick, []).append(patch)

    for tick in range(1, last_tick + 1):
        for patch in overrides_at.get(tick, ()):
            engine.cfg = replace(engine.cfg, difficulty=replace(engine.cfg.difficulty, **patch))
        state, events = engine.tick(by_tick.get(tick, ()))
        regenerated.extend(events)
        trace_state(state)
    end_reason = "control"
    for ev in reversed(record.events):
        if ev.kind is EventKind.SESSION_ENDED:
            end_reason = str(ev.data.get("reason", "control"))
            break
    regenerated.extend(engine.end(end_reason))
    trace_state(engine.state, force=True)

    recorded = record.events
    diverge: int | None = None
    for i, (a, b) in enumerate(zip(regenerated, recorded)):
        if a != b:
            diverge = i
            break
    if diverge is None and len(regenerated) != len(recorded):
        diverge = min(len(regenerated), len(recorded))
    if diverge is not None:
        events_at = regenerated[diverge] if diverge < len(regenerated) else recorded[diverge]
        return ReplayResult(
            ok=False,
            regenerated=regenerated,
            recorded=recorded,
            first_divergence=diverge,
            divergence_tick=round(events_at.t * cfg.tick_rate),
        )

    rec_trace = list(zip(record.hand_trace, record.hand_tracked))
    gen_trace = list(zip(trace, tracked))
    trace_diverge: int | None = None
    for i, (a, b) in enumerate(zip(gen_trace, rec_trace)):
        if a != b:
            trace_diverge = i
            break
    if trace_diverge is None and len(gen_trace) != len(rec_trace):
        trace_diverge = min(len(gen_trace), len(rec_trace))
    if trace_diverge is not None:
        at = trace[trace_diverge] if trace_diverge < len(trace) else record.hand_trace[trace_diverge]
        return ReplayResult(
            ok=False,
            regenerated=regenerated,
            recorded=recorded,
            trace_divergence_tick=round(at.t * cfg.tick_rate),
        )
    return ReplayResult(ok=True, regenerated=regenerated, recorded=recorded)
