"""Authoritative per-tick world update.

Each tick: estimate the hand from whatever raw samples arrived, let the
difficulty agent pick the fish behavior, step the fish, advance the
touch-endorsement fill, and update the reach-task list, emitting one event per
state change. Everything is deterministic given (config, seed, raw samples).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping

from . import agent as agent_mod
from . import steering
from .capture import HandState, RawSample, SampleHistory, TrackingLost, estimate_state
from .config import GameConfig, Zone
from .steering import BehaviorKind, FishState
from .vec import Vec3, ZERO

# guards threshold checks against accumulated float dt undershoot
FILL_EPS = 1e-9


class EventKind(str, Enum):
    SESSION_STARTED = "session_started"
    SESSION_ENDED = "session_ended"
    TOUCH_STARTED = "touch_started"
    TOUCH_BROKEN = "touch_broken"
    TOUCH_ENDORSED = "touch_endorsed"
    TASK_ACTIVATED = "task_activated"
    TASK_COMPLETED = "task_completed"
    AGENT_TRANSITION = "agent_transition"
    TRACKING_LOST = "tracking_lost"
    TRACKING_RECOVERED = "tracking_recovered"


@dataclass(frozen=True)
class GameEvent:
    kind: EventKind
    t: float
    data: Mapping[str, object] = field(default_factory=dict)


class TaskStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    COMPLETED = "completed"


@dataclass(frozen=True)
class ExerciseTask:
    start_zone: Zone
    status: TaskStatus = TaskStatus.PENDING
    started_at: float | None = None
    completed_at: float | None = None


@dataclass(frozen=True)
class TouchProgress:
    fraction: float = 0.0
    in_contact: bool = False
    refractory: bool = False


@dataclass(frozen=True)
class TaskBoard:
    """Ordered reach tasks plus the zone the current contact attempt began in."""

    tasks: tuple[ExerciseTask, ...]
    attempt_origin: Zone | None = None

    @property
    def active_index(self) -> int | None:
        for i, task in enumerate(self.tasks):
            if task.status is TaskStatus.ACTIVE:
                return i
        return None

    @property
    def all_completed(self) -> bool:
        return all(t.status is TaskStatus.COMPLETED for t in self.tasks)


@dataclass(frozen=True)
class GameState:
    tick: int
    t: float
    fish: FishState
    hand: HandState
    agent: agent_mod.AgentState
    progress: TouchProgress
    tasks: TaskBoard
    endorsed_touch_count: int
    tracking_lost: bool


def update_touch(
    p: TouchProgress, distance: float, cfg: GameConfig, dt: float, t: float
) -> tuple[TouchProgress, list[GameEvent]]:
    """Advance the endorsement fill for one tick at the given hand-fish distance.

    Contact is distance <= touch_radius. The fill rises linearly over
    fill_duration, resets to zero whenever contact breaks, and after an
    endorsement stays dormant until the next contact break, so one
    uninterrupted contact yields at most one endorsement.
    """
    events: list[GameEvent] = []
    contact = distance <= cfg.touch_radius
    fraction = p.fraction
    refractory = p.refractory

    if contact and not p.in_contact:
        events.append(GameEvent(EventKind.TOUCH_STARTED, t, {"distance": distance}))
    elif p.in_contact and not contact:
        events.append(GameEvent(EventKind.TOUCH_BROKEN, t, {"fraction": fraction}))
        fraction = 0.0
        refractory = False

    if contact and not refractory:
        fraction = min(fraction + dt / cfg.fill_duration, 1.0)
        if fraction >= 1.0 - FILL_EPS:
            events.append(GameEvent(EventKind.TOUCH_ENDORSED, t, {}))
            fraction = 0.0
            refractory = True

    return TouchProgress(fraction=fraction, in_contact=contact, refractory=refractory), events


def update_tasks(
    board: TaskBoard,
    hand: HandState,
    touch_events: list[GameEvent],
    cfg: GameConfig,
    t: float,
) -> tuple[TaskBoard, list[GameEvent]]:
    """React to this tick's touch events.

    A new contact stamps the attempt origin with the hand's current quadrant.
    An endorsement completes the active task only when the attempt began in its
    start zone, then activates the next pending task.
    """
    events: list[GameEvent] = []
    attempt = board.attempt_origin
    tasks = board.tasks
    for ev in touch_events:
        if ev.kind is EventKind.TOUCH_STARTED:
            attempt = cfg.zone_of(hand.pos.x, hand.pos.y)
        elif ev.kind is EventKind.TOUCH_ENDORSED:
            idx = board.active_index
            if idx is not None and attempt is not None and tasks[idx].start_zone is attempt:
                done = replace(tasks[idx], status=TaskStatus.COMPLETED, completed_at=t)
                tasks = tasks[:idx] + (done,) + tasks[idx + 1 :]
                events.append(
                    GameEvent(
                        EventKind.TASK_COMPLETED,
                        t,
                        {"index": idx, "zone": done.start_zone.value},
                    )
                )
                nxt = idx + 1
                if nxt < len(tasks):
                    started = replace(tasks[nxt], status=TaskStatus.ACTIVE, started_at=t)
                    tasks = tasks[:nxt] + (started,) + tasks[nxt + 1 :]
                    events.append(
                        GameEvent(
                            EventKind.TASK_ACTIVATED,
                            t,
                            {"index": nxt, "zone": started.start_zone.value},
                        )
                    )
        elif ev.kind is EventKind.TOUCH_BROKEN:
            attempt = None
    return TaskBoard(tasks=tasks, attempt_origin=attempt), events


def _initial_hand(cfg: GameConfig) -> HandState:
    center = cfg.bounds.center()
    return HandState(pos=Vec3(center.x, center.y, 0.0), vel=ZERO, speed=0.0, t=0.0)


def initial_state(cfg: GameConfig) -> GameState:
    tasks = tuple(ExerciseTask(start_zone=z) for z in cfg.task_zones)
    if tasks:
        tasks = (replace(tasks[0], status=TaskStatus.ACTIVE, started_at=0.0),) + tasks[1:]
    return GameState(
        tick=0,
        t=0.0,
        fish=FishState(pos=cfg.behavior.wander_center, vel=ZERO),
        hand=_initial_hand(cfg),
        agent=agent_mod.AgentState(),
        progress=TouchProgress(),
        tasks=TaskBoard(tasks=tasks),
        endorsed_touch_count=0,
        tracking_lost=True,
    )


class Engine:
    """Owns one session's state and advances it tick by tick."""

    def __init__(self, cfg: GameConfig) -> None:
        self.cfg = cfg
        self.state = initial_state(cfg)
        self.rng = random.Random(cfg.behavior.rng_seed)
        self.history = SampleHistory(cfg.filter)
        self._started = False
        self._ended = False

    def start(self) -> list[GameEvent]:
        self._started = True
        events = [GameEvent(EventKind.SESSION_STARTED, 0.0, {})]
        board = self.state.tasks
        if board.tasks:
            events.append(
                GameEvent(
                    EventKind.TASK_ACTIVATED,
                    0.0,
                    {"index": 0, "zone": board.tasks[0].start_zone.value},
                )
            )
        return events

    def end(self, reason: str = "control") -> list[GameEvent]:
        self._ended = True
        return [GameEvent(EventKind.SESSION_ENDED, self.state.t, {"reason": reason})]

    def tick(self, samples: Iterable[RawSample] = ()) -> tuple[GameState, list[GameEvent]]:
        """Advance one tick, folding in raw samples that arrived since the last."""
        cfg = self.cfg
        s = self.state
        dt = cfg.dt
        tick = s.tick + 1
        t = tick / cfg.tick_rate
        events: list[GameEvent] = []

        for sample in samples:
            self.history.append(sample)

        hand = s.hand
        last_valid = self.history.latest_valid_t()
        lost = last_valid is None or t - last_valid > cfg.filter.timeout
        if not lost:
            try:
                hand = estimate_state(self.history.snapshot(), cfg.calibration, cfg.filter)
            except TrackingLost:
                lost = True
        if lost and not s.tracking_lost:
            events.append(GameEvent(EventKind.TRACKING_LOST, t, {}))
        elif not lost and s.tracking_lost:
            events.append(GameEvent(EventKind.TRACKING_RECOVERED, t, {}))

        agent_state = s.agent
        if lost:
            behavior = agent_state.behavior()
        else:
            agent_state, behavior, transition = agent_mod.observe(
                agent_state, hand, cfg.difficulty, dt
            )
            if transition is not None:
                events.append(
                    GameEvent(
                        EventKind.AGENT_TRANSITION,
                        t,
                        {
                            "from": transition.from_mode.value,
                            "to": transition.to_mode.value,
                            "trigger_speed": transition.trigger_speed,
                        },
                    )
                )

        fish = replace(s.fish, behavior=behavior)
        fish = steering.step(fish, hand.pos, cfg.behavior, self.rng, dt)

        # contact is judged in the table plane; fish depth is presentation
        if lost:
            # no live hand, no voluntary contact: progress holds until recovery
            progress, touch_events = s.progress, []
        else:
            distance = fish.pos.planar_distance(hand.pos)
            progress, touch_events = update_touch(s.progress, distance, cfg, dt, t)
        events.extend(touch_events)
        endorsed = s.endorsed_touch_count + sum(
            1 for ev in touch_events if ev.kind is EventKind.TOUCH_ENDORSED
        )

        board, task_events = update_tasks(s.tasks, hand, touch_events, cfg, t)
        events.extend(task_events)

        self.state = GameState(
            tick=tick,
            t=t,
            fish=fish,
            hand=hand,
            agent=agent_state,
            progress=progress,
            tasks=board,
            endorsed_touch_count=endorsed,
            tracking_lost=lost,
        )
        return self.state, events
