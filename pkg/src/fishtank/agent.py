"""Difficulty-adjustment agent.

A three-mode state machine watches the hand speed every tick. Sustained
crawling (below v_min for t_low) flips the fish to a helpful pursue; sustained
speeding (above v_max for t_high) flips it to a challenging flee; settling back
into the band for t_return returns it to wander. Dwell is continuous: leaving
a band resets its accumulator, and the two extreme modes only connect through
the wander mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .capture import HandState
from .steering import BehaviorKind

# accumulated float dt undershoots exact thresholds (180 sixtieths < 3.0)
DWELL_EPS = 1e-9


class AgentMode(str, Enum):
    WANDER = "wander"
    HELPFUL = "helpful"
    CHALLENGING = "challenging"


BEHAVIOR_FOR_MODE = {
    AgentMode.WANDER: BehaviorKind.WANDER,
    AgentMode.HELPFUL: BehaviorKind.PURSUE,
    AgentMode.CHALLENGING: BehaviorKind.FLEE,
}


@dataclass(frozen=True)
class DifficultyConfig:
    v_min: float = 0.03
    v_max: float = 0.25
    t_low: float = 3.0
    t_high: float = 3.0
    t_return: float = 2.0

    def __post_init__(self) -> None:
        if not (0.0 < self.v_min < self.v_max):
            raise ValueError("need 0 < v_min < v_max")
        if min(self.t_low, self.t_high, self.t_return) <= 0.0:
            raise ValueError("dwell times must be positive")


@dataclass(frozen=True)
class AgentState:
    mode: AgentMode = AgentMode.WANDER
    dwell_below: float = 0.0
    dwell_above: float = 0.0
    dwell_inside: float = 0.0

    def behavior(self) -> BehaviorKind:
        return BEHAVIOR_FOR_MODE[self.mode]


@dataclass(frozen=True)
class TransitionEvent:
    t: float
    from_mode: AgentMode
    to_mode: AgentMode
    trigger_speed: float


def observe(
    a: AgentState, hand: HandState, cfg: DifficultyConfig, dt: float
) -> tuple[AgentState, BehaviorKind, TransitionEvent | None]:
    """Advance the agent by one observation of the hand.

    Exactly one dwell accumulator grows (the one matching the speed band,
    boundary speeds counting as inside); the other two reset. A transition
    fires as soon as the relevant dwell reaches its threshold, resetting all
    accumulators.
    """
    speed = hand.speed
    if speed < cfg.v_min:
        a = replace(a, dwell_below=a.dwell_below + dt, dwell_above=0.0, dwell_inside=0.0)
    elif speed > cfg.v_max:
        a = replace(a, dwell_below=0.0, dwell_above=a.dwell_above + dt, dwell_inside=0.0)
    else:
        a = replace(a, dwell_below=0.0, dwell_above=0.0, dwell_inside=a.dwell_inside + dt)

    new_mode: AgentMode | None = None
    if a.mode is AgentMode.WANDER:
        if a.dwell_below >= cfg.t_low - DWELL_EPS:
            new_mode = AgentMode.HELPFUL
        elif a.dwell_above >= cfg.t_high - DWELL_EPS:
            new_mode = AgentMode.CHALLENGING
    elif a.dwell_inside >= cfg.t_return - DWELL_EPS:
        new_mode = AgentMode.WANDER

    event: TransitionEvent | None = None
    if new_mode is not None:
        event = TransitionEvent(
            t=hand.t, from_mode=a.mode, to_mode=new_mode, trigger_speed=speed
        )
        a = AgentState(mode=new_mode)
    return a, a.behavior(), event
