"""Session configuration: tank geometry, mechanics, and nested module configs.

Loads from and round-trips to plain JSON so a session record can embed the
exact configuration it ran with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO

from .agent import DifficultyConfig
from .capture import CalibrationMap, FilterConfig
from .steering import BehaviorParams, TankBounds
from .vec import Vec3


class Zone(str, Enum):
    """Quadrants of the table plane, named from the player's viewpoint."""

    BOTTOM_RIGHT = "bottom_right"
    BOTTOM_LEFT = "bottom_left"
    UPPER_RIGHT = "upper_right"
    UPPER_LEFT = "upper_left"


DEFAULT_TASK_ZONES = (
    Zone.BOTTOM_RIGHT,
    Zone.BOTTOM_LEFT,
    Zone.UPPER_RIGHT,
    Zone.UPPER_LEFT,
)

DEFAULT_BOUNDS = TankBounds(min=Vec3(0.0, 0.0, 0.0), max=Vec3(0.8, 0.5, 0.3))


@dataclass(frozen=True)
class GameConfig:
    bounds: TankBounds = DEFAULT_BOUNDS
    tank_anchor: Vec3 = Vec3(0.0, 0.0, 0.0)
    touch_radius: float = 0.05
    fill_duration: float = 1.5
    tick_rate: float = 60.0
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    difficulty: DifficultyConfig = field(default_factory=DifficultyConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    task_zones: tuple[Zone, ...] = DEFAULT_TASK_ZONES
    calibration: CalibrationMap = field(default_factory=CalibrationMap.identity)

    def __post_init__(self) -> None:
        if self.touch_radius <= 0.0:
            raise ValueError("touch_radius must be positive")
        if self.fill_duration <= 0.0:
            raise ValueError("fill_duration must be positive")
        if self.tick_rate <= 0.0:
            raise ValueError("tick_rate must be positive")
        c = self.behavior.wander_center
        r = self.behavior.wander_radius
        b = self.bounds
        sphere_ok = (
            c.x - r >= b.min.x
            and c.x + r <= b.max.x
            and c.y - r >= b.min.y
            and c.y + r <= b.max.y
            and c.z - r >= b.min.z
            and c.z + r <= b.max.z
        )
        if not sphere_ok:
            raise ValueError("wander sphere must fit inside the tank bounds")
        # steering steps read the tank box off their params
        if self.behavior.bounds is not b:
            object.__setattr__(self, "behavior", replace(self.behavior, bounds=b))

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate

    def zone_of(self, x: float, y: float) -> Zone:
        """Quadrant of a table-plane point; boundary points go right/upper."""
        cx = (self.bounds.min.x + self.bounds.max.x) / 2.0
        cy = (self.bounds.min.y + self.bounds.max.y) / 2.0
        right = x >= cx
        upper = y >= cy
        if upper:
            return Zone.UPPER_RIGHT if right else Zone.UPPER_LEFT
        return Zone.BOTTOM_RIGHT if right else Zone.BOTTOM_LEFT

    def to_dict(self) -> dict:
        return {
            "bounds": {"min": list(self.bounds.min), "max": list(self.bounds.max)},
            "tank_anchor": list(self.tank_anchor),
            "touch_radius": self.touch_radius,
            "fill_duration": self.fill_duration,
            "tick_rate": self.tick_rate,
            "behavior": {
                "max_speed": self.behavior.max_speed,
                "max_accel": self.behavior.max_accel,
                "wander_radius": self.behavior.wander_radius,
                "wander_center": list(self.behavior.wander_center),
                "wander_jitter": self.behavior.wander_jitter,
                "rng_seed": self.behavior.rng_seed,
                "wall_margin": self.behavior.wall_margin,
            },
            "difficulty": {
                "v_min": self.difficulty.v_min,
                "v_max": self.difficulty.v_max,
                "t_low": self.difficulty.t_low,
                "t_high": self.difficulty.t_high,
                "t_return": self.difficulty.t_return,
            },
            "filter": {
                "alpha": self.filter.alpha,
                "window": self.filter.window,
                "timeout": self.filter.timeout,
            },
            "task_zones": [z.value for z in self.task_zones],
            "calibration": self.calibration.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        """Build from a plain dict; missing keys keep their defaults."""
        base = cls()
        bounds = base.bounds
        if "bounds" in d:
            bounds = TankBounds(min=Vec3(*d["bounds"]["min"]), max=Vec3(*d["bounds"]["max"]))
        beh = d.get("behavior", {})
        diff = d.get("difficulty", {})
        filt = d.get("filter", {})
        behavior = BehaviorParams(
            max_speed=beh.get("max_speed", base.behavior.max_speed),
            max_accel=beh.get("max_accel", base.behavior.max_accel),
            wander_radius=beh.get("wander_radius", base.behavior.wander_radius),
            wander_center=(
                Vec3(*beh["wander_center"])
                if "wander_center" in beh
                else base.behavior.wander_center
            ),
            wander_jitter=beh.get("wander_jitter", base.behavior.wander_jitter),
            rng_seed=beh.get("rng_seed", base.behavior.rng_seed),
            bounds=bounds,
            wall_margin=beh.get("wall_margin", base.behavior.wall_margin),
        )
        return cls(
            bounds=bounds,
            tank_anchor=(
                Vec3(*d["tank_anchor"]) if "tank_anchor" in d else base.tank_anchor
            ),
            touch_radius=d.get("touch_radius", base.touch_radius),
            fill_duration=d.get("fill_duration", base.fill_duration),
            tick_rate=d.get("tick_rate", base.tick_rate),
            behavior=behavior,
            difficulty=DifficultyConfig(
                v_min=diff.get("v_min", base.difficulty.v_min),
                v_max=diff.get("v_max", base.difficulty.v_max),
                t_low=diff.get("t_low", base.difficulty.t_low),
                t_high=diff.get("t_high", base.difficulty.t_high),
                t_return=diff.get("t_return", base.difficulty.t_return),
            ),
            filter=FilterConfig(
                alpha=filt.get("alpha", base.filter.alpha),
                window=filt.get("window", base.filter.window),
                timeout=filt.get("timeout", base.filter.timeout),
            ),
            task_zones=tuple(Zone(z) for z in d.get("task_zones", [z.value for z in base.task_zones])),
            calibration=(
                CalibrationMap.from_dict(d["calibration"])
                if "calibration" in d
                else CalibrationMap.identity()
            ),
        )

    @classmethod
    def load(cls, fp: IO[str]) -> "GameConfig":
        return cls.from_dict(json.load(fp))
