"""Parametric simulated patient.

Drives headless sessions as a protocol client: it watches StateUpdates
(delayed by its reaction time), moves its hand toward the fish at a bounded,
fatigue-decaying speed, blends into a tangential orbit when close so the hand
keeps moving instead of parking on the fish, superimposes tremor, clips to its
reach envelope, and emits camera-space samples through the inverse
calibration.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import IO

from .capture import CalibrationMap, RawSample
from .protocol import StateUpdate


@dataclass(frozen=True)
class PatientModel:
    name: str = "custom"
    max_speed: float = 0.1
    reaction_delay: float = 0.1
    tremor_amplitude: float = 0.0
    tremor_frequency: float = 5.0
    envelope_min: tuple[float, float] = (0.05, 0.05)
    envelope_max: tuple[float, float] = (0.75, 0.45)
    fatigue_rate: float = 0.0
    rng_seed: int = 1
    start: tuple[float, float] = (0.6, 0.15)
    orbit_radius: float = 0.0

    def __post_init__(self) -> None:
        if self.max_speed < 0.0:
            raise ValueError("max_speed must be nonnegative")
        if not (
            self.envelope_min[0] < self.envelope_max[0]
            and self.envelope_min[1] < self.envelope_max[1]
        ):
            raise ValueError("reach envelope must be non-empty")

    @classmethod
    def from_dict(cls, d: dict) -> "PatientModel":
        fields = {
            "name",
            "max_speed",
            "reaction_delay",
            "tremor_amplitude",
            "tremor_frequency",
            "fatigue_rate",
            "rng_seed",
            "orbit_radius",
        }
        kwargs = {k: d[k] for k in fields if k in d}
        if "envelope" in d:
            kwargs["envelope_min"] = tuple(d["envelope"]["min"])
            kwargs["envelope_max"] = tuple(d["envelope"]["max"])
        if "start" in d:
            kwargs["start"] = tuple(d["start"])
        return cls(**kwargs)

    @classmethod
    def load(cls, fp: IO[str]) -> "PatientModel":
        return cls.from_dict(json.load(fp))


def load_profile(name: str) -> PatientModel:
    """Shipped profile by name, or a JSON file by path."""
    ref = resources.files("fishtank").joinpath(f"profiles/{name}.json")
    if ref.is_file():
        return PatientModel.from_dict(json.loads(ref.read_text()))
    try:
        with open(name, encoding="utf-8") as fp:
            return PatientModel.load(fp)
    except OSError as exc:
        raise KeyError(f"unknown patient profile: {name}") from exc


class Patient:
    """Stateful simulator for one session.

    observe() feeds it server messages; step(t) returns the camera-space
    sample for time t. Between updates it keeps heading for the last fish
    position it has had time to react to.
    """

    def __init__(self, model: PatientModel, calibration: CalibrationMap | None = None) -> None:
        self.model = model
        self.calibration = calibration or CalibrationMap.identity()
        self.rng = random.Random(model.rng_seed)
        self.x, self.y = model.start
        self._pending: deque[tuple[float, float, float]] = deque()
        self._target: tuple[float, float] | None = None
        self._phase = (self.rng.random() * math.tau, self.rng.random() * math.tau)

    def observe(self, update: StateUpdate) -> None:
        self._pending.append((update.t, update.fish_pos.x, update.fish_pos.y))

    def capability(self, t: float) -> float:
        """Reachable speed after fatigue, never below zero."""
        return self.model.max_speed * max(0.0, 1.0 - self.model.fatigue_rate * t / 60.0)

    def _react(self, t: float) -> None:
        while self._pending and self._pending[0][0] <= t - self.model.reaction_delay:
            _, fx, fy = self._pending.popleft()
            self._target = (fx, fy)

    def step(self, t: float, dt: float) -> RawSample:
        """Advance the hand by dt and emit the sample stamped t."""
        m = self.model
        self._react(t)
        speed = self.capability(t)
        if self._target is not None and speed > 0.0:
            gx = self._target[0] - self.x
            gy = self._target[1] - self.y
            dist = math.hypot(gx, gy)
            if dist > 0.0:
                rx, ry = gx / dist, gy / dist
                if m.orbit_radius > 0.0:
                    # far: head in; near: slide around the fish at the same speed
                    w = min(max((dist - m.orbit_radius) / m.orbit_radius, 0.0), 1.0)
                    dx = w * rx - (1.0 - w) * ry
                    dy = w * ry + (1.0 - w) * rx
                    norm = math.hypot(dx, dy)
                    rx, ry = dx / norm, dy / norm
                step = min(speed * dt, dist + m.orbit_radius)
                self.x += rx * step
                self.y += ry * step
        self.x = min(max(self.x, m.envelope_min[0]), m.envelope_max[0])
        self.y = min(max(self.y, m.envelope_min[1]), m.envelope_max[1])

        ex, ey = self.x, self.y
        if m.tremor_amplitude > 0.0:
            w = math.tau * m.tremor_frequency
            ex += m.tremor_amplitude * (
                math.sin(w * t + self._phase[0]) + 0.3 * self.rng.gauss(0.0, 1.0)
            )
            ey += m.tremor_amplitude * (
                math.sin(w * t + self._phase[1]) + 0.3 * self.rng.gauss(0.0, 1.0)
            )
            ex = min(max(ex, m.envelope_min[0]), m.envelope_max[0])
            ey = min(max(ey, m.envelope_min[1]), m.envelope_max[1])
        u, v = self.calibration.invert_point(ex, ey)
        return RawSample(t=t, u=u, v=v, valid=True)
