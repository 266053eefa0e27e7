"""Hand tracking input pipeline.

Raw camera-space samples (normalized [0,1] coordinates plus a validity flag)
are calibrated onto the game plane with an affine map, exponentially smoothed,
and differentiated into a velocity estimate by least-squares regression over a
short window. The hand lives on the table plane, so calibrated positions carry
z = 0 and only acquire depth when embedded in the tank.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .vec import Vec3, ZERO


class DegenerateCorrespondences(ValueError):
    """Calibration points do not determine an affine map."""


class InvalidSample(ValueError):
    """Operation applied to a sample without tracking lock."""


class TrackingLost(RuntimeError):
    """No valid sample within the dropout timeout."""


@dataclass(frozen=True, slots=True)
class RawSample:
    """One camera frame: time, normalized image coordinates, tracking lock."""

    t: float
    u: float
    v: float
    valid: bool = True


@dataclass(frozen=True, slots=True)
class CalibrationMap:
    """Affine camera-plane to game-plane map: x = a·u + b·v + tx, y = c·u + d·v + ty."""

    a: float
    b: float
    tx: float
    c: float
    d: float
    ty: float

    def __post_init__(self) -> None:
        if abs(self.a * self.d - self.b * self.c) < 1e-12:
            raise DegenerateCorrespondences("linear part is singular")

    def apply_point(self, u: float, v: float) -> tuple[float, float]:
        return (self.a * u + self.b * v + self.tx, self.c * u + self.d * v + self.ty)

    def invert_point(self, x: float, y: float) -> tuple[float, float]:
        """Camera coordinates that map to the given game-plane point."""
        det = self.a * self.d - self.b * self.c
        rx = x - self.tx
        ry = y - self.ty
        return ((self.d * rx - self.b * ry) / det, (self.a * ry - self.c * rx) / det)

    def to_dict(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "tx": self.tx, "c": self.c, "d": self.d, "ty": self.ty}

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "CalibrationMap":
        return cls(a=d["a"], b=d["b"], tx=d["tx"], c=d["c"], d=d["d"], ty=d["ty"])

    @classmethod
    def identity(cls) -> "CalibrationMap":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True, slots=True)
class HandState:
    """Calibrated hand pose and velocity estimate at a timestamp."""

    pos: Vec3
    vel: Vec3
    speed: float
    t: float


@dataclass(frozen=True)
class FilterConfig:
    """Smoothing and differentiation parameters for estimate_state."""

    alpha: float = 0.5
    window: float = 0.25
    timeout: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must be in (0, 1]")
        if self.window <= 0.0:
            raise ValueError("window must be positive")
        if self.timeout <= 0.0:
            raise ValueError("timeout must be positive")


def solve_calibration(
    correspondences: Sequence[tuple[tuple[float, float], tuple[float, float]]],
) -> CalibrationMap:
    """Least-squares affine map from camera/game point pairs.

    Exact when the pairs are affine-consistent. Raises DegenerateCorrespondences
    for fewer than three pairs or collinear camera points.
    """
    if len(correspondences) < 3:
        raise DegenerateCorrespondences("need at least 3 point pairs")
    design = np.array([[u, v, 1.0] for (u, v), _ in correspondences])
    targets = np.array([[x, y] for _, (x, y) in correspondences])
    coeffs, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < 3:
        raise DegenerateCorrespondences("camera points are collinear")
    return CalibrationMap(
        a=float(coeffs[0, 0]),
        b=float(coeffs[1, 0]),
        tx=float(coeffs[2, 0]),
        c=float(coeffs[0, 1]),
        d=float(coeffs[1, 1]),
        ty=float(coeffs[2, 1]),
    )


def apply_calibration(cal: CalibrationMap, sample: RawSample) -> Vec3:
    """Game-plane position of a valid sample, pinned to the table plane z = 0."""
    if not sample.valid:
        raise InvalidSample(f"sample at t={sample.t} has no tracking lock")
    x, y = cal.apply_point(sample.u, sample.v)
    return Vec3(x, y, 0.0)


def estimate_state(
    history: Sequence[RawSample], cal: CalibrationMap, cfg: FilterConfig
) -> HandState:
    """Smoothed position and regression velocity from recent samples.

    Invalid and out-of-order samples are ignored. The exponential moving
    average restarts at the window's oldest sample, so the smoothed position is
    a convex combination of the calibrated samples inside the window; velocity
    is the least-squares slope of that smoothed series. Raises TrackingLost
    when no valid sample lies within the dropout timeout of the newest sample.
    """
    if not history:
        raise TrackingLost("no samples")
    now = history[-1].t
    latest_valid = None
    for sample in reversed(history):
        if sample.valid:
            latest_valid = sample
            break
    if latest_valid is None or now - latest_valid.t > cfg.timeout:
        raise TrackingLost(f"no valid sample within {cfg.timeout} s of t={now}")

    t_ref = latest_valid.t
    cutoff = t_ref - cfg.window
    ca, cb, ctx = cal.a, cal.b, cal.tx
    cc, cd, cty = cal.c, cal.d, cal.ty
    alpha = cfg.alpha
    beta = 1.0 - alpha
    ts: list[float] = []
    smooth_x: list[float] = []
    smooth_y: list[float] = []
    sx = sy = 0.0
    last_t = -math.inf
    for sample in history:
        st = sample.t
        if not sample.valid or st <= last_t or st < cutoff or st > t_ref:
            continue
        last_t = st
        x = ca * sample.u + cb * sample.v + ctx
        y = cc * sample.u + cd * sample.v + cty
        if ts:
            sx = alpha * x + beta * sx
            sy = alpha * y + beta * sy
        else:
            sx = x
            sy = y
        ts.append(st - t_ref)
        smooth_x.append(sx)
        smooth_y.append(sy)

    n = len(ts)
    if n < 2:
        vel = ZERO
    else:
        t_mean = sum(ts) / n
        x_mean = sum(smooth_x) / n
        y_mean = sum(smooth_y) / n
        stt = 0.0
        stx = 0.0
        sty = 0.0
        for i in range(n):
            dt = ts[i] - t_mean
            stt += dt * dt
            stx += dt * (smooth_x[i] - x_mean)
            sty += dt * (smooth_y[i] - y_mean)
        if stt == 0.0:
            vel = ZERO
        else:
            vel = Vec3(stx / stt, sty / stt, 0.0)

    return HandState(pos=Vec3(sx, sy, 0.0), vel=vel, speed=vel.norm(), t=t_ref)


class SampleHistory:
    """Bounded buffer of raw samples; single writer, snapshot readers.

    append drops non-increasing timestamps, keeps enough history to cover the
    filter window and the dropout timeout, and readers take an immutable tuple
    snapshot so estimation never sees a half-updated buffer.
    """

    def __init__(self, cfg: FilterConfig) -> None:
        self._cfg = cfg
        self._span = max(cfg.window, cfg.timeout)
        self._samples: list[RawSample] = []

    def append(self, sample: RawSample) -> bool:
        """Add a sample; returns False when it is out of order and dropped."""
        if self._samples and sample.t <= self._samples[-1].t:
            return False
        self._samples.append(sample)
        cutoff = sample.t - self._span
        drop = 0
        while drop < len(self._samples) - 1 and self._samples[drop + 1].t < cutoff:
            drop += 1
        if drop:
            del self._samples[:drop]
        return True

    def snapshot(self) -> tuple[RawSample, ...]:
        return tuple(self._samples)

    @property
    def latest(self) -> RawSample | None:
        return self._samples[-1] if self._samples else None

    def latest_valid_t(self) -> float | None:
        for sample in reversed(self._samples):
            if sample.valid:
                return sample.t
        return None


def write_raw_stream(samples: Iterable[RawSample], fp: IO[str]) -> None:
    """One JSON object per line: {"t":..., "u":..., "v":..., "valid":...}."""
    for s in samples:
        fp.write(
            json.dumps({"t": s.t, "u": s.u, "v": s.v, "valid": s.valid}, sort_keys=True) + "\n"
        )


def read_raw_stream(fp: IO[str]) -> Iterator[RawSample]:
    for line in fp:
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        yield RawSample(t=float(d["t"]), u=float(d["u"]), v=float(d["v"]), valid=bool(d["valid"]))
