"""Fish steering behaviors: wander, pursue, flee.

Pure per-tick updates over value types. Seek-style steering: each behavior
produces a desired velocity, the fish accelerates toward it under a hard
acceleration cap, speed is clamped, and positions are integrated with
semi-implicit Euler. Wander is confined to a sphere, everything is confined
to the tank box, and all randomness comes through an explicit rng argument.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .vec import Vec3, ZERO


class BehaviorKind(str, Enum):
    WANDER = "wander"
    PURSUE = "pursue"
    FLEE = "flee"


@dataclass(frozen=True)
class TankBounds:
    """Axis-aligned box the fish may occupy, in meters."""

    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if not (self.min.x < self.max.x and self.min.y < self.max.y and self.min.z < self.max.z):
            raise ValueError("bounds must have positive extent on every axis")

    def contains(self, p: Vec3, slack: float = 0.0) -> bool:
        return (
            self.min.x - slack <= p.x <= self.max.x + slack
            and self.min.y - slack <= p.y <= self.max.y + slack
            and self.min.z - slack <= p.z <= self.max.z + slack
        )

    def collide(self, pos: Vec3, vel: Vec3) -> tuple[Vec3, Vec3]:
        """Clamp to the box and cancel any velocity still pushing into a wall."""
        px, py, pz = pos
        vx, vy, vz = vel
        if px < self.min.x:
            px, vx = self.min.x, max(vx, 0.0)
        elif px > self.max.x:
            px, vx = self.max.x, min(vx, 0.0)
        if py < self.min.y:
            py, vy = self.min.y, max(vy, 0.0)
        elif py > self.max.y:
            py, vy = self.max.y, min(vy, 0.0)
        if pz < self.min.z:
            pz, vz = self.min.z, max(vz, 0.0)
        elif pz > self.max.z:
            pz, vz = self.max.z, min(vz, 0.0)
        return Vec3(px, py, pz), Vec3(vx, vy, vz)

    def center(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )


@dataclass(frozen=True)
class BehaviorParams:
    """Steering limits and wander geometry.

    wander_jitter is the per-axis standard deviation of the random steering
    acceleration. bounds confines every behavior to the tank; flee leans on it
    hardest, so it also gets soft wall avoidance (see wall_margin).
    """

    max_speed: float = 0.2
    max_accel: float = 0.8
    wander_radius: float = 0.12
    wander_center: Vec3 = Vec3(0.4, 0.25, 0.15)
    wander_jitter: float = 0.6
    rng_seed: int = 0
    bounds: TankBounds | None = None
    wall_margin: float = 0.05

    def __post_init__(self) -> None:
        if self.max_speed <= 0.0 or self.max_accel <= 0.0 or self.wander_radius <= 0.0:
            raise ValueError("max_speed, max_accel and wander_radius must be positive")


@dataclass(frozen=True)
class FishState:
    pos: Vec3
    vel: Vec3
    behavior: BehaviorKind = BehaviorKind.WANDER


def _integrate(
    vel: Vec3, pos: Vec3, accel: Vec3, p: BehaviorParams, dt: float
) -> tuple[Vec3, Vec3]:
    new_vel = vel.add(accel.scale(dt)).clamp_norm(p.max_speed)
    new_pos = pos.add(new_vel.scale(dt))
    return new_vel, new_pos


def _steer_toward(desired: Vec3, s: FishState, p: BehaviorParams, dt: float) -> tuple[Vec3, Vec3]:
    accel = desired.sub(s.vel).scale(1.0 / dt).clamp_norm(p.max_accel)
    return _integrate(s.vel, s.pos, accel, p, dt)


def wander_step(s: FishState, p: BehaviorParams, rng: random.Random, dt: float) -> FishState:
    """Random steering inside the wander sphere.

    Jittered gaussian acceleration plus a linear inward spring, then a hard
    projection onto the sphere, so containment is exact regardless of jitter.
    """
    accel = Vec3(
        rng.gauss(0.0, p.wander_jitter),
        rng.gauss(0.0, p.wander_jitter),
        rng.gauss(0.0, p.wander_jitter),
    )
    offset = s.pos.sub(p.wander_center)
    # inward spring reaching max_accel at the sphere surface
    accel = accel.add(offset.scale(-p.max_accel / p.wander_radius))
    accel = accel.clamp_norm(p.max_accel)
    vel, pos = _integrate(s.vel, s.pos, accel, p, dt)
    if p.bounds is not None:
        pos, vel = p.bounds.collide(pos, vel)
    offset = pos.sub(p.wander_center)
    r = offset.norm()
    if r > p.wander_radius:
        # rounding may leave the projected point a few ulp outside; pull it in
        scale = p.wander_radius / r
        pos = p.wander_center.add(offset.scale(scale))
        while pos.sub(p.wander_center).norm() > p.wander_radius:
            scale = math.nextafter(scale, 0.0)
            pos = p.wander_center.add(offset.scale(scale))
        normal = offset.scale(1.0 / r)
        outward = vel.dot(normal)
        if outward > 0.0:
            vel = vel.sub(normal.scale(outward))
    return FishState(pos=pos, vel=vel, behavior=BehaviorKind.WANDER)


def pursue_step(s: FishState, target: Vec3, p: BehaviorParams, dt: float) -> FishState:
    """Accelerate toward the target at full speed; hold position when on it."""
    gap = target.sub(s.pos)
    dist = gap.norm()
    desired = ZERO if dist == 0.0 else gap.scale(p.max_speed / dist)
    vel, pos = _steer_toward(desired, s, p, dt)
    if p.bounds is not None:
        pos, vel = p.bounds.collide(pos, vel)
    return FishState(pos=pos, vel=vel, behavior=BehaviorKind.PURSUE)


def _wall_avoidance(pos: Vec3, p: BehaviorParams) -> Vec3:
    """Desired-velocity correction pushing off nearby walls; zero beyond the margin."""
    b = p.bounds
    if b is None or p.wall_margin <= 0.0:
        return ZERO
    m = p.wall_margin
    comps = []
    for lo, hi, x in ((b.min.x, b.max.x, pos.x), (b.min.y, b.max.y, pos.y), (b.min.z, b.max.z, pos.z)):
        push = 0.0
        d_lo = x - lo
        d_hi = hi - x
        if d_lo < m:
            push += p.max_speed * (1.0 - max(d_lo, 0.0) / m)
        if d_hi < m:
            push -= p.max_speed * (1.0 - max(d_hi, 0.0) / m)
        comps.append(push)
    return Vec3(comps[0], comps[1], comps[2])


def flee_step(
    s: FishState,
    threat: Vec3,
    p: BehaviorParams,
    dt: float,
    rng: random.Random | None = None,
) -> FishState:
    """Accelerate directly away from the threat, avoiding the tank walls.

    A threat exactly on the fish has no away direction; one is drawn from rng
    (or +x when rng is absent) so the step stays total and deterministic.
    """
    gap = s.pos.sub(threat)
    dist = gap.norm()
    if dist == 0.0:
        if rng is None:
            away = Vec3(1.0, 0.0, 0.0)
        else:
            away = Vec3(rng.gauss(0.0, 1.0), rng.gauss(0.0, 1.0), rng.gauss(0.0, 1.0)).unit()
            if away == ZERO:
                away = Vec3(1.0, 0.0, 0.0)
    else:
        away = gap.scale(1.0 / dist)
    desired = away.scale(p.max_speed).add(_wall_avoidance(s.pos, p)).clamp_norm(p.max_speed)
    vel, pos = _steer_toward(desired, s, p, dt)
    if p.bounds is not None:
        pos, vel = p.bounds.collide(pos, vel)
    return FishState(pos=pos, vel=vel, behavior=BehaviorKind.FLEE)


def step(
    s: FishState, hand_pos: Vec3, p: BehaviorParams, rng: random.Random, dt: float
) -> FishState:
    """Advance one tick, dispatching on the active behavior."""
    if s.behavior is BehaviorKind.PURSUE:
        return pursue_step(s, hand_pos, p, dt)
    if s.behavior is BehaviorKind.FLEE:
        return flee_step(s, hand_pos, p, dt, rng)
    return wander_step(s, p, rng, dt)
