"""Steering behaviors: wander containment, pursuit, flee, wall handling."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fishtank.steering import (
    BehaviorKind,
    BehaviorParams,
    FishState,
    TankBounds,
    flee_step,
    pursue_step,
    step,
    wander_step,
)
from fishtank.vec import ZERO, Vec3

DT = 1.0 / 60.0


def at_rest(pos: Vec3, behavior: BehaviorKind = BehaviorKind.WANDER) -> FishState:
    return FishState(pos=pos, vel=ZERO, behavior=behavior)


class TestTankBounds:
    BOUNDS = TankBounds(min=Vec3(0, 0, 0), max=Vec3(0.8, 0.5, 0.3))

    def test_contains(self):
        assert self.BOUNDS.contains(Vec3(0.4, 0.2, 0.1))
        assert not self.BOUNDS.contains(Vec3(0.9, 0.2, 0.1))

    def test_collide_clamps_position_per_axis(self):
        pos, vel = self.BOUNDS.collide(Vec3(0.9, -0.1, 0.1), Vec3(0.2, -0.3, 0.05))
        assert pos == Vec3(0.8, 0.0, 0.1)
        assert vel == Vec3(0.0, 0.0, 0.05)

    def test_collide_keeps_outward_of_wall_velocity(self):
        # moving away from the violated wall is preserved
        pos, vel = self.BOUNDS.collide(Vec3(0.9, 0.2, 0.1), Vec3(-0.2, 0.0, 0.0))
        assert pos.x == 0.8
        assert vel.x == -0.2

    def test_interior_untouched(self):
        p, v = Vec3(0.4, 0.25, 0.15), Vec3(0.1, -0.1, 0.05)
        assert self.BOUNDS.collide(p, v) == (p, v)


class TestWander:
    def test_containment_over_ten_thousand_steps_is_exact(self):
        p = BehaviorParams()
        rng = random.Random(7)
        s = at_rest(p.wander_center)
        for _ in range(10_000):
            s = wander_step(s, p, rng, DT)
            assert s.pos.sub(p.wander_center).norm() <= p.wander_radius

    def test_containment_from_outside_start(self):
        p = BehaviorParams()
        rng = random.Random(3)
        s = at_rest(p.wander_center.add(Vec3(1.0, 1.0, 1.0)))
        s = wander_step(s, p, rng, DT)
        assert s.pos.sub(p.wander_center).norm() <= p.wander_radius

    def test_golden_trajectory_is_stable(self):
        # frozen seed-42 run; any change to wander arithmetic shows up here
        p = BehaviorParams()
        rng = random.Random(42)
        s = at_rest(p.wander_center)
        for _ in range(100):
            s = wander_step(s, p, rng, DT)
        assert s.pos == Vec3(x=0.4096571075571171, y=0.26149617622729515, z=0.19656046233797772)
        assert s.vel == Vec3(x=-0.03736264709067709, y=0.012267748920820092, z=-0.02086007825793867)

    def test_zero_jitter_at_center_is_fixed_point(self):
        p = BehaviorParams(wander_jitter=0.0)
        s = at_rest(p.wander_center)
        s2 = wander_step(s, p, random.Random(0), DT)
        assert s2.pos == s.pos
        assert s2.vel == ZERO


class TestPursue:
    def test_first_tick_from_rest_reaches_accel_limited_speed(self):
        p = BehaviorParams()
        s = at_rest(Vec3(0.1, 0.1, 0.1), BehaviorKind.PURSUE)
        s2 = pursue_step(s, Vec3(0.7, 0.1, 0.1), p, DT)
        assert s2.vel.norm() == pytest.approx(min(p.max_accel * DT, p.max_speed), rel=1e-12)
        assert s2.vel.x > 0 and abs(s2.vel.y) < 1e-15

    def test_clamped_acceleration_matches_hand_computation(self):
        # fish moving crosswise at full speed, target far along +x,
        # max_accel sized so one tick turns the velocity by a small step
        ms = 0.2
        ma = 0.1 * ms / DT
        p = BehaviorParams(max_speed=ms, max_accel=ma)
        s = FishState(pos=ZERO, vel=Vec3(0.0, ms, 0.0), behavior=BehaviorKind.PURSUE)
        s2 = pursue_step(s, Vec3(5.0, 0.0, 0.0), p, DT)
        expect = Vec3(ma * DT / math.sqrt(2.0), ms - ma * DT / math.sqrt(2.0), 0.0)
        assert s2.vel.x == pytest.approx(expect.x, abs=1e-12)
        assert s2.vel.y == pytest.approx(expect.y, abs=1e-12)
        assert s2.vel.z == 0.0

    def test_on_target_comes_to_rest(self):
        p = BehaviorParams()
        target = Vec3(0.4, 0.25, 0.15)
        s = FishState(pos=target, vel=Vec3(0.0, 0.01, 0.0), behavior=BehaviorKind.PURSUE)
        for _ in range(10):
            s = pursue_step(s, target, p, DT)
        assert s.vel.norm() < 1e-12
        s2 = pursue_step(s, s.pos, p, DT)
        assert s2.pos == s.pos

    def test_distance_strictly_decreases_after_alignment(self):
        # worst case: initial velocity directly away at full speed
        p = BehaviorParams(bounds=None)
        target = Vec3(0.0, 0.0, 0.0)
        s = FishState(pos=Vec3(0.4, 0.0, 0.0), vel=Vec3(p.max_speed, 0.0, 0.0), behavior=BehaviorKind.PURSUE)
        align_ticks = math.ceil(2.0 * p.max_speed / p.max_accel / DT)
        for _ in range(align_ticks):
            s = pursue_step(s, target, p, DT)
        dist = s.pos.sub(target).norm()
        reached = False
        for _ in range(2000):
            s = pursue_step(s, target, p, DT)
            d2 = s.pos.sub(target).norm()
            if d2 <= p.max_speed * DT:
                reached = True
                break
            assert d2 < dist
            dist = d2
        assert reached


class TestFlee:
    def test_distance_strictly_increases_after_alignment(self):
        # mirror of the pursuit property: initial velocity toward the threat
        p = BehaviorParams(bounds=None)
        threat = Vec3(0.0, 0.0, 0.0)
        s = FishState(pos=Vec3(0.1, 0.0, 0.0), vel=Vec3(-p.max_speed, 0.0, 0.0), behavior=BehaviorKind.FLEE)
        align_ticks = math.ceil(2.0 * p.max_speed / p.max_accel / DT)
        for _ in range(align_ticks):
            s = flee_step(s, threat, p, DT)
        dist = s.pos.sub(threat).norm()
        for _ in range(600):
            s = flee_step(s, threat, p, DT)
            d2 = s.pos.sub(threat).norm()
            assert d2 > dist
            dist = d2

    def test_flee_mirrors_pursuit_without_walls(self):
        # reflecting the target through the fish makes the two desired
        # velocities identical, so the trajectories must coincide
        p = BehaviorParams(bounds=None)
        start = Vec3(0.3, 0.2, 0.1)
        target = Vec3(0.7, 0.4, 0.2)
        sp = FishState(pos=start, vel=Vec3(0.01, -0.02, 0.0), behavior=BehaviorKind.PURSUE)
        sf = FishState(pos=start, vel=Vec3(0.01, -0.02, 0.0), behavior=BehaviorKind.FLEE)
        for _ in range(50):
            threat = Vec3(
                2.0 * sf.pos.x - target.x, 2.0 * sf.pos.y - target.y, 2.0 * sf.pos.z - target.z
            )
            sp = pursue_step(sp, target, p, DT)
            sf = flee_step(sf, threat, p, DT)
            for got, want in ((sf.pos, sp.pos), (sf.vel, sp.vel)):
                assert got.x == pytest.approx(want.x, abs=1e-12)
                assert got.y == pytest.approx(want.y, abs=1e-12)
                assert got.z == pytest.approx(want.z, abs=1e-12)

    def test_threat_on_fish_still_moves(self):
        p = BehaviorParams(bounds=None)
        pos = Vec3(0.4, 0.25, 0.15)
        s = flee_step(at_rest(pos, BehaviorKind.FLEE), pos, p, DT)
        assert s.pos != pos
        s_seeded = flee_step(at_rest(pos, BehaviorKind.FLEE), pos, p, DT, rng=random.Random(5))
        assert s_seeded.pos != pos

    def test_wall_adjacent_flee_stays_in_bounds(self):
        bounds = TankBounds(min=Vec3(0, 0, 0), max=Vec3(0.8, 0.5, 0.3))
        p = BehaviorParams(bounds=bounds)
        rng = random.Random(99)
        for _ in range(1000):
            pos = Vec3(
                rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.3)
            )
            threat = Vec3(pos.x + 0.05, pos.y, pos.z)
            s = FishState(
                pos=pos,
                vel=Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)),
                behavior=BehaviorKind.FLEE,
            )
            for _ in range(30):
                s = flee_step(s, threat, p, DT)
                assert bounds.contains(s.pos)

    def test_wall_correction_vanishes_beyond_margin(self):
        bounds = TankBounds(min=Vec3(0, 0, 0), max=Vec3(0.8, 0.5, 0.3))
        p = BehaviorParams(bounds=None)
        pw = BehaviorParams(bounds=bounds)
        start = at_rest(Vec3(0.4, 0.25, 0.15), BehaviorKind.FLEE)
        threat = Vec3(0.35, 0.25, 0.15)
        assert flee_step(start, threat, p, DT) == flee_step(start, threat, pw, DT)


states = st.builds(
    FishState,
    pos=st.builds(
        Vec3,
        st.floats(min_value=0.0, max_value=0.8),
        st.floats(min_value=0.0, max_value=0.5),
        st.floats(min_value=0.0, max_value=0.3),
    ),
    vel=st.builds(
        Vec3,
        st.floats(min_value=-0.2, max_value=0.2),
        st.floats(min_value=-0.2, max_value=0.2),
        st.floats(min_value=-0.2, max_value=0.2),
    ),
    behavior=st.sampled_from(list(BehaviorKind)),
)


@settings(max_examples=200)
@given(states, st.integers(min_value=0, max_value=2**32 - 1))
def test_speed_never_exceeds_max(s: FishState, seed: int):
    p = BehaviorParams()
    rng = random.Random(seed)
    hand = Vec3(0.2, 0.3, 0.0)
    for _ in range(5):
        s = step(s, hand, p, rng, DT)
        assert s.vel.norm() <= p.max_speed + 1e-9


def test_step_dispatches_by_behavior():
    p = BehaviorParams()
    hand = Vec3(0.2, 0.3, 0.0)
    for kind in BehaviorKind:
        out = step(at_rest(p.wander_center, kind), hand, p, random.Random(1), DT)
        assert out.behavior is kind
