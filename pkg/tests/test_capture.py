"""Calibration solving and hand-state estimation.

Oracles are defined before the tests that rely on them: affine application is
re-done with bare arithmetic so the solver is never checked against itself.
"""

from __future__ import annotations

import io
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fishtank.capture import (
    CalibrationMap,
    DegenerateCorrespondences,
    FilterConfig,
    InvalidSample,
    RawSample,
    SampleHistory,
    TrackingLost,
    apply_calibration,
    estimate_state,
    read_raw_stream,
    solve_calibration,
    write_raw_stream,
)

# known map: uniform scale 0.6, translation (0.1, 0.2)
KNOWN = (0.6, 0.0, 0.1, 0.0, 0.6, 0.2)


def affine_oracle(coeffs: tuple[float, ...], u: float, v: float) -> tuple[float, float]:
    """Plain 2x3 matrix application, independent of CalibrationMap."""
    a, b, tx, c, d, ty = coeffs
    return (a * u + b * v + tx, c * u + d * v + ty)


def pairs_through(coeffs: tuple[float, ...], points: list[tuple[float, float]]):
    return [((u, v), affine_oracle(coeffs, u, v)) for u, v in points]


def line_samples(speed: float, n: int, rate: float = 60.0, noise=None) -> list[RawSample]:
    out = []
    for i in range(n):
        t = i / rate
        x = 0.1 + speed * t
        y = 0.3
        if noise is not None:
            x += noise()
            y += noise()
        out.append(RawSample(t=t, u=x, v=y, valid=True))
    return out


class TestSolveCalibration:
    def test_identity_pairs_give_identity_map(self):
        cal = solve_calibration([((0, 0), (0, 0)), ((1, 0), (1, 0)), ((0, 1), (0, 1))])
        ident = CalibrationMap.identity()
        for name in ("a", "b", "tx", "c", "d", "ty"):
            assert getattr(cal, name) == pytest.approx(getattr(ident, name), abs=1e-9)

    def test_recovers_known_map_from_three_points(self):
        cal = solve_calibration(pairs_through(KNOWN, [(0.0, 0.0), (1.0, 0.0), (0.3, 0.9)]))
        assert (cal.a, cal.b, cal.tx, cal.c, cal.d, cal.ty) == pytest.approx(KNOWN, abs=1e-9)

    def test_recovers_known_map_overdetermined(self):
        points = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.4, 0.7)]
        cal = solve_calibration(pairs_through(KNOWN, points))
        assert (cal.a, cal.b, cal.tx, cal.c, cal.d, cal.ty) == pytest.approx(KNOWN, abs=1e-9)

    def test_collinear_points_rejected(self):
        pts = [(0.1 * i, 0.2 * i) for i in range(4)]
        with pytest.raises(DegenerateCorrespondences):
            solve_calibration(pairs_through(KNOWN, pts))

    def test_too_few_pairs_rejected(self):
        with pytest.raises(DegenerateCorrespondences):
            solve_calibration(pairs_through(KNOWN, [(0, 0), (1, 1)]))

    @given(
        st.tuples(
            st.floats(min_value=0.2, max_value=3.0),
            st.floats(min_value=-1.0, max_value=1.0),
            st.floats(min_value=-1.0, max_value=1.0),
            st.floats(min_value=-1.0, max_value=1.0),
            st.floats(min_value=0.2, max_value=3.0),
            st.floats(min_value=-1.0, max_value=1.0),
        )
    )
    def test_recovery_for_arbitrary_invertible_maps(self, coeffs):
        a, b, tx, c, d, ty = coeffs
        if abs(a * d - b * c) < 1e-3:
            return
        points = [(0.0, 0.0), (1.0, 0.1), (0.2, 1.0), (0.8, 0.7)]
        cal = solve_calibration(pairs_through(coeffs, points))
        assert (cal.a, cal.b, cal.tx, cal.c, cal.d, cal.ty) == pytest.approx(coeffs, abs=1e-9)


class TestCalibrationMap:
    def test_singular_linear_part_rejected(self):
        with pytest.raises(ValueError):
            CalibrationMap(a=1.0, b=2.0, tx=0.0, c=0.5, d=1.0, ty=0.0)

    def test_apply_identity(self):
        assert apply_calibration(CalibrationMap.identity(), RawSample(0, 0.5, 0.5, True)) == (
            0.5,
            0.5,
            0.0,
        )

    def test_apply_translation(self):
        cal = CalibrationMap(a=1, b=0, tx=0.1, c=0, d=1, ty=0.2)
        pos = apply_calibration(cal, RawSample(0, 0.0, 0.0, True))
        assert (pos.x, pos.y, pos.z) == pytest.approx((0.1, 0.2, 0.0), abs=1e-12)

    def test_apply_matches_matrix_oracle(self):
        cal = CalibrationMap(a=KNOWN[0], b=KNOWN[1], tx=KNOWN[2], c=KNOWN[3], d=KNOWN[4], ty=KNOWN[5])
        pos = apply_calibration(cal, RawSample(0, 0.5, 0.25, True))
        assert (pos.x, pos.y) == pytest.approx(affine_oracle(KNOWN, 0.5, 0.25), abs=1e-12)

    def test_invalid_sample_rejected(self):
        with pytest.raises(InvalidSample):
            apply_calibration(CalibrationMap.identity(), RawSample(0, 0.5, 0.5, False))

    @given(st.floats(min_value=-2, max_value=2), st.floats(min_value=-2, max_value=2))
    def test_invert_round_trips(self, x: float, y: float):
        cal = CalibrationMap(a=0.7, b=0.1, tx=0.05, c=-0.2, d=0.9, ty=0.3)
        u, v = cal.invert_point(x, y)
        assert cal.apply_point(u, v) == pytest.approx((x, y), abs=1e-9)

    def test_dict_round_trip(self):
        cal = CalibrationMap(a=0.7, b=0.1, tx=0.05, c=-0.2, d=0.9, ty=0.3)
        assert CalibrationMap.from_dict(cal.to_dict()) == cal


class TestEstimateState:
    def test_stationary_hand_has_zero_speed(self):
        samples = [RawSample(i / 60.0, 0.5, 0.5, True) for i in range(61)]
        st_ = estimate_state(samples, CalibrationMap.identity(), FilterConfig())
        assert st_.speed <= 1e-9
        assert (st_.pos.x, st_.pos.y) == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_noiseless_line_recovers_speed_exactly(self):
        cfg = FilterConfig(alpha=1.0)
        samples = line_samples(0.2, 31)
        st_ = estimate_state(samples, CalibrationMap.identity(), cfg)
        assert abs(st_.speed - 0.2) / 0.2 <= 1e-9
        assert st_.vel.x == pytest.approx(0.2, rel=1e-9)
        assert st_.vel.y == pytest.approx(0.0, abs=1e-9)

    def test_noisy_line_speed_within_monte_carlo_tolerance(self):
        cfg = FilterConfig(alpha=1.0)
        worst = 0.0
        for seed in range(100):
            rng = random.Random(seed)
            samples = line_samples(0.2, 31, noise=lambda: rng.uniform(-0.002, 0.002))
            st_ = estimate_state(samples, CalibrationMap.identity(), cfg)
            worst = max(worst, abs(st_.speed - 0.2))
        assert worst < 0.02

    def test_speed_is_velocity_norm(self):
        samples = line_samples(0.15, 20)
        st_ = estimate_state(samples, CalibrationMap.identity(), FilterConfig())
        assert st_.speed == pytest.approx(st_.vel.norm(), abs=1e-9)

    def test_calibration_applied_before_estimation(self):
        cal = CalibrationMap(a=2.0, b=0.0, tx=0.0, c=0.0, d=2.0, ty=0.0)
        samples = line_samples(0.1, 31)
        st_ = estimate_state(samples, cal, FilterConfig(alpha=1.0))
        assert st_.speed == pytest.approx(0.2, rel=1e-9)

    def test_single_sample_has_zero_velocity(self):
        st_ = estimate_state([RawSample(1.0, 0.4, 0.4, True)], CalibrationMap.identity(), FilterConfig())
        assert st_.speed == 0.0
        assert st_.t == 1.0

    def test_out_of_order_samples_ignored(self):
        cfg = FilterConfig(alpha=0.5)
        clean = line_samples(0.2, 20)
        shuffled = list(clean)
        shuffled.insert(10, RawSample(0.001, 0.9, 0.9, True))
        a = estimate_state(clean, CalibrationMap.identity(), cfg)
        b = estimate_state(shuffled, CalibrationMap.identity(), cfg)
        assert a == b

    def test_invalid_samples_skipped(self):
        cfg = FilterConfig(alpha=1.0)
        samples = line_samples(0.2, 31)
        samples.insert(15, RawSample(15.5 / 60.0, 0.0, 0.0, False))
        st_ = estimate_state(samples, CalibrationMap.identity(), cfg)
        assert st_.speed == pytest.approx(0.2, rel=1e-9)

    def test_tracking_lost_after_timeout(self):
        samples = [RawSample(i / 60.0, 0.5, 0.5, True) for i in range(10)]
        samples += [RawSample(1.0 + i / 60.0, 0.0, 0.0, False) for i in range(10)]
        with pytest.raises(TrackingLost):
            estimate_state(samples, CalibrationMap.identity(), FilterConfig())

    def test_empty_history_is_lost(self):
        with pytest.raises(TrackingLost):
            estimate_state([], CalibrationMap.identity(), FilterConfig())

    @given(
        st.lists(
            st.tuples(st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1)),
            min_size=1,
            max_size=40,
        ),
        st.floats(min_value=0.05, max_value=1.0),
    )
    def test_smoothed_position_stays_in_window_hull(self, points, alpha):
        cfg = FilterConfig(alpha=alpha)
        samples = [RawSample(i / 60.0, u, v, True) for i, (u, v) in enumerate(points)]
        st_ = estimate_state(samples, CalibrationMap.identity(), cfg)
        cutoff = samples[-1].t - cfg.window
        in_window = [s for s in samples if s.t >= cutoff]
        assert min(s.u for s in in_window) - 1e-12 <= st_.pos.x <= max(s.u for s in in_window) + 1e-12
        assert min(s.v for s in in_window) - 1e-12 <= st_.pos.y <= max(s.v for s in in_window) + 1e-12


class TestSampleHistory:
    def test_rejects_non_increasing_timestamps(self):
        h = SampleHistory(FilterConfig())
        assert h.append(RawSample(0.1, 0, 0, True))
        assert not h.append(RawSample(0.1, 0, 0, True))
        assert not h.append(RawSample(0.05, 0, 0, True))
        assert h.append(RawSample(0.2, 0, 0, True))

    def test_prunes_samples_beyond_span(self):
        h = SampleHistory(FilterConfig())
        for i in range(200):
            h.append(RawSample(i / 60.0, 0.5, 0.5, True))
        snap = h.snapshot()
        assert snap[-1].t - snap[0].t <= 0.5 + 2 / 60.0
        assert h.latest == snap[-1]

    def test_latest_valid_skips_dropouts(self):
        h = SampleHistory(FilterConfig())
        h.append(RawSample(0.0, 0.5, 0.5, True))
        h.append(RawSample(0.1, 0.0, 0.0, False))
        assert h.latest_valid_t() == 0.0


def test_raw_stream_round_trip():
    samples = [RawSample(i / 60.0, 0.1 * i, 0.5, i % 3 != 0) for i in range(10)]
    buf = io.StringIO()
    write_raw_stream(samples, buf)
    buf.seek(0)
    assert list(read_raw_stream(buf)) == samples
