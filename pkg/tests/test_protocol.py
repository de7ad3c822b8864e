from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupled_engine.model import TWO_PI, BathSpec
from coupled_engine.protocol import (
    SINGLE,
    TWIN,
    Protocol,
    bath_at,
    build_single_cylinder,
    build_twin,
    detuning_at,
    frequency_at,
    grid_index,
    hot_at,
    stroke_bounds,
    validate,
    with_sweep_time,
)

durations = st.floats(1e-3, 1.0)
windows = st.tuples(st.floats(-TWO_PI * 900, TWO_PI * 900), st.floats(TWO_PI * 1, TWO_PI * 900))


class TestBuilders:
    def test_default_single_rate(self):
        p = build_single_cylinder()
        assert p.kind == SINGLE
        assert p.sweep_rate == pytest.approx(TWO_PI * 20e3, rel=1e-12)
        assert p.period == pytest.approx(0.805)

    def test_fifteen_ms_rate(self):
        p = build_single_cylinder(sweep_time=15e-3)
        assert p.sweep_rate / TWO_PI / 1e3 == pytest.approx(26.67, abs=0.01)

    @pytest.mark.parametrize("kw", [{"sweep_time": 0}, {"therm_cold": 0}, {"therm_hot": -1}])
    def test_bad_durations(self, kw):
        with pytest.raises(ValueError):
            build_single_cylinder(**kw)
        with pytest.raises(ValueError):
            build_twin(**kw)

    def test_window_order(self):
        with pytest.raises(ValueError):
            build_single_cylinder(-1.0, 1.0)

    def test_single_keeps_mode2_fixed_and_hot_only_on_last_stroke(self):
        p = build_single_cylinder()
        assert all(s.omega2_start == s.omega2_end == 0 for s in p.segments)
        assert [s.hot_bath_on_mode1 for s in p.segments] == [False, False, False, True]

    def test_twin_default_window(self):
        p = build_twin()
        assert p.kind == TWIN
        t = np.linspace(0, p.sweep_time, 9)
        d = detuning_at(p, t)
        assert np.allclose(d, np.linspace(TWO_PI * 720, -TWO_PI * 180, 9), atol=1e-9)
        w1, w2 = frequency_at(p, t)
        assert np.allclose(w1, -w2, atol=1e-9)

    def test_with_sweep_time(self):
        p = with_sweep_time(build_twin(), 5e-3)
        assert p.kind == TWIN and p.sweep_time == 5e-3
        assert p.delta_omega_i == pytest.approx(TWO_PI * 720)


class TestEvaluation:
    def test_frequency_examples(self):
        p = build_single_cylinder()
        assert frequency_at(p, 0.0) == pytest.approx((TWO_PI * 200, 0.0))
        assert frequency_at(p, 10e-3) == pytest.approx((0.0, 0.0), abs=1e-9)
        assert frequency_at(p, p.period) == frequency_at(p, 0.0)

    def test_boundary_continuity(self):
        for p in (build_single_cylinder(), build_twin()):
            for s in p.segments:
                before = np.array(frequency_at(p, s.t_end - 1e-12))
                after = np.array(frequency_at(p, s.t_end))
                assert np.max(np.abs(before - after)) < 1e-6  # slope * 1e-12 s

    def test_bath_schedule(self):
        p = build_single_cylinder()
        bath = BathSpec()
        t41 = p.stroke("4->1").t_start + 0.1
        assert bath_at(p, t41, bath) == (bath.t_hot, bath.t_cold)
        assert bath_at(p, 0.2, bath) == (bath.t_cold, bath.t_cold)
        assert bath_at(p, 1e-9, bath) == (bath.t_cold, bath.t_cold)
        assert bath_at(p, p.period - 1e-9, bath) == (bath.t_hot, bath.t_cold)
        assert hot_at(p, np.array([0.0, t41])).tolist() == [False, True]

    def test_stroke_bounds(self):
        b = stroke_bounds(build_single_cylinder())
        assert b["1->2"] == (0.0, 0.02) and b["4->1"][1] == pytest.approx(0.805)

    def test_grid_index(self):
        assert grid_index(0.02, 1e-4) == 200
        with pytest.raises(ValueError):
            grid_index(0.02005, 1e-4)


class TestValidate:
    def test_ok(self):
        assert validate(build_single_cylinder()) == []
        assert validate(build_twin()) == []

    def test_gap(self):
        p = build_single_cylinder()
        segs = list(p.segments)
        segs[2] = dataclasses.replace(segs[2], t_start=segs[2].t_start + 1e-3)
        assert "segments not contiguous" in validate(Protocol(tuple(segs), p.period))

    def test_not_closed(self):
        p = build_single_cylinder()
        segs = list(p.segments)
        segs[3] = dataclasses.replace(segs[3], omega1_end=segs[3].omega1_end + 1.0)
        problems = validate(Protocol(tuple(segs), p.period))
        assert "cycle does not close" in problems

    def test_labels(self):
        p = build_single_cylinder()
        segs = list(p.segments)
        segs[0] = dataclasses.replace(segs[0], label="x")
        assert validate(Protocol(tuple(segs), p.period))


class TestProperties:
    @settings(max_examples=50)
    @given(windows, durations, durations, durations, st.booleans())
    def test_built_protocols_are_valid(self, win, ts, tc, th, twin):
        di = win[0] + win[1]
        df = win[0] - win[1]
        p = (build_twin if twin else build_single_cylinder)(di, df, ts, tc, th)
        assert validate(p) == []
        assert len(p.segments) == 4
        assert frequency_at(p, 0.0) == frequency_at(p, p.period)
        assert p.sweep_rate == pytest.approx(abs(di - df) / ts, rel=1e-12)
        for s in p.segments:
            flat = s.omega1_start == s.omega1_end and s.omega2_start == s.omega2_end
            assert flat == (s.label in ("2->3", "4->1"))

    def test_json_round_trip(self):
        for p in (build_single_cylinder(), build_twin(sweep_time=7e-3)):
            q = Protocol.from_json(p.to_json())
            assert q == p
