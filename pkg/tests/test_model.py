from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import lz, occupancy, split_frequencies

from coupled_engine.model import (
    CONSTANTS,
    TWO_PI,
    BathSpec,
    CoupledSystem,
    MechanicalMode,
    lz_diabatic_probability,
    mixing_angle,
    mode_transform,
    normal_mode_frequencies,
    thermal_occupancy,
    transform_coefficients,
    twin_mode_frequencies,
)

LAM = TWO_PI * 40.0
detunings = st.floats(-TWO_PI * 2000, TWO_PI * 2000, allow_nan=False)
couplings = st.floats(TWO_PI * 0.1, TWO_PI * 500, allow_nan=False)


def test_constants_are_codata():
    assert CONSTANTS.hbar == pytest.approx(1.054571817e-34, rel=1e-12)
    assert CONSTANTS.k_B == pytest.approx(1.380649e-23, rel=1e-12)


def test_mode_validation():
    with pytest.raises(ValueError):
        MechanicalMode(-1.0, 1.0)
    with pytest.raises(ValueError):
        MechanicalMode(TWO_PI * 400e3, -1.0)
    with pytest.raises(ValueError):
        MechanicalMode(100.0, 1.0)  # gamma not << omega0
    with pytest.raises(ValueError):
        CoupledSystem(MechanicalMode(1e6, 1.0), MechanicalMode(1e6, 1.0), -1.0)
    with pytest.raises(ValueError):
        BathSpec(300.0, 200.0)
    with pytest.raises(ValueError):
        BathSpec(0.0, 200.0)


def test_strong_coupling_flag():
    assert CoupledSystem.default().strong_coupling
    assert not CoupledSystem.default(lam=TWO_PI * 10).strong_coupling


class TestNormalModeFrequencies:
    def test_resonance(self):
        wp, wm = normal_mode_frequencies(0.0, LAM)
        assert wp == pytest.approx(LAM) and wm == pytest.approx(-LAM)

    def test_default_window_endpoint(self):
        wp, wm = normal_mode_frequencies(TWO_PI * 200, LAM)
        ep, em = split_frequencies(TWO_PI * 200, LAM)
        assert wp == pytest.approx(ep, rel=1e-12) and wm == pytest.approx(em, rel=1e-9)
        assert wp / TWO_PI == pytest.approx(207.70, abs=5e-3)
        assert wm / TWO_PI == pytest.approx(-7.70, abs=5e-3)

    def test_uncoupled(self):
        assert normal_mode_frequencies(TWO_PI * 100, 0.0) == pytest.approx((TWO_PI * 100, 0.0))

    @given(detunings, couplings)
    def test_gap_and_order(self, d, lam):
        wp, wm = normal_mode_frequencies(d, lam)
        assert wp >= wm
        assert wp - wm == pytest.approx(2 * math.sqrt(d * d / 4 + lam * lam), rel=1e-12)

    def test_vectorized(self):
        d = np.linspace(-1000, 1000, 11)
        wp, wm = normal_mode_frequencies(d, LAM)
        assert wp.shape == d.shape and np.all(wp > wm)


class TestTwinFrequencies:
    def test_resonance(self):
        assert twin_mode_frequencies(0.0, LAM) == pytest.approx((LAM, -LAM))

    def test_default_window(self):
        wp, wm = twin_mode_frequencies(TWO_PI * 720, LAM)
        assert wp / TWO_PI == pytest.approx(362.2, abs=0.05) and wm == -wp

    def test_uncoupled(self):
        assert twin_mode_frequencies(TWO_PI * 300, 0.0) == pytest.approx((TWO_PI * 150, -TWO_PI * 150))

    @given(detunings, couplings)
    def test_branch_symmetry(self, d, lam):
        assert twin_mode_frequencies(d, lam) == twin_mode_frequencies(-d, lam)
        wp, wm = twin_mode_frequencies(d, lam)
        assert wp == -wm and wp >= lam


class TestModeTransform:
    def test_resonant_superposition(self):
        u = mode_transform(0.0, LAM)
        s = 1 / math.sqrt(2)
        assert np.allclose(np.abs(u.upper), [s, s], atol=1e-15)
        assert np.allclose(np.abs(u.lower), [s, s], atol=1e-15)
        assert u.u12 * u.u22 == pytest.approx(0.5, abs=1e-15)

    def test_default_endpoint_against_eigh(self):
        d = TWO_PI * 200
        u = mode_transform(d, LAM)
        assert u.u12 == pytest.approx(0.982, abs=5e-4)
        assert u.u22 == pytest.approx(0.189, abs=5e-4)
        w, v = np.linalg.eigh(np.array([[d, LAM], [LAM, 0.0]]))
        assert abs(v[:, 1] @ u.upper) == pytest.approx(1.0, abs=1e-12)
        assert abs(v[:, 0] @ u.lower) == pytest.approx(1.0, abs=1e-12)

    def test_large_detuning_sign_convention(self):
        u = mode_transform(TWO_PI * 1e6, LAM)
        assert u.upper == pytest.approx([1.0, 0.0], abs=1e-4)

    def test_degenerate_point(self):
        with pytest.raises(ValueError, match="transform undefined at exact degeneracy"):
            mode_transform(0.0, 0.0)

    @given(st.floats(-TWO_PI * 720, TWO_PI * 720), couplings)
    def test_orthogonal_and_proper(self, d, lam):
        u = mode_transform(d, lam).u
        assert np.max(np.abs(u.T @ u - np.eye(2))) < 1e-12
        assert np.linalg.det(u) == pytest.approx(1.0, abs=1e-12)

    def test_grid_orthogonality_and_eigen_consistency(self):
        h = None
        for d in np.linspace(-TWO_PI * 720, TWO_PI * 720, 100):
            u = mode_transform(d, LAM).u
            assert np.max(np.abs(u.T @ u - np.eye(2))) < 1e-12
            diag = u.T @ np.array([[d, LAM], [LAM, 0.0]]) @ u
            wp, wm = normal_mode_frequencies(d, LAM)
            assert diag[1, 1] == pytest.approx(wp, rel=1e-9)
            assert diag[0, 0] == pytest.approx(wm, rel=1e-9, abs=1e-9 * LAM)
            assert abs(diag[0, 1]) < 1e-9 * LAM
            h = u

    def test_continuity_along_sweep(self):
        prev = None
        for d in np.linspace(TWO_PI * 200, -TWO_PI * 200, 50):
            u = mode_transform(d, LAM, prev)
            if prev is not None:
                assert u.upper @ prev.upper > 0.9 and u.lower @ prev.lower > 0.9
            prev = u

    def test_continuity_flip(self):
        prev = mode_transform(TWO_PI * 10, LAM)
        flipped = type(prev)(-prev.u)
        u = mode_transform(TWO_PI * 9, LAM, flipped)
        assert u.upper @ flipped.upper > 0

    def test_vectorized_coefficients_match(self):
        d = np.linspace(-TWO_PI * 720, TWO_PI * 720, 37)
        u11, u21, u12, u22 = transform_coefficients(d, LAM)
        for k, dk in enumerate(d):
            u = mode_transform(dk, LAM)
            assert (u11[k], u21[k], u12[k], u22[k]) == pytest.approx((u.u11, u.u21, u.u12, u.u22), abs=1e-14)
        assert np.all(u12 >= 0) and np.all(u22 >= 0)

    def test_mixing_angle(self):
        assert mixing_angle(0.0, LAM) == pytest.approx(math.pi / 4)
        assert math.tan(2 * mixing_angle(TWO_PI * 200, LAM)) == pytest.approx(2 * LAM / (TWO_PI * 200))


class TestLandauZener:
    def test_paper_values(self):
        a20 = TWO_PI * 20e3
        assert lz_diabatic_probability(LAM, a20) == pytest.approx(lz(LAM, a20), rel=1e-14)
        assert abs(lz_diabatic_probability(LAM, a20) - 0.04) < 0.005

    def test_uncoupled(self):
        assert lz_diabatic_probability(0.0, 1.0) == 1.0

    def test_zero_rate(self):
        with pytest.raises(ValueError, match="zero sweep rate; adiabatic limit"):
            lz_diabatic_probability(LAM, 0.0)

    def test_sign_of_rate_irrelevant(self):
        assert lz_diabatic_probability(LAM, -5e5) == lz_diabatic_probability(LAM, 5e5)

    @settings(max_examples=200)
    @given(couplings, st.floats(1e4, 1e7), st.floats(1.01, 3.0))
    def test_monotonicity(self, lam, alpha, k):
        p = lz_diabatic_probability(lam, alpha)
        if 0 < p < 1:
            assert lz_diabatic_probability(lam, alpha * k) > p
            assert lz_diabatic_probability(lam * k, alpha) < p or lz_diabatic_probability(lam * k, alpha) == 0.0


class TestThermalOccupancy:
    def test_room_temperature(self):
        n = thermal_occupancy(295.0, TWO_PI * 400e3)
        assert n == pytest.approx(occupancy(295.0, TWO_PI * 400e3), rel=1e-12)
        assert n == pytest.approx(1.54e7, rel=5e-3)

    def test_zero_and_linear(self):
        w = TWO_PI * 400e3
        assert thermal_occupancy(0.0, w) == 0.0
        assert thermal_occupancy(600.0, w) == pytest.approx(2 * thermal_occupancy(300.0, w), rel=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            thermal_occupancy(300.0, 0.0)
        with pytest.raises(ValueError):
            thermal_occupancy(-1.0, 1.0)
