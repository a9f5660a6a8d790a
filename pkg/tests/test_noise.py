import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import constants as sc

from ionheat.errors import IonHeatError
from ionheat.noise import (
    FieldNoisePoint,
    GeometryFactor,
    SE_to_rate,
    distance_rescale,
    field_to_voltage,
    frequency_normalized_SE,
    gate_error,
    geometry_from_noise_pair,
    johnson_SE,
    johnson_resistance,
    rate_to_SE,
    voltage_to_field,
)

from conftest import se_per_rate_oracle


class TestRateConversion:
    def test_lowest_noise_point(self, trap):
        rate = SE_to_rate(7e-14, trap)
        assert rate == pytest.approx(7e-14 / se_per_rate_oracle(), rel=1e-12)
        assert rate == pytest.approx(3.5, rel=0.02)

    def test_zero_and_linearity(self, trap):
        assert rate_to_SE(0.0, trap) == 0.0
        assert rate_to_SE(26.0, trap) == pytest.approx(2 * rate_to_SE(13.0, trap), rel=1e-15)

    @given(st.floats(1e-3, 1e6))
    def test_round_trip(self, trap, rate):
        assert SE_to_rate(rate_to_SE(rate, trap), trap) == pytest.approx(rate, rel=1e-12)

    def test_negative_rejected(self, trap):
        with pytest.raises(IonHeatError):
            rate_to_SE(-1.0, trap)
        with pytest.raises(IonHeatError):
            SE_to_rate(-1.0, trap)


class TestNormalization:
    def test_omega_se(self):
        pt = FieldNoisePoint(7e-14, 2 * math.pi * 1.32e6)
        assert frequency_normalized_SE(pt) == pytest.approx(5.8e-7, rel=0.01)
        assert frequency_normalized_SE(FieldNoisePoint(0.0, 1.0)) == 0.0

    def test_point_validation(self):
        with pytest.raises(IonHeatError):
            FieldNoisePoint(-1.0, 1.0)
        with pytest.raises(IonHeatError):
            FieldNoisePoint(1.0, 0.0)


class TestDistance:
    def test_identity(self):
        assert distance_rescale(3e-13, 50e-6, 50e-6) == 3e-13

    def test_doubling(self):
        assert distance_rescale(1.6e-12, 50e-6, 100e-6) == pytest.approx(1e-13, rel=1e-14)

    def test_75_um(self):
        assert distance_rescale(1.0, 50e-6, 75e-6) == pytest.approx((50 / 75) ** 4, rel=1e-14)
        assert distance_rescale(1.0, 50e-6, 75e-6) == pytest.approx(0.1975, abs=1e-4)

    @given(st.floats(1e-6, 1e-2), st.floats(1e-6, 1e-2), st.floats(1e-6, 1e-2), st.floats(0.5, 6))
    def test_composition(self, a, b, c, k):
        two_step = distance_rescale(distance_rescale(1e-12, a, b, k), b, c, k)
        assert two_step == pytest.approx(distance_rescale(1e-12, a, c, k), rel=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(IonHeatError):
            distance_rescale(1.0, 0.0, 1.0)


class TestVoltageAndJohnson:
    def test_calibrated_geometry(self, cfg):
        geo = geometry_from_noise_pair(1.1e-9, 7e-14)
        assert geo.effective_distance == pytest.approx(4.2e-3, rel=0.02)
        assert geo.effective_distance == pytest.approx(cfg.geometry().effective_distance, rel=1e-4)
        assert voltage_to_field((1.1e-9) ** 2, geo) == pytest.approx(7e-14, rel=1e-12)

    def test_voltage_linear_and_inverse(self):
        geo = GeometryFactor(4e-3)
        assert voltage_to_field(0.0, geo) == 0.0
        assert voltage_to_field(4e-18, geo) == pytest.approx(4 * voltage_to_field(1e-18, geo), rel=1e-15)
        assert field_to_voltage(voltage_to_field(3e-18, geo), geo) == pytest.approx(3e-18, rel=1e-15)

    def test_johnson_calibration(self, cfg):
        geo = cfg.geometry()
        r = cfg["johnson"]["resistance_ohm"]
        se = johnson_SE(r, 4.0, geo)
        assert se == pytest.approx(4 * sc.k * 4.0 * r / geo.effective_distance**2, rel=1e-12)
        assert se == pytest.approx(1e-17, rel=0.01)
        assert se < 7e-14 / 1e3
        assert johnson_resistance(1e-17, 4.0, geo) == pytest.approx(r, rel=1e-3)

    def test_johnson_linear(self):
        geo = GeometryFactor(4e-3)
        assert johnson_SE(0.0, 4.0, geo) == 0.0
        assert johnson_SE(2.0, 4.0, geo) == pytest.approx(2 * johnson_SE(1.0, 4.0, geo), rel=1e-15)
        assert johnson_SE(1.0, 8.0, geo) == pytest.approx(2 * johnson_SE(1.0, 4.0, geo), rel=1e-15)

    def test_geometry_validation(self):
        with pytest.raises(IonHeatError):
            GeometryFactor(0.0)


class TestGateError:
    def test_lowest_rate(self, trap):
        err = gate_error(SE_to_rate(7e-14, trap), 10e-6)
        assert 3e-5 <= err <= 5e-5

    def test_trivial(self):
        assert gate_error(0.0, 1e-5) == 0.0
        assert gate_error(4.0, 2e-5) == pytest.approx(2 * gate_error(4.0, 1e-5), rel=1e-15)
        with pytest.raises(IonHeatError):
            gate_error(-1.0, 1e-5)
