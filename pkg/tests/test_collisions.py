import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from ionheat.collisions import (
    CollisionModel,
    GasSpecies,
    LifetimeObservation,
    apparent_linear_rate,
    collision_safety_check,
    density_from_elastic_rate,
    elastic_rate,
    energy_transfer_fraction,
    fit_gamma_e,
    langevin_rate,
    max_energy_transfer,
    nbar_collisions_only,
    nbar_combined,
    relative_spread,
    sideband_ratio_combined,
)
from ionheat.errors import FitError, IonHeatError, ModelValidityError
from ionheat.inference import HeatingSeries

AMU = sc.physical_constants["atomic mass constant"][0]


def mu_kg(gas, ion):
    return gas.mass * ion.mass / (gas.mass + ion.mass) * AMU


def elastic_oracle(n_cm3, gas, ion):
    v = math.sqrt(2 * sc.k * gas.temperature / mu_kg(gas, ion))
    return 1.23e5 * (n_cm3 * 1e6) * v ** (1 / 3) * (gas.polarizability * 1e-6) ** (2 / 3)


def langevin_oracle(n_cm3, gas, ion):
    return n_cm3 * 1e6 * sc.e * math.sqrt(math.pi * gas.polarizability * 1e-6 / (sc.epsilon_0 * mu_kg(gas, ion)))


class TestOccupationFormulas:
    def test_collisions_only(self):
        assert nbar_collisions_only(10.0, 0.05) == pytest.approx(1.0, rel=1e-14)
        assert nbar_collisions_only(10.0, 0.04) == pytest.approx(0.4 / 0.6, rel=1e-14)
        assert nbar_collisions_only(0.0, 0.04) == 0.0

    def test_validity_boundary(self):
        with pytest.raises(ModelValidityError):
            nbar_collisions_only(10.0, 0.1)
        with pytest.raises(ModelValidityError):
            nbar_combined(CollisionModel(20.0, 13.0), [0.01, 0.06])

    def test_ratio_examples(self):
        assert sideband_ratio_combined(CollisionModel(10, 13), 0.02) == pytest.approx(0.2 + 0.8 * 0.26 / 1.26, rel=1e-14)
        assert sideband_ratio_combined(CollisionModel(0, 13), 0.02) == pytest.approx(0.26 / 1.26, rel=1e-14)
        assert sideband_ratio_combined(CollisionModel(10, 0), 0.02) == pytest.approx(0.2, rel=1e-14)

    def test_combined_example(self):
        assert nbar_combined(CollisionModel(10, 13), 0.02) == pytest.approx(0.575, rel=1e-14)

    def test_array_input(self):
        t = np.array([0.0, 0.01, 0.02])
        out = nbar_combined(CollisionModel(10, 13), t)
        assert out.shape == (3,)

    @settings(max_examples=200)
    @given(st.one_of(st.just(0.0), st.floats(1e-3, 50)), st.floats(0, 100), st.floats(0, 0.99))
    def test_identity(self, ge, ga, x):
        t = x / ge if ge > 0 else x
        m = CollisionModel(ge, ga)
        # exact rational evaluation of r and r/(1-r)
        e, a, tt = Fraction(ge), Fraction(ga), Fraction(t)
        r = e * tt + (1 - e * tt) * a * tt / (1 + a * tt)
        assert sideband_ratio_combined(m, t) == pytest.approx(float(r), rel=1e-12, abs=1e-300)
        assert nbar_combined(m, t) == pytest.approx(float(r / (1 - r)), rel=1e-12, abs=1e-300)

    @given(st.floats(1e-3, 10), st.floats(0, 100), st.one_of(st.just(0.0), st.floats(1e-3, 50)))
    def test_ratio_monotone(self, t_scale, ga, ge):
        t = min(t_scale * 1e-3, 0.98 / ge) if ge > 0 else t_scale * 1e-3
        base = sideband_ratio_combined(CollisionModel(ge, ga), t)
        assert sideband_ratio_combined(CollisionModel(ge, ga + 1), t) >= base
        assert sideband_ratio_combined(CollisionModel(ge, ga), t * 0.5) <= base

    def test_model_validation(self):
        with pytest.raises(IonHeatError):
            CollisionModel(-1.0)


class TestApparentRate:
    def test_no_collisions(self):
        assert apparent_linear_rate(CollisionModel(0, 13), [0, 0.01, 0.02, 0.03]) == pytest.approx(13, rel=1e-12)

    def test_small_delay_limit(self):
        assert apparent_linear_rate(CollisionModel(10, 13), np.linspace(0, 1e-5, 5)) == pytest.approx(23, rel=1e-3)

    def test_documented_grid(self):
        rate = apparent_linear_rate(CollisionModel(10, 13), [0.0, 0.01, 0.02, 0.03])
        assert rate == pytest.approx(32, rel=0.15)

    def test_monotone_in_max_delay(self):
        m = CollisionModel(10, 13)
        slopes = [apparent_linear_rate(m, np.linspace(0, tmax, 5)) for tmax in np.linspace(0.005, 0.09, 30)]
        assert np.all(np.diff(slopes) >= 0)
        assert slopes[0] >= 23

    def test_degenerate_grid(self):
        with pytest.raises(FitError):
            apparent_linear_rate(CollisionModel(10, 13), [0.01, 0.01, 0.01])


class TestFitGammaE:
    t = np.array([0.0, 0.01, 0.02, 0.03, 0.04])

    def series(self, ge, ga, n0, noise=None, sigma=0.05):
        n = n0 + nbar_combined(CollisionModel(ge, ga), self.t)
        if noise is not None:
            n = n + noise
        return HeatingSeries(tuple(zip(self.t, n, np.full(self.t.size, sigma))))

    def test_noise_free(self):
        res = fit_gamma_e(self.series(10, 13, 0.05), 13)
        assert res.gamma_e == pytest.approx(10, rel=1e-6)
        assert res.nbar0 == pytest.approx(0.05, rel=1e-6)
        assert not res.at_validity_boundary

    def test_noisy(self):
        rng = np.random.default_rng(7)
        res = fit_gamma_e(self.series(10, 13, 0.05, rng.normal(0, 0.05, 5)), 13)
        assert abs(res.gamma_e - 10) < 3 * res.gamma_e_sigma

    def test_null(self):
        rng = np.random.default_rng(3)
        res = fit_gamma_e(self.series(0, 13, 0.05, rng.normal(0, 0.02, 5), 0.02), 13)
        assert res.gamma_e < 3 * res.gamma_e_sigma

    def test_boundary_flag(self):
        n = 0.05 + np.array([0, 1, 3, 10, 200.0])
        res = fit_gamma_e(HeatingSeries(tuple(zip(self.t, n, [0.01] * 5))), 0.0)
        assert res.at_validity_boundary
        assert res.gamma_e * 0.04 < 1

    def test_errors(self):
        with pytest.raises(IonHeatError):
            fit_gamma_e(self.series(10, 13, 0.05), -1)
        with pytest.raises(FitError):
            fit_gamma_e(HeatingSeries(((0, 0, 1), (0.01, 0.1, 1))), 13)


class TestGasRates:
    def test_elastic_matches_oracle(self, gases, sr88):
        for g in gases.values():
            assert elastic_rate(1e9, g, sr88) == pytest.approx(elastic_oracle(1e9, g, sr88), rel=1e-12)

    def test_density_benchmark(self, gases, sr88):
        dens = {k: density_from_elastic_rate(10.0, g, sr88) for k, g in gases.items()}
        for v in dens.values():
            assert v == pytest.approx(1.0e9, rel=0.15)
        assert relative_spread(list(dens.values())) <= 0.06

    @given(st.floats(1e3, 1e12))
    def test_exact_inverse(self, gases, sr88, n):
        g = gases["N2"]
        assert density_from_elastic_rate(elastic_rate(n, g, sr88), g, sr88) == pytest.approx(n, rel=1e-12)

    def test_elastic_scaling(self, gases, sr88):
        g = gases["H2"]
        assert elastic_rate(0.0, g, sr88) == 0.0
        assert elastic_rate(2e9, g, sr88) == pytest.approx(2 * elastic_rate(1e9, g, sr88), rel=1e-14)
        hot = g.at_temperature(55.0 * 64)
        assert elastic_rate(1e9, hot, sr88) == pytest.approx(2 * elastic_rate(1e9, g, sr88), rel=1e-12)

    def test_langevin_range(self, gases, sr88):
        rates = {k: langevin_rate(1e9, g, sr88) for k, g in gases.items()}
        for k, g in gases.items():
            assert rates[k] == pytest.approx(langevin_oracle(1e9, g, sr88), rel=1e-12)
        assert max(rates, key=rates.get) == "H2"
        assert rates["H2"] == pytest.approx(1.6, rel=0.2)
        assert min(rates.values()) == pytest.approx(0.6, rel=0.2)
        assert langevin_rate(0.0, gases["H2"], sr88) == 0.0

    def test_gas_validation(self):
        with pytest.raises(IonHeatError):
            GasSpecies("x", 2.0, 0.0, 55.0)
        with pytest.raises(IonHeatError):
            GasSpecies("x", 2.0, 1e-24, 0.0)


class TestEnergyTransfer:
    def test_anchors(self, gases, sr88):
        assert 0.2e-3 <= max_energy_transfer(gases["H2"], sr88) <= 0.8e-3
        for k in ("N2", "O2"):
            assert 2.5e-3 <= max_energy_transfer(gases[k], sr88) <= 10e-3

    def test_oracle(self, gases, sr88):
        g = gases["H2"]
        frac = 4 * g.mass * sr88.mass / (g.mass + sr88.mass) ** 2
        assert max_energy_transfer(g, sr88) == pytest.approx(frac * sc.k * 55 / sc.e, rel=1e-12)
        assert max_energy_transfer(g, sr88, 1.5) == pytest.approx(1.5 * frac * sc.k * 55 / sc.e, rel=1e-12)

    def test_equal_masses(self):
        assert energy_transfer_fraction(40.0, 40.0) == 1.0


class TestSafety:
    def test_cold_stage_pass(self):
        chk = collision_safety_check(LifetimeObservation(600, 0.05, 2))
        assert (chk.lifetime_ratio, chk.heating_product) == pytest.approx((12000, 1200))
        assert chk.passed and not chk.marginal

    def test_marginal(self):
        chk = collision_safety_check(LifetimeObservation(10, 0.05, 13))
        assert (chk.lifetime_ratio, chk.heating_product) == pytest.approx((200, 130))
        assert chk.passed and chk.marginal

    def test_fail_and_strict_threshold(self):
        assert not collision_safety_check(LifetimeObservation(5, 0.05, 13)).passed
        assert not collision_safety_check(LifetimeObservation(10, 0.1, 13)).passed

    def test_short_delay(self):
        assert collision_safety_check(LifetimeObservation(10, 1e-12, 13)).lifetime_ratio > 1e12

    def test_validation(self):
        with pytest.raises(IonHeatError):
            LifetimeObservation(0, 0.01, 1)
