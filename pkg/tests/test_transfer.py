import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from pdhlock.transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    FirstOrderHighPass,
    Gain,
    Integrator,
    LowPassButterworth,
    PdLockin,
    Pid,
    Tabulated,
    bode_grid,
    butterworth_phase_approx_deg,
    compose,
    eval_cavity,
    eval_delay,
    eval_lowpass_butterworth,
    eval_pd_lockin,
    eval_pid,
    log_grid,
    path_delay,
)

RNG = np.random.default_rng(42)


def deg(z):
    return np.degrees(np.angle(z))


class TestPid:
    def test_i_and_d_cancel_at_geometric_mean(self):
        z = eval_pid(1.0, 100.0, 1e6, 1e4)
        assert z == pytest.approx(1.0 + 0.0j, abs=1e-15)

    def test_pure_proportional(self):
        for f in (1.0, 1e3, 1e7):
            assert eval_pid(3.5, 0.0, None, f) == pytest.approx(3.5 + 0j)

    def test_integrator_dominates_well_below_f_i(self):
        f = 1.0
        z = eval_pid(1.0, 1e4, None, f)
        assert deg(z) == pytest.approx(-90.0, abs=0.01)
        # -20 dB/decade slope
        g1 = abs(eval_pid(1.0, 1e4, None, 1.0))
        g2 = abs(eval_pid(1.0, 1e4, None, 10.0))
        assert 20 * np.log10(g1 / g2) == pytest.approx(20.0, abs=0.01)

    def test_derivative_lead(self):
        z = eval_pid(1.0, 0.0, 1e3, 1e6)
        assert deg(z) == pytest.approx(90.0, abs=0.1)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            eval_pid(1.0, 100.0, None, 0.0)
        with pytest.raises(ValueError):
            eval_pid(1.0, 100.0, None, -1.0)
        with pytest.raises(ValueError):
            Pid(0.0, 100.0)
        with pytest.raises(ValueError):
            Pid(1.0, -1.0)
        with pytest.raises(ValueError):
            Pid(1.0, 1.0, 0.0)


class TestButterworth:
    def test_order_one_is_single_pole_formula(self):
        f0 = 3.3e4
        freqs = 10 ** RNG.uniform(0, 8, size=1000)
        got = eval_lowpass_butterworth(1, f0, freqs)
        want = 1.0 / (1.0 + 1j * freqs / f0)
        assert np.allclose(got, want, rtol=1e-12, atol=0)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_minus_3db_at_corner_every_order(self, n):
        z = eval_lowpass_butterworth(n, 1e5, 1e5)
        assert 20 * np.log10(abs(z)) == pytest.approx(-3.0103, abs=1e-3)

    def test_demod_filter_attenuation_and_phase(self):
        z = eval_lowpass_butterworth(8, 9e6, 20e6)
        assert 20 * np.log10(abs(z)) <= -55.0
        z1 = eval_lowpass_butterworth(8, 9e6, 1e6)
        assert deg(z1) == pytest.approx(-33.0, abs=1.0)

    def test_arctan_approximation_is_misleading_below_corner(self):
        # the documented helper shows why the exact pole product matters
        approx = butterworth_phase_approx_deg(8, 9e6, 1e6)
        assert approx == pytest.approx(-50.7, abs=0.5)
        exact = deg(eval_lowpass_butterworth(8, 9e6, 1e6))
        assert abs(approx - exact) > 15.0

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_matches_scipy_analog_butterworth(self, n):
        f0 = 2.2e5
        freqs = log_grid(1e3, 1e7, 30)
        b, a = signal.butter(n, 2 * np.pi * f0, analog=True)
        _, want = signal.freqs(b, a, worN=2 * np.pi * freqs)
        got = eval_lowpass_butterworth(n, f0, freqs)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_magnitude_closed_form(self):
        freqs = log_grid(1e2, 1e8, 20)
        for n in (2, 4, 7):
            got = np.abs(eval_lowpass_butterworth(n, 1e5, freqs))
            want = 1.0 / np.sqrt(1.0 + (freqs / 1e5) ** (2 * n))
            assert np.allclose(got, want, rtol=1e-12)

    def test_order_zero_rejected(self):
        with pytest.raises(ValueError):
            eval_lowpass_butterworth(0, 1e5, 1e3)


class TestDelay:
    def test_zero_delay_is_identity(self):
        assert eval_delay(0.0, 123.0) == pytest.approx(1.0 + 0j)

    def test_ten_meters_of_coax(self):
        tau = path_delay(coax_m=10.0)
        assert tau == pytest.approx(50.54e-9, rel=1e-3)
        z = eval_delay(tau, 1e6)
        assert deg(z) == pytest.approx(-18.0, abs=0.5)

    def test_reference_loop_path(self):
        tau = path_delay(free_space_m=2.1, fiber_m=4.9, coax_m=1.7)
        z = eval_delay(tau, 1.06e6)
        assert deg(z) == pytest.approx(-15.0, abs=0.5)

    @given(
        st.floats(min_value=0, max_value=1e-3),
        st.floats(min_value=1e-2, max_value=1e9),
    )
    def test_magnitude_is_always_one(self, tau, f):
        assert abs(eval_delay(tau, f)) == pytest.approx(1.0, abs=1e-12)

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            Delay(-1e-9)


class TestCavityPole:
    def test_corner_at_half_linewidth(self):
        z = eval_cavity(2e5, 1e5)
        assert 20 * np.log10(abs(z)) == pytest.approx(-3.0103, abs=1e-3)
        assert deg(z) == pytest.approx(-45.0, abs=1e-6)

    def test_reference_cavity_phase_at_crossover(self):
        z = eval_cavity(45.7e3, 1.06e6)
        assert deg(z) == pytest.approx(-89.0, abs=0.3)

    def test_low_frequency_arctan(self):
        # arctan(2*1e3/1e5) = 1.1458 deg
        z = eval_cavity(1e5, 1e3)
        assert deg(z) == pytest.approx(-math.degrees(math.atan(0.02)), abs=1e-9)
        assert abs(z) == pytest.approx(1.0 / math.sqrt(1.0004), rel=1e-12)


class TestPdLockin:
    def test_fast_pd_adds_almost_no_lag(self):
        z = eval_pd_lockin(3, 200e6, 20e6, 1e6)
        assert deg(z) == pytest.approx(-0.9, abs=0.1)

    def test_slow_pd_at_low_rf_is_costly(self):
        z = eval_pd_lockin(3, 5e6, 5e6, 1e6)
        assert deg(z) == pytest.approx(-17.0, abs=0.5)

    def test_unity_magnitude_and_zero_limit(self):
        z = eval_pd_lockin(4, 50e6, 20e6, 1.0)
        assert abs(z) == pytest.approx(1.0, abs=1e-12)
        assert deg(z) == pytest.approx(0.0, abs=1e-4)

    def test_phase_is_odd_in_f(self):
        # the defining half-difference of lags flips sign with f
        n, f_pd, fo = 3, 80e6, 20e6
        lag = lambda x: -n * np.arctan(x / f_pd)
        for f in (1e3, 1e5, 5e6):
            fwd = (lag(fo + f) - lag(fo - f)) / 2
            rev = (lag(fo - f) - lag(fo + f)) / 2
            model = np.angle(eval_pd_lockin(n, f_pd, fo, f))
            assert model == pytest.approx(fwd, rel=1e-12)
            assert rev == pytest.approx(-fwd, rel=1e-12)

    def test_band_limit(self):
        with pytest.raises(ValueError):
            eval_pd_lockin(3, 200e6, 20e6, 20e6)
        with pytest.raises(ValueError):
            eval_pd_lockin(3, 200e6, 20e6, 25e6)


class TestCompose:
    def test_gains_multiply(self):
        m = compose([Gain(2.0), Gain(3.0)])
        assert m.at(7.7) == pytest.approx(6.0 + 0j)

    def test_phase_additivity_of_parts(self):
        a, b = CavityPole(5e4), Delay(80e-9)
        m = compose([a, b])
        f = log_grid(1e2, 1e6, 50)
        assert np.allclose(
            np.angle(m.response(f)),
            np.angle(a.response(f)) + np.angle(b.response(f)),
            atol=1e-12,
        )

    def test_discriminator_chain_equals_pointwise_product(self):
        # brute-force per-point multiplication oracle on a 201-point grid
        parts = [
            LowPassButterworth(8, 9e6),
            PdLockin(3, 200e6, 20e6),
            Gain(1.92e-4),
            CavityPole(45.7e3),
        ]
        chain = compose(parts)
        f = log_grid(10, 10e6, int(200 / np.log10(10e6 / 10)) + 20)[:201]
        want = np.ones_like(f, dtype=complex)
        for p in parts:
            want = want * p.response(f)
        assert np.allclose(chain.response(f), want, rtol=1e-12, atol=0)

    def test_empty_composition_rejected(self):
        with pytest.raises(ValueError):
            compose([])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.sampled_from(
                [Gain(0.5), CavityPole(1e5), Delay(1e-7), LowPassButterworth(2, 1e6),
                 Pid(2.0, 1e3, 1e6), Integrator(1e4), FirstOrderHighPass(50.0)]
            ),
            min_size=1,
            max_size=5,
        ),
        st.floats(min_value=1.0, max_value=1e7),
    )
    def test_magnitude_multiplies(self, parts, f):
        m = compose(parts)
        want = 1.0
        for p in parts:
            want *= abs(p.at(f))
        assert abs(m.at(f)) == pytest.approx(want, rel=1e-12, abs=1e-300)


class TestBodeGrid:
    def test_delay_unwraps_ten_turns(self):
        tr = bode_grid(Delay(1e-6), 1e4, 1e7, 100)
        assert tr.phase_deg[-1] == pytest.approx(-3600.0, abs=1e-6)
        assert np.all(np.abs(np.diff(tr.phase_deg)) < 180.0)

    def test_identity_is_flat(self):
        tr = bode_grid(Gain(1.0), 10, 1e6)
        assert np.allclose(tr.gain_db, 0.0, atol=1e-12)
        assert np.allclose(tr.phase_deg, 0.0, atol=1e-12)

    def test_reference_loop_filter_shape(self):
        # PID (K_P=1, f_I=100 Hz, f_D=1 MHz) with a 20 MHz parasitic pole
        # and 10 ns of delay: gain minimum near 10 kHz, lead above f_D.
        m = compose([Pid(1.0, 100.0, 1e6), LowPassButterworth(1, 20e6), Delay(10e-9)])
        tr = bode_grid(m, 10, 10e6, 100)
        f_min_gain = tr.freqs[int(np.argmin(tr.gain_db))]
        assert 3e3 <= f_min_gain <= 3e4
        lead_band = (tr.freqs > 1e6) & (tr.freqs < 5e6)
        assert np.max(tr.phase_deg[lead_band]) > 30.0

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            bode_grid(Gain(1.0), 1e6, 1e3)
        with pytest.raises(ValueError):
            log_grid(0.0, 1e3)

    def test_points_per_decade_count(self):
        f = log_grid(10, 1e4, 100)
        assert len(f) == 301
        assert f[0] == pytest.approx(10.0) and f[-1] == pytest.approx(1e4)


class TestTabulated:
    @pytest.mark.parametrize(
        "model",
        [
            compose([CavityPole(45.7e3), Delay(40e-9)]),
            LowPassButterworth(4, 2e5),
            Pid(2.0, 1e3, 1e6),
        ],
    )
    def test_roundtrip_on_same_grid(self, model):
        tr = bode_grid(model, 10, 10e6, 100)
        tab = Tabulated(tr)
        got = tab.response(tr.freqs)
        assert np.allclose(got, tr.response, rtol=1e-9, atol=1e-15)

    def test_log_interpolation_between_nodes(self):
        tr = bode_grid(CavityPole(1e5), 1e3, 1e6, 10)
        tab = Tabulated(tr)
        f_mid = math.sqrt(tr.freqs[3] * tr.freqs[4])
        got = tab.response(f_mid)
        g = 0.5 * (tr.gain_db[3] + tr.gain_db[4])
        p = 0.5 * (tr.phase_deg[3] + tr.phase_deg[4])
        want = 10 ** (g / 20) * np.exp(1j * np.radians(p))
        assert got == pytest.approx(want, rel=1e-12)

    def test_extrapolation_is_an_error(self):
        tab = Tabulated(bode_grid(Gain(2.0), 100, 1e5))
        with pytest.raises(ValueError):
            tab.response(99.0)
        with pytest.raises(ValueError):
            tab.response(1.1e5)


class TestBodeTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            BodeTrace(np.array([1.0, 2.0]), np.array([1 + 0j]))
        with pytest.raises(ValueError):
            BodeTrace(np.array([2.0, 1.0]), np.array([1 + 0j, 1 + 0j]))
        with pytest.raises(ValueError):
            BodeTrace(np.array([0.0, 1.0]), np.array([1 + 0j, 1 + 0j]))

    def test_gain_phase_construction(self):
        tr = BodeTrace.from_gain_phase([1.0, 10.0], [6.0205999, 0.0], [45.0, -45.0])
        assert abs(tr.response[0]) == pytest.approx(2.0, rel=1e-6)
        assert np.degrees(np.angle(tr.response[1])) == pytest.approx(-45.0)


class TestHighPass:
    def test_corner_and_asymptotes(self):
        hp = FirstOrderHighPass(1e3)
        assert 20 * np.log10(abs(hp.at(1e3))) == pytest.approx(-3.0103, abs=1e-3)
        assert deg(hp.at(1.0)) == pytest.approx(90.0, abs=0.1)
        assert abs(hp.at(1e7)) == pytest.approx(1.0, rel=1e-6)


class TestIntegrator:
    def test_pure_integrator(self):
        z = Integrator(1e4).at(1e4)
        assert z == pytest.approx(-1j)
        assert deg(Integrator(1e4).at(1.0)) == pytest.approx(-90.0)
