import warnings

import numpy as np
import pytest

from pdhlock.loop import (
    FastFilterConfig,
    LoopConfig,
    SingularityError,
    assemble_open_loop,
    closed_loop_from_open,
    closed_loop_psd,
    closed_loop_psd_sensor,
    closed_to_open,
    loop_matrix_response,
    margins,
    signal_flow_response,
)
from pdhlock.pdh import DetectorConfig, DiscriminatorConfig, ModulationConfig
from pdhlock.transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    Gain,
    Integrator,
    LowPassButterworth,
    bode_grid,
    compose,
    log_grid,
)

RNG = np.random.default_rng(7)


def plain_loop(
    k_p=1.0,
    f_i=0.0,
    f_d=None,
    g_fast=Gain(1.0),
    g_slow=Gain(1.0),
    f_i_slow=0.0,
    tau_l=0.0,
    delta_nu_c=1e18,
    k_e=1.0,
):
    """A loop stripped to the tested essentials: discriminator collapses to
    k_e (cavity pole pushed out of band) and demod/pd are identity."""
    disc = DiscriminatorConfig(
        modulation=ModulationConfig(1.082, 20e6),
        detector=DetectorConfig(1.0, 1.0, 1e-12, 1e9, 3),
        delta_nu_c=delta_nu_c,
        p_pd=1e-6,
        k_e_override=k_e,
    )
    return LoopConfig(
        discriminator=disc,
        k_fast=FastFilterConfig(k_p, f_i, f_d, parasitic_f0=None),
        f_i_slow=f_i_slow,
        g_fast=g_fast,
        g_slow=g_slow,
        tau_l=tau_l,
        demod=Gain(1.0),
        pd=Gain(1.0),
    )


class TestAssemble:
    def test_all_identity_components_give_unity(self):
        cfg = plain_loop()
        f = log_grid(10, 1e6, 20)
        alpha = assemble_open_loop(cfg, "both").response(f)
        assert np.allclose(alpha, 1.0, rtol=1e-9)

    def test_both_equals_pointwise_branch_sum(self, config3):
        f = log_grid(10, 10e6, int(200 / 6) + 1)[:201]
        fast = assemble_open_loop(config3.loop, "fast").response(f)
        slow = assemble_open_loop(config3.loop, "slow").response(f)
        both = assemble_open_loop(config3.loop, "both").response(f)
        assert np.allclose(both, fast + slow, rtol=1e-12, atol=0)

    def test_fast_branch_slope_near_minus_20db_per_decade(self, config3):
        tr = bode_grid(assemble_open_loop(config3.loop, "fast"), 1e3, 1e6, 50)
        slope = np.polyfit(np.log10(tr.freqs), tr.gain_db, 1)[0]
        assert -26.0 < slope < -14.0

    def test_unknown_branch(self, config3):
        with pytest.raises(ValueError):
            assemble_open_loop(config3.loop, "sideways")


class TestClosedLoopAlgebra:
    def test_large_gain_limit(self):
        t = closed_loop_from_open(1e12 + 0j)
        assert t == pytest.approx(1.0 + 0j, rel=1e-9)

    def test_zero_gain(self):
        assert closed_loop_from_open(0j) == 0j

    def test_unit_gain_at_minus_120_degrees(self):
        alpha = np.exp(-1j * np.radians(120.0))
        t = closed_loop_from_open(alpha)
        assert abs(t) == pytest.approx(1.0, rel=1e-12)
        assert np.degrees(np.angle(t)) == pytest.approx(-60.0, abs=1e-9)

    def test_half_maps_to_unity(self):
        assert closed_to_open(0.5 + 0j) == pytest.approx(1.0 + 0j)

    def test_roundtrip_identity_on_random_points(self):
        re, im = RNG.normal(0, 3, 1000), RNG.normal(0, 3, 1000)
        alpha = re + 1j * im
        alpha = alpha[np.abs(1 + alpha) > 1e-6][:900]
        back = closed_to_open(closed_loop_from_open(alpha))
        assert np.allclose(back, alpha, rtol=1e-10, atol=1e-12)

    def test_singularities(self):
        with pytest.raises(SingularityError):
            closed_loop_from_open(-1.0 + 0j)
        with pytest.raises(SingularityError):
            closed_to_open(1.0 + 0j)

    def test_phase_margin_60_means_no_noise_enhancement(self):
        alpha = np.exp(1j * np.radians(-120.0))
        assert abs(1 + alpha) == pytest.approx(1.0, abs=1e-12)


class TestMargins:
    def test_pure_integrator(self):
        tr = bode_grid(Integrator(1e4), 10, 1e6, 100)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = margins(tr)
        assert rep.f_ug == pytest.approx(1e4, rel=1e-3)
        assert rep.phi_m_deg == pytest.approx(90.0, abs=0.01)
        assert rep.f_180 is None
        assert rep.g_m is None
        assert rep.stable

    def test_integrator_plus_delay_analytic(self):
        # f_ug = f_i; phi_m = 90 - 360*f_i*tau; f_180 = 1/(4 tau); g_m = f_180/f_i
        tr = bode_grid(compose([Integrator(1e6), Delay(100e-9)]), 1e3, 1e7, 200)
        rep = margins(tr)
        assert rep.f_ug == pytest.approx(1e6, rel=2e-3)
        assert rep.phi_m_deg == pytest.approx(54.0, abs=0.1)
        assert rep.f_180 == pytest.approx(2.5e6, rel=2e-3)
        assert rep.g_m == pytest.approx(2.5, rel=5e-3)
        assert rep.stable and rep.phase_margin_ok

    def test_denser_grid_agrees(self, config3):
        model = assemble_open_loop(config3.loop, "both")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            coarse = margins(bode_grid(model, 10, 10e6, 100))
            fine = margins(bode_grid(model, 10, 10e6, 1000))
        assert coarse.f_ug == pytest.approx(fine.f_ug, rel=2e-3)
        assert coarse.phi_m_deg == pytest.approx(fine.phi_m_deg, abs=0.1)

    def test_missing_crossings_reported_absent(self):
        tr = bode_grid(Gain(0.1), 10, 1e6, 20)
        rep = margins(tr)
        assert rep.f_ug is None and rep.phi_m_deg is None
        assert rep.f_180 is None and rep.g_m is None
        assert rep.stable

    def test_multiple_crossings_warn_and_take_highest(self):
        f = log_grid(1e2, 1e6, 50)
        gain_db = 10 * np.sin(3 * np.log10(f))  # wiggles through 0 dB
        tr = BodeTrace.from_gain_phase(f, gain_db, np.full_like(f, -10.0))
        with pytest.warns(UserWarning):
            rep = margins(tr)
        assert rep.f_ug is not None
        assert any("crossings" in w for w in rep.warnings)

    def test_unstable_loop_flagged(self):
        tr = bode_grid(compose([Integrator(1e6), Delay(1e-6)]), 1e3, 1e7, 100)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = margins(tr)
        assert not rep.stable
        assert rep.phi_m_deg < 0 or rep.g_m < 1

    def test_bump_between_crossings_on_fixtures(self, all_configs):
        for pc in all_configs:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = margins(bode_grid(assemble_open_loop(pc.loop, "both"), 10, 10e6, 100))
            assert rep.f_ug < rep.f_bump < rep.f_180

    def test_bump_between_crossings_integrator_delay_family(self):
        for tau in (50e-9, 100e-9, 150e-9, 200e-9):
            tr = bode_grid(compose([Integrator(1e6), Delay(tau)]), 1e4, 1e7, 200)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = margins(tr)
            assert rep.stable
            assert rep.f_ug < rep.f_bump < rep.f_180


class TestLoopMatrix:
    def test_y5_m6_equals_closed_loop(self, config3):
        f = 10 ** RNG.uniform(1, 6.9, 50)
        entry = loop_matrix_response(config3.loop, "m6", "y5", f)
        alpha = assemble_open_loop(config3.loop, "both").response(f)
        assert np.allclose(entry, closed_loop_from_open(alpha), rtol=1e-12)

    def test_y8_m8_reduces_without_slow_branch(self):
        cfg = plain_loop(k_p=2.0, f_i=1e3, g_fast=CavityPole(1e5), f_i_slow=0.0)
        f = 10 ** RNG.uniform(1, 6, 20)
        got = loop_matrix_response(cfg, "m8", "y8", f)
        alpha_fast = assemble_open_loop(cfg, "fast").response(f)
        assert np.allclose(got, 1.0 / (1.0 + alpha_fast), rtol=1e-12)

    def test_row_sum_identity(self, config3):
        f = 10 ** RNG.uniform(1, 6.9, 30)
        t = loop_matrix_response(config3.loop, "m6", "y5", f)
        s = loop_matrix_response(config3.loop, "m6", "y6", f)
        assert np.allclose(t + s, 1.0, rtol=1e-12)

    def test_matches_signal_flow_solver_without_delay(self):
        cfg = plain_loop(
            k_p=3.0, f_i=2e3, f_d=2e6,
            g_fast=compose([Gain(5.0), LowPassButterworth(1, 1e6)]),
            g_slow=compose([Gain(100.0), LowPassButterworth(2, 1e4)]),
            f_i_slow=50.0, tau_l=0.0, delta_nu_c=2e5, k_e=0.3,
        )
        f = 10 ** RNG.uniform(1, 6.5, 20)
        for stim in ("m2", "m6", "m8"):
            for obs in ("y5", "y6", "y8"):
                printed = loop_matrix_response(cfg, stim, obs, f)
                flow = signal_flow_response(cfg, stim, obs, f)
                assert np.allclose(printed, flow, rtol=1e-9, atol=1e-12), (stim, obs)

    def test_delay_discrepancy_is_exactly_the_delay_factor(self):
        # With tau_l > 0 the lumped-delay matrix and the physical flow solve
        # disagree in exactly one entry, (y8, m2), by exp(-j*2*pi*f*tau_l):
        # the printed entry keeps the delay inside alpha_f/G_f although the
        # m2 -> y8 path does not traverse the actuator cabling.
        tau = 80e-9
        cfg = plain_loop(
            k_p=3.0, f_i=2e3,
            g_fast=compose([Gain(5.0), LowPassButterworth(1, 1e6)]),
            g_slow=Gain(10.0), f_i_slow=20.0, tau_l=tau, delta_nu_c=2e5, k_e=0.3,
        )
        f = 10 ** RNG.uniform(1, 6.5, 20)
        for stim in ("m2", "m6", "m8"):
            for obs in ("y5", "y6", "y8"):
                printed = loop_matrix_response(cfg, stim, obs, f)
                flow = signal_flow_response(cfg, stim, obs, f)
                if (obs, stim) == ("y8", "m2"):
                    ratio = printed / flow
                    assert np.allclose(ratio, np.exp(-2j * np.pi * f * tau), rtol=1e-9)
                else:
                    assert np.allclose(printed, flow, rtol=1e-9, atol=1e-12), (stim, obs)

    def test_bad_labels(self, config3):
        with pytest.raises(ValueError):
            loop_matrix_response(config3.loop, "m3", "y5", 1e3)
        with pytest.raises(ValueError):
            loop_matrix_response(config3.loop, "m6", "y7", 1e3)


class TestClosedLoopPsd:
    def test_high_gain_limit_leaves_only_discriminator_noise(self):
        f = log_grid(10, 1e6, 30)
        tr = BodeTrace(f, np.full_like(f, 1e9, dtype=complex))
        cavity = CavityPole(1e5)
        out = closed_loop_psd(tr, 1e4, 1e-10, k_e=2.0, cavity=cavity)
        want = 1e-10 / (4.0 * np.abs(cavity.response(f)) ** 2)
        assert np.allclose(out.values, want, rtol=1e-6)

    def test_zero_gain_passes_laser_noise(self):
        f = log_grid(10, 1e6, 30)
        tr = BodeTrace(f, np.zeros_like(f, dtype=complex))
        out = closed_loop_psd(tr, lambda fr: 5e8 / fr, 1e-10, 1.0, CavityPole(1e5))
        assert np.allclose(out.values, 5e8 / f, rtol=1e-12)

    def test_integrator_delay_suppression_matches_analytic(self):
        f_i, tau = 1e6, 100e-9
        model = compose([Integrator(f_i), Delay(tau)])
        tr = bode_grid(model, 1e4, 1e7, 100)
        out = closed_loop_psd(tr, 2e3, 0.0, 1.0, CavityPole(1e18))
        f_test = 1e5  # one decade below f_ug
        idx = int(np.argmin(np.abs(tr.freqs - f_test)))
        f_at = tr.freqs[idx]
        alpha = (f_i / f_at) * np.exp(1j * np.radians(-90.0 - 360.0 * f_at * tau))
        want = 2e3 / abs(1 + alpha) ** 2
        assert out.values[idx] == pytest.approx(want, rel=1e-9)
        # ~x100 suppression of the PSD at f_ug/10
        assert out.values[idx] / 2e3 == pytest.approx(0.0100, abs=0.0005)

    def test_sensor_form_matches_specialized_form(self):
        f = log_grid(1e2, 1e6, 40)
        alpha = BodeTrace(f, (1e5 / f) * np.exp(-1j * np.radians(95.0)))
        k_e, cavity = 0.5, CavityPole(2e5)
        a = closed_loop_psd(alpha, 1e3, 1e-9, k_e, cavity)
        sensor = compose([Gain(k_e), cavity])
        b = closed_loop_psd_sensor(alpha, 1e3, 1e-9, sensor)
        assert np.allclose(a.values, b.values, rtol=1e-12)

    def test_grid_mismatch_rejected(self):
        f = log_grid(10, 1e5, 20)
        tr = BodeTrace(f, np.ones_like(f, dtype=complex) * 2.0)
        from pdhlock.noise import PsdTrace

        bad = PsdTrace(f[:-1], np.ones(len(f) - 1))
        with pytest.raises(ValueError):
            closed_loop_psd(tr, bad, 0.0, 1.0, CavityPole(1e5))
