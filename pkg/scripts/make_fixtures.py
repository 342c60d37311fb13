#!/usr/bin/env python3
"""Generate the shipped measurement fixtures.

The real bench data behind the reference numbers is not published, so
every fixture here is synthesized from the documented component models
(the config JSONs record exactly which).  Margins on these traces are
model reproductions of the reference configurations, not raw-data
reproductions.  Deterministic: fixed RNG seeds, exact parameter solves.

Run from the repository root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np

from pdhlock.config import model_to_dict, project_from_dict, project_to_dict
from pdhlock.loop import (
    FastFilterConfig,
    LoopConfig,
    assemble_open_loop,
    closed_loop_trace,
    margins,
)
from pdhlock.measure import RingdownTrace, write_bode_csv, write_ringdown_csv
from pdhlock.noise import NoiseModel, PsdTrace, noise_model_psd, write_psd_csv
from pdhlock.pdh import DetectorConfig, DiscriminatorConfig, ModulationConfig, effective_ke
from pdhlock.transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    Gain,
    LowPassButterworth,
    PdLockin,
    bode_grid,
    compose,
    log_grid,
    path_delay,
)
from pdhlock.tuning import component_phase_deg

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

DELTA_NU_C = 45.7e3
OMEGA = 20e6
BETA = 1.082
F_UG3 = 1.06e6

# Laser fast branch: two poles placed so the current-modulation path lags
# 51.9 deg at 1.06 MHz (0.35/0.65 split of the arctangent budget).
G_SPLIT = 0.35
_total = math.radians(51.9)
G_POLE_A = F_UG3 / math.tan(G_SPLIT * _total)
G_POLE_B = F_UG3 / math.tan((1.0 - G_SPLIT) * _total)
G_FAST_SHAPE = compose([LowPassButterworth(1, G_POLE_A), LowPassButterworth(1, G_POLE_B)])

# PZT branch: 10 MHz/V of DC authority rolling off above the 6 kHz
# mechanical resonance.
G_SLOW = compose([Gain(1e7), LowPassButterworth(2, 6e3)])
F_I_SLOW = 37.0

MIXER_DELAY = 2.78e-9  # ~1 deg of lag at 1 MHz

MOD = ModulationConfig(beta=BETA, omega_over_2pi=OMEGA)
DET_1 = DetectorConfig(responsivity=1.0, transimpedance=5e3, nep=39e-12, f_pd=20e6, order=4)
DET_23 = DetectorConfig(responsivity=1.0, transimpedance=1e4, nep=6.3e-12, f_pd=150e6, order=3)

NOISE = {"h_minus1_Hz2": 5e8, "h0_Hz2_per_Hz": 2e3, "f_low_Hz": 10.0}


def solve_fd(f_i: float, parasitic_f0: float, target_deg: float, f: float) -> float:
    """PID derivative corner giving the loop filter target_deg of phase at f."""
    want = math.radians(target_deg) + math.atan(f / parasitic_f0)
    return f / (math.tan(want) + f_i / f)


def build_config(label, f_ug, phi_target, det, p_pd, ke_override, f_m, demod, tau_l):
    disc = DiscriminatorConfig(
        MOD, det, delta_nu_c=DELTA_NU_C, p_pd=p_pd, f_m=f_m, lp_order=8,
        k_e_override=ke_override,
    )
    others = compose([
        G_FAST_SHAPE, CavityPole(DELTA_NU_C), PdLockin(det.order, det.f_pd, OMEGA),
        demod, Delay(tau_l),
    ])
    need_k = (phi_target - 180.0) - component_phase_deg(others, f_ug)
    f_d = solve_fd(20e3, 20e6, need_k, f_ug)

    def with_kp(k_p: float) -> LoopConfig:
        return LoopConfig(
            discriminator=disc,
            k_fast=FastFilterConfig(k_p=k_p, f_i=20e3, f_d=f_d, parasitic_f0=20e6),
            f_i_slow=F_I_SLOW,
            g_fast=compose([Gain(1.0), G_FAST_SHAPE]),
            g_slow=G_SLOW,
            tau_l=tau_l,
            demod=demod,
            label=label,
        )

    k_p = 1.0 / abs(assemble_open_loop(with_kp(1.0), "fast").at(f_ug))
    return with_kp(k_p)


def project_doc(cfg: LoopConfig, label: str, s_n4: float, traces: dict) -> dict:
    from pdhlock.config import loop_to_dict

    return {
        "schema_version": 1,
        "label": label,
        "loop": loop_to_dict(cfg),
        "noise": {**NOISE, "s_n4_V2_per_Hz": s_n4},
        "traces": traces,
    }


def make_configs() -> dict[str, LoopConfig]:
    demod_12 = compose([LowPassButterworth(8, 14e6), Delay(MIXER_DELAY)])
    tau_1 = path_delay(2.1, 4.9, 1.7 + 6.8)
    tau_23 = path_delay(2.1, 4.9, 1.7)

    cfg1 = build_config("config-1", 0.49e6, 50.0, DET_1, 650e-6, None, 14e6, demod_12, tau_1)
    cfg2 = build_config("config-2", 0.71e6, 51.0, DET_23, 430e-6, 2.69e-6, 14e6, demod_12, tau_23)

    # Configuration 3 drops the discrete low-pass; the demod chain is the
    # mixer plus internal cabling, sized so D*P lags 9 deg at 1.06 MHz.
    ph_p3 = component_phase_deg(PdLockin(3, DET_23.f_pd, OMEGA), F_UG3)
    tau_dp = (9.0 + ph_p3) / (360.0 * F_UG3)
    cfg3 = build_config("config-3", F_UG3, 55.225, DET_23, 430e-6, 2.69e-6, None,
                        Delay(tau_dp), tau_23)
    return {"config1": cfg1, "config2": cfg2, "config3": cfg3}


def write_config_docs(configs: dict[str, LoopConfig]) -> None:
    traces3 = {
        "alpha_csv": "config3_alpha.csv",
        "closed_loop_csv": "config3_closed.csv",
        "sy4_csv": "sy4_config3.csv",
        "pd_baseline_csv": "pd_baseline_config3.csv",
        "ringdown_csv": "ringdown.csv",
    }
    for name, cfg in configs.items():
        det = cfg.discriminator.detector
        s_n4 = (det.nep * det.responsivity * det.transimpedance) ** 2
        doc = project_doc(cfg, cfg.label, s_n4, traces3 if name == "config3" else {})
        pc = project_from_dict(doc, base_dir=OUT)  # schema self-check
        assert project_to_dict(pc)["loop"]["k_fast"]["k_p"] == cfg.k_fast.k_p
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def write_alpha_traces(cfg3: LoopConfig) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha = bode_grid(assemble_open_loop(cfg3, "both"), 10.0, 10e6, 100, label="config-3 alpha")
        rep = margins(alpha)
        closed = closed_loop_trace(alpha)
    print(f"config3 margins: f_ug={rep.f_ug/1e6:.4f} MHz phi_m={rep.phi_m_deg:.2f} deg "
          f"f_bump={rep.f_bump/1e6:.3f} MHz f_180={rep.f_180/1e6:.3f} MHz")
    write_bode_csv(OUT / "config3_alpha.csv", alpha)
    write_bode_csv(OUT / "config3_closed.csv", closed.with_label("config-3 y5/m6"))


def write_ringdown() -> None:
    rng = np.random.default_rng(20260809)
    tau = 3.482e-6
    dt = 20e-9
    n = 1500
    t = np.arange(n) * dt
    v = 1.0 * np.exp(-t / tau) + 0.012
    v[:3] = v[3] * 1.02  # switching transient, excluded by the default window
    v = v + rng.normal(0.0, 0.01 / math.sqrt(256.0), size=n)
    write_ringdown_csv(OUT / "ringdown.csv", RingdownTrace(t, v, averages=256))


def write_sy4(cfg3: LoopConfig) -> None:
    disc = cfg3.discriminator
    k_e = effective_ke(disc)
    det = disc.detector
    baseline_level = (det.nep * det.responsivity * det.transimpedance) ** 2
    noise = NoiseModel(NOISE["h_minus1_Hz2"], NOISE["h0_Hz2_per_Hz"], NOISE["f_low_Hz"])

    offsets = log_grid(1e3, 8e6, 120)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha = assemble_open_loop(cfg3, "both").response(offsets)
    denom = np.abs(1.0 + alpha) ** 2
    cavity = CavityPole(disc.delta_nu_c).response(offsets)
    pd = PdLockin(det.order, det.f_pd, OMEGA).response(offsets)
    s_n1 = noise_model_psd(noise, offsets)
    s_y1 = s_n1 / denom + (np.abs(alpha) ** 2 / denom) * baseline_level / (
        k_e**2 * np.abs(cavity) ** 2
    )
    h2 = np.abs(pd * k_e * cavity) ** 2
    side = s_y1 * h2 / 2.0  # each sideband carries half the folded power

    freqs = np.concatenate([OMEGA - offsets[::-1], OMEGA + offsets])
    values = np.concatenate([side[::-1], side]) + baseline_level
    write_psd_csv(OUT / "sy4_config3.csv", PsdTrace(freqs, values, 1e3, "config-3 s_y4"))
    write_psd_csv(
        OUT / "pd_baseline_config3.csv",
        PsdTrace(freqs, np.full_like(freqs, baseline_level), 1e3, "pd baseline"),
    )


def write_appendix_chain() -> None:
    """Demod-chain measurement: D*P seen through an up-conversion mixer and
    a fiber path, plus the individually measured parts."""
    f = log_grid(1e4, 10e6, 60)
    lp = LowPassButterworth(8, 14e6)
    pd = PdLockin(3, DET_23.f_pd, OMEGA)
    mixer = Delay(MIXER_DELAY)
    # Splitter/cabling delay sized so the whole chain lags 32.8 deg at 1.06 MHz.
    rest = component_phase_deg(compose([lp, pd, mixer]), F_UG3)
    tau_splitter = (32.8 + rest) / (360.0 * F_UG3)
    splitter = Delay(tau_splitter)
    chain = compose([splitter, lp, pd, mixer])

    mx1 = compose([Delay(5e-9), LowPassButterworth(1, 80e6)])
    tau_fiber = path_delay(fiber_m=4.9)
    measured = chain.response(f) * mx1.response(f) * Delay(tau_fiber).response(f)
    write_bode_csv(OUT / "dp_chain_measured.csv", BodeTrace(f, measured, "chain via MX1"))
    mx1_grid = log_grid(5e3, 20e6, 60)
    write_bode_csv(OUT / "mx1_cal.csv", BodeTrace(mx1_grid, mx1.response(mx1_grid), "MX1 cal"))

    # Individually measured parts carry small, documented calibration
    # offsets (as timing errors) that add up to +0.9 deg at 1.06 MHz.
    cal_err_deg = {"splitter_cable": 0.25, "lowpass": 0.40, "pd_lockin": 0.15, "mixer": 0.10}
    parts = {"splitter_cable": splitter, "lowpass": lp, "pd_lockin": pd, "mixer": mixer}
    for name, model in parts.items():
        dtau = cal_err_deg[name] / (360.0 * F_UG3)
        resp = model.response(f) * np.exp(2j * np.pi * f * dtau)
        write_bode_csv(OUT / f"part_{name}.csv", BodeTrace(f, resp, f"part {name}"))
    meta = {
        "fiber_delay_s": tau_fiber,
        "tau_splitter_s": tau_splitter,
        "calibration_offsets_deg": cal_err_deg,
    }
    (OUT / "appendix_chain.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def write_appendix_gfast() -> None:
    """Fast-branch measurement through a broad test-interferometer
    discriminator (5.4 MHz linewidth) and the loop delay."""
    f = log_grid(1e4, 10e6, 60)
    g_true = compose([Gain(20e6 / 1.0), G_FAST_SHAPE])  # 20 MHz/V current path
    chain = compose([
        Gain(2.69e-6, label="slope"), CavityPole(5.4e6),
        PdLockin(3, DET_23.f_pd, OMEGA), Delay(MIXER_DELAY),
    ])
    tau_l = path_delay(2.1, 4.9, 1.7)
    measured = g_true.response(f) * chain.response(f) * Delay(tau_l).response(f)
    write_bode_csv(OUT / "gfast_measured.csv", BodeTrace(f, measured, "fast branch via test FPI"))
    meta = {"chain": model_to_dict(chain), "tau_l_s": tau_l, "g_true": model_to_dict(g_true)}
    (OUT / "appendix_gfast.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(exist_ok=True)
    configs = make_configs()
    write_config_docs(configs)
    write_alpha_traces(configs["config3"])
    write_ringdown()
    write_sy4(configs["config3"])
    write_appendix_chain()
    write_appendix_gfast()
    for name, cfg in configs.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = margins(bode_grid(assemble_open_loop(cfg, "both"), 10.0, 10e6, 100))
        print(f"{name}: f_ug={rep.f_ug/1e6:.4f} MHz phi_m={rep.phi_m_deg:.2f} "
              f"bump={rep.f_bump/1e6:.3f} MHz f_180={rep.f_180/1e6:.3f} MHz")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
