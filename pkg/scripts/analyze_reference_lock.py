#!/usr/bin/env python3
"""Walk the full analysis of the reference lock configurations.

Loads the three fixture configurations, prints their margins and goal
checks, converts the reference RF spectrum into laser frequency noise,
estimates linewidths, runs the autotuner against configuration 3, and
writes summary plots to scripts/out/.

Run from the repository root:  python scripts/analyze_reference_lock.py
"""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pdhlock.config import load_project
from pdhlock.loop import assemble_open_loop, closed_loop_psd, closed_loop_trace, margins, pd_model
from pdhlock.noise import beta_separation_line, beta_separation_linewidth, noise_model_psd, read_psd_csv, sy4_to_sy1
from pdhlock.pdh import effective_ke
from pdhlock.transfer import CavityPole, bode_grid
from pdhlock.tuning import TunePolicy, autotune_fast, low_freq_excess_check

ROOT = Path(__file__).resolve().parent.parent
OUT = Path(__file__).resolve().parent / "out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    configs = {i: load_project(ROOT / "fixtures" / f"config{i}.json") for i in (1, 2, 3)}

    fig, (ax_g, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    print(f"{'config':8} {'f_UG (MHz)':>11} {'phi_m (deg)':>12} {'f_bump (MHz)':>13} {'g_m':>6}")
    for i, pc in configs.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = bode_grid(assemble_open_loop(pc.loop, "both"), 10, 10e6, 100)
            rep = margins(trace)
        print(f"{pc.label:8} {rep.f_ug / 1e6:11.3f} {rep.phi_m_deg:12.1f} "
              f"{rep.f_bump / 1e6:13.3f} {rep.g_m:6.2f}")
        ax_g.semilogx(trace.freqs, trace.gain_db, label=pc.label)
        ax_p.semilogx(trace.freqs, trace.phase_deg, label=pc.label)
        if rep.f_ug:
            ax_g.axvline(rep.f_ug, ls=":", lw=0.8, color="gray")
    ax_g.axhline(0, color="k", lw=0.6)
    ax_p.axhline(-180, color="k", lw=0.6)
    ax_g.set_ylabel("|alpha| (dB)")
    ax_p.set_ylabel("angle(alpha) (deg)")
    ax_p.set_xlabel("frequency (Hz)")
    ax_g.legend()
    fig.tight_layout()
    fig.savefig(OUT / "open_loop_bode.png", dpi=130)

    # low-frequency excess check on the closed-loop response of config 1
    pc1 = configs[1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        closed = closed_loop_trace(bode_grid(assemble_open_loop(pc1.loop, "both"), 10, 10e6, 100))
        f180cl = margins(closed).f_180
    check = low_freq_excess_check(closed, f180cl)
    print(f"\nconfig-1 low-frequency excess check over {check.band[0]:.0f}-{check.band[1]:.0f} Hz: "
          f"{'pass' if check.passed else check.offending}")

    # noise propagation for config 3
    pc3 = configs[3]
    disc = pc3.loop.discriminator
    k_e = effective_ke(disc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha3 = bode_grid(assemble_open_loop(pc3.loop, "both"), 10, 10e6, 100)
    s_y1_pred = closed_loop_psd(
        alpha3, lambda f: noise_model_psd(pc3.noise, f), pc3.s_n4_v2_per_hz, k_e,
        CavityPole(disc.delta_nu_c),
    )
    s_y4 = read_psd_csv(pc3.trace_path("sy4_csv"))
    baseline = read_psd_csv(pc3.trace_path("pd_baseline_csv"))
    recovered = sy4_to_sy1(
        s_y4, disc.modulation.omega_over_2pi, k_e, pd_model(pc3.loop),
        CavityPole(disc.delta_nu_c), baseline,
    )
    free = beta_separation_linewidth(pc3.noise)
    locked = beta_separation_linewidth(s_y1_pred)
    print(f"free-running linewidth estimate: {free.fwhm_hz / 1e3:.1f} kHz")
    print(f"locked-laser linewidth estimate: {locked.fwhm_hz / 1e3:.3f} kHz"
          + (" (below the separation line everywhere)" if locked.empty_region else ""))

    fig2, ax = plt.subplots(figsize=(7, 4.5))
    f = np.asarray(s_y1_pred.freqs)
    ax.loglog(f, noise_model_psd(pc3.noise, f), label="free-running model")
    ax.loglog(f, s_y1_pred.values, label="predicted locked")
    ax.loglog(recovered.psd.freqs, np.maximum(recovered.psd.values, 1e-12),
              label="recovered from RF spectrum")
    ax.loglog(f, beta_separation_line(f), "k--", lw=0.8, label="separation line")
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("S_y1 (Hz^2/Hz)")
    ax.set_ylim(1e-3, 1e9)
    ax.legend()
    fig2.tight_layout()
    fig2.savefig(OUT / "frequency_noise.png", dpi=130)

    # autotune configuration 3 from scratch
    res = autotune_fast(pc3.loop, TunePolicy(tune_slow=True))
    print(f"\nautotune: K_P={res.k_p:.4g}, f_I={res.f_i:.4g} Hz, f_D={res.f_d and f'{res.f_d:.4g}'} Hz, "
          f"f_I_slow={res.f_i_slow:.4g} Hz")
    print(f"          f_UG={res.margins.f_ug / 1e6:.3f} MHz, phi_m={res.margins.phi_m_deg:.1f} deg, "
          f"{res.iterations} model probes")
    print(f"\nplots in {OUT}")


if __name__ == "__main__":
    main()
