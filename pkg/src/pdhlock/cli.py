"""Command-line front end.

Every subcommand prints a human-readable summary by default and the
canonical JSON document with --json.  Exit codes: 0 success, 2 input
validation error, 3 computation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    evaluate_project,
    margins_to_dict,
    tune_policy_from_dict,
    tune_result_to_dict,
)
from .config import ConfigError, load_project, model_from_dict, validate_document
from .loop import (
    SingularityError,
    assemble_open_loop,
    closed_to_open_trace,
    margins,
)
from .measure import (
    FitError,
    ParseError,
    fit_ringdown,
    parse_bode_csv,
    parse_ringdown_csv,
    write_bode_csv,
)
from .noise import (
    NoiseModel,
    beta_separation_linewidth,
    read_psd_csv,
    sy4_to_sy1,
    write_psd_csv,
)
from .pdh import effective_ke
from .serialize import dumps_canonical
from .transfer import (
    CavityPole,
    Delay,
    Gain,
    bode_grid,
    compose,
)
from .tuning import autotune_fast, cavity_advisor, phase_budget

EXIT_VALIDATION = 2
EXIT_COMPUTE = 3


def _emit(args, doc: dict, human) -> None:
    if args.json:
        print(dumps_canonical(doc))
    else:
        human(doc)


def _fmt(x, unit=""):
    if x is None:
        return "not in range"
    return f"{x:.6g}{unit}"


def _load_model(spec: str, base_dir: Path):
    if spec == "identity":
        return Gain(1.0)
    path = Path(spec)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return model_from_dict(doc, base_dir=path.parent)


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f-min", type=float, default=10.0, help="grid start (Hz)")
    p.add_argument("--f-max", type=float, default=10e6, help="grid stop (Hz)")
    p.add_argument("--ppd", type=int, default=100, help="points per decade")


def _open_loop_trace(args):
    if getattr(args, "trace", None):
        return parse_bode_csv(args.trace)
    pc = load_project(args.config)
    model = assemble_open_loop(pc.loop, args.branch)
    from .loop import analysis_band

    f_min, f_max = analysis_band(pc.loop, args.f_min, args.f_max)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return bode_grid(model, f_min, f_max, args.ppd, label="alpha")


def cmd_bode(args) -> int:
    f_min, f_max = args.f_min, args.f_max
    if args.config:
        pc = load_project(args.config)
        model = assemble_open_loop(pc.loop, args.branch)
        from .loop import analysis_band

        f_min, f_max = analysis_band(pc.loop, f_min, f_max)
        label = pc.label or "alpha"
    else:
        model = _load_model(args.model, Path.cwd())
        label = "model"
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = bode_grid(model, f_min, f_max, args.ppd, label=label)
    out = args.output or sys.stdout
    if args.output:
        write_bode_csv(args.output, trace)
        print(f"wrote {len(trace)} points to {args.output}")
    else:
        sys.stdout.write(f"# {label}\nfrequency_Hz,gain_dB,phase_deg\n")
        for f, g, p in zip(trace.freqs, trace.gain_db, trace.phase_deg):
            sys.stdout.write(f"{float(f)!r},{float(g)!r},{float(p)!r}\n")
    return 0


def cmd_margins(args) -> int:
    trace = _open_loop_trace(args)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = margins(trace)
    doc = margins_to_dict(rep)

    def human(d):
        print(f"unity gain     f_UG   = {_fmt(d['f_ug_Hz'], ' Hz')}")
        print(f"phase margin   phi_m  = {_fmt(d['phi_m_deg'], ' deg')}")
        print(f"phase crossover f_180 = {_fmt(d['f_180_Hz'], ' Hz')}")
        print(f"gain margin    g_m    = {_fmt(d['g_m'])}")
        print(f"servo bump     f_bump = {_fmt(d['f_bump_Hz'], ' Hz')}")
        print(f"stable: {d['stable']}")
        for k, v in d["goal_flags"].items():
            print(f"goal {k}: {'pass' if v else 'FAIL'}")
        for w in d["warnings"]:
            print(f"warning: {w}")

    _emit(args, doc, human)
    return 0


def cmd_closed2open(args) -> int:
    trace = parse_bode_csv(args.trace)
    alpha = closed_to_open_trace(trace)
    if args.output:
        write_bode_csv(args.output, alpha)
        print(f"wrote {len(alpha)} points to {args.output}")
    else:
        sys.stdout.write("frequency_Hz,gain_dB,phase_deg\n")
        for f, g, p in zip(alpha.freqs, alpha.gain_db, alpha.phase_deg):
            sys.stdout.write(f"{float(f)!r},{float(g)!r},{float(p)!r}\n")
    return 0


def cmd_tune(args) -> int:
    pc = load_project(args.config)
    policy = tune_policy_from_dict(json.loads(Path(args.policy).read_text()) if args.policy else None)
    res = autotune_fast(pc.loop, policy)
    doc = tune_result_to_dict(res)

    def human(d):
        print(f"K_P      = {d['k_p']:.6g}")
        print(f"f_I      = {d['f_i_Hz']:.6g} Hz")
        print(f"f_D      = {_fmt(d['f_d_Hz'], ' Hz')}")
        print(f"f_I_slow = {d['f_i_slow_Hz']:.6g} Hz")
        m = d["margins"]
        print(f"f_UG = {_fmt(m['f_ug_Hz'], ' Hz')}, phi_m = {_fmt(m['phi_m_deg'], ' deg')}")
        print(f"steps: {d['iterations']}")
        if d["infeasible"]:
            print(f"INFEASIBLE: {d['binding_constraint']}")

    _emit(args, doc, human)
    return 0


def cmd_budget(args) -> int:
    pc = load_project(args.config)
    cfg = pc.loop
    from .loop import demod_model, fast_filter_model, pd_model

    components = [
        ("loop_filter_fast", fast_filter_model(cfg)),
        ("laser_fast_branch", cfg.g_fast),
        ("cavity", CavityPole(cfg.discriminator.delta_nu_c)),
        ("demod_chain", compose([demod_model(cfg), pd_model(cfg)])),
        ("propagation_delay", Delay(cfg.tau_l)),
    ]
    if args.measured_phase is not None:
        measured = args.measured_phase
        f_ref = args.f_ref
    else:
        trace = parse_bode_csv(args.trace)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = margins(trace)
        f_ref = args.f_ref if args.f_ref else rep.f_ug
        if f_ref is None:
            raise SingularityError("trace has no unity-gain crossing; pass --f-ref")
        measured = float(np.interp(np.log10(f_ref), np.log10(trace.freqs), trace.phase_deg))
    budget = phase_budget(components, f_ref, measured)
    doc = budget.to_dict()

    def human(d):
        print(f"phase budget at {d['f_ref_Hz']:.6g} Hz")
        for e in d["entries"]:
            print(f"  {e['component']:<20} {e['phase_deg']:+8.2f} deg")
        print(f"  {'sum':<20} {d['sum_deg']:+8.2f} deg")
        print(f"  {'measured':<20} {d['measured_deg']:+8.2f} deg")
        print(f"  {'residual':<20} {d['residual_deg']:+8.2f} deg")

    _emit(args, doc, human)
    return 0


def cmd_ringdown(args) -> int:
    trace = parse_ringdown_csv(args.csv)
    delta_nu_c, report = fit_ringdown(trace, args.exclude)
    doc = report.to_dict()

    def human(d):
        v, s = d["parameters"]["delta_nu_c_Hz"].values()
        print(f"delta_nu_c = {v / 1e3:.4g} kHz  (1 sigma {s / 1e3:.2g} kHz)")
        tau, stau = d["parameters"]["tau_s"].values()
        print(f"tau        = {tau * 1e6:.4g} us  (1 sigma {stau * 1e6:.2g} us)")
        print(f"residual RMS {d['residual_rms']:.3g} V over {d['n_points']} points")
        print(d["excluded"])

    _emit(args, doc, human)
    return 0


def cmd_psd(args) -> int:
    pc = load_project(args.config)
    s_y4 = read_psd_csv(args.sy4)
    baseline = read_psd_csv(args.baseline) if args.baseline else None
    from .loop import pd_model

    disc = pc.loop.discriminator
    result = sy4_to_sy1(
        s_y4,
        disc.modulation.omega_over_2pi,
        effective_ke(disc),
        pd_model(pc.loop),
        CavityPole(disc.delta_nu_c),
        baseline,
    )
    if args.output:
        write_psd_csv(args.output, result.psd)
        print(f"wrote {len(result.psd)} bins to {args.output}"
              + (f" ({result.clamped_bins} clamped)" if result.clamped_bins else ""))
    else:
        if result.psd.resolution_bandwidth is not None:
            sys.stdout.write(f"# rbw_Hz={result.psd.resolution_bandwidth!r}\n")
        sys.stdout.write(f"# clamped_bins={result.clamped_bins}\n")
        sys.stdout.write("frequency_Hz,psd_Hz2_per_Hz\n")
        for f, v in zip(result.psd.freqs, result.psd.values):
            sys.stdout.write(f"{float(f)!r},{float(v)!r}\n")
    return 0


def cmd_linewidth(args) -> int:
    if args.psd:
        trace = read_psd_csv(args.psd)
        result = beta_separation_linewidth(trace, args.f_low, args.f_high)
    else:
        if args.h_minus1 is None or args.h0 is None:
            raise ConfigError("pass either --psd or both --h-minus1 and --h0")
        model = NoiseModel(args.h_minus1, args.h0, args.f_low or 10.0)
        result = beta_separation_linewidth(model, args.f_low, args.f_high)
    doc = {
        "fwhm_Hz": result.fwhm_hz,
        "area_Hz2": result.area_hz2,
        "empty_region": result.empty_region,
    }

    def human(d):
        print(f"FWHM linewidth = {d['fwhm_Hz'] / 1e3:.4g} kHz")
        if d["empty_region"]:
            print("note: PSD never exceeded the separation line in the band")

    _emit(args, doc, human)
    return 0


def cmd_advise_cavity(args) -> int:
    advice = cavity_advisor(args.f_ug_fast, args.f_ug_slow)
    doc = {
        "delta_nu_c_min_Hz": advice.delta_nu_c_min,
        "delta_nu_c_max_Hz": advice.delta_nu_c_max,
        "empty": advice.empty,
        "rationale": advice.rationale,
    }

    def human(d):
        if d["empty"]:
            print("no linewidth satisfies both bounds (fast/slow crossovers too close)")
        else:
            print(
                f"recommended cavity linewidth: {d['delta_nu_c_min_Hz'] / 1e3:.4g} kHz "
                f"to {d['delta_nu_c_max_Hz'] / 1e3:.4g} kHz"
            )
        print(d["rationale"])

    _emit(args, doc, human)
    return 0


def cmd_evaluate(args) -> int:
    pc = load_project(args.config)
    doc = evaluate_project(pc, args.f_min, args.f_max, args.ppd, args.branch)
    validate_document(doc, "evaluate_response")

    def human(d):
        m = d["margins"]
        print(f"f_UG = {_fmt(m['f_ug_Hz'], ' Hz')}, phi_m = {_fmt(m['phi_m_deg'], ' deg')}, "
              f"f_bump = {_fmt(m['f_bump_Hz'], ' Hz')}")
        if d["linewidth"]:
            print(f"locked linewidth       = {d['linewidth']['locked_fwhm_Hz'] / 1e3:.4g} kHz")
            print(f"free-running linewidth = {d['linewidth']['free_running_fwhm_Hz'] / 1e3:.4g} kHz")

    _emit(args, doc, human)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(workdir=args.workdir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.bind, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdhlock",
        description="Model, analyze, tune, and audit PDH laser-locking loops.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bode", help="evaluate a model on a log grid, emit CSV")
    p.add_argument("--model", help="model JSON file, or 'identity'")
    p.add_argument("--config", help="project config JSON (uses the assembled loop)")
    p.add_argument("--branch", choices=["fast", "slow", "both"], default="both")
    _grid_args(p)
    p.add_argument("-o", "--output", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_bode)

    p = sub.add_parser("margins", help="stability margins of a trace or config")
    p.add_argument("--trace", help="open-loop Bode CSV")
    p.add_argument("--config", help="project config JSON")
    p.add_argument("--branch", choices=["fast", "slow", "both"], default="both")
    _grid_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("closed2open", help="convert measured y5/m6 into open loop")
    p.add_argument("--trace", required=True, help="closed-loop Bode CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_closed2open)

    p = sub.add_parser("tune", help="run the tuning schedule against the loop model")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", help="JSON file with tune policy overrides")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("budget", help="per-component phase budget at a frequency")
    p.add_argument("--config", required=True)
    p.add_argument("--f-ref", type=float, help="reference frequency (Hz)")
    p.add_argument("--measured-phase", type=float, help="measured open-loop phase (deg)")
    p.add_argument("--trace", help="measured open-loop Bode CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("ringdown", help="fit a cavity ring-down record")
    p.add_argument("csv")
    p.add_argument("--exclude", type=float, help="initial seconds to exclude")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ringdown)

    p = sub.add_parser("psd", help="convert an RF spectrum (s_y4) to frequency noise")
    p.add_argument("--sy4", required=True, help="PSD CSV around the carrier")
    p.add_argument("--config", required=True)
    p.add_argument("--baseline", help="detector baseline PSD CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("linewidth", help="beta-separation linewidth estimate")
    p.add_argument("--psd", help="PSD CSV")
    p.add_argument("--h-minus1", type=float, help="1/f intercept (Hz^2)")
    p.add_argument("--h0", type=float, help="white noise level (Hz^2/Hz)")
    p.add_argument("--f-low", type=float)
    p.add_argument("--f-high", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_linewidth)

    p = sub.add_parser("advise-cavity", help="recommended cavity linewidth range")
    p.add_argument("--f-ug-fast", type=float, required=True)
    p.add_argument("--f-ug-slow", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_advise_cavity)

    p = sub.add_parser("evaluate", help="full analysis of a config (margins+PSD+linewidth)")
    p.add_argument("--config", required=True)
    p.add_argument("--branch", choices=["fast", "slow", "both"], default="both")
    _grid_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the local analysis service")
    p.add_argument("--port", type=int, default=8341)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--workdir", default=".pdhlock-sessions")
    p.add_argument("--ui-dir", help="directory of built UI assets to serve at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularityError, FitError, ValueError, ZeroDivisionError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
