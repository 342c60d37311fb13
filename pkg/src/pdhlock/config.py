"""Project configuration: JSON documents describing a complete lock setup.

A ProjectConfig bundles the loop model (LoopConfig), the free-running
laser noise model, and references to measured trace files.  Documents are
schema-versioned and validated against the JSON Schemas shipped in
pdhlock/schemas on every load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from referencing import Registry, Resource

from .loop import BranchSum, FastFilterConfig, LoopConfig
from .noise import NoiseModel
from .pdh import DetectorConfig, DiscriminatorConfig, ModulationConfig
from .transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    FirstOrderHighPass,
    Gain,
    Integrator,
    LowPassButterworth,
    PdLockin,
    Pid,
    Product,
    Tabulated,
    TransferModel,
)

__all__ = [
    "ConfigError",
    "ProjectConfig",
    "model_to_dict",
    "model_from_dict",
    "loop_to_dict",
    "loop_from_dict",
    "project_to_dict",
    "project_from_dict",
    "load_project",
    "validate_document",
    "schema_registry",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration document rejected; the message names the field."""

    def __init__(self, message: str, field_path: str = ""):
        super().__init__(message)
        self.field_path = field_path


# -- schema registry ---------------------------------------------------------

_REGISTRY = None
_VALIDATORS: dict[str, Draft202012Validator] = {}


def _schema_dir():
    return resources.files("pdhlock") / "schemas"


def schema_registry() -> Registry:
    global _REGISTRY
    if _REGISTRY is None:
        resources_list = []
        for entry in _schema_dir().iterdir():
            if entry.name.endswith(".schema.json"):
                doc = json.loads(entry.read_text(encoding="utf-8"))
                resources_list.append((entry.name, Resource.from_contents(doc)))
        _REGISTRY = Registry().with_resources(resources_list)
    return _REGISTRY


def _validator(schema_name: str) -> Draft202012Validator:
    if schema_name not in _VALIDATORS:
        fname = f"{schema_name}.schema.json"
        doc = json.loads((_schema_dir() / fname).read_text(encoding="utf-8"))
        _VALIDATORS[schema_name] = Draft202012Validator(doc, registry=schema_registry())
    return _VALIDATORS[schema_name]


def validate_document(instance, schema_name: str) -> None:
    """Validate a JSON document; ConfigError names the offending field."""
    err = best_match(_validator(schema_name).iter_errors(instance))
    if err is not None:
        raise ConfigError(f"{err.json_path}: {err.message}", field_path=err.json_path)


# -- transfer-model documents ------------------------------------------------

def model_to_dict(model: TransferModel) -> dict:
    if isinstance(model, Gain):
        d = {"type": "gain", "k": model.k}
        if model.label:
            d["label"] = model.label
        return d
    if isinstance(model, Pid):
        return {"type": "pid", "k_p": model.k_p, "f_i_Hz": model.f_i, "f_d_Hz": model.f_d}
    if isinstance(model, Integrator):
        return {"type": "integrator", "f_i_Hz": model.f_i}
    if isinstance(model, LowPassButterworth):
        return {"type": "lowpass_butterworth", "order": model.order, "f0_Hz": model.f0}
    if isinstance(model, FirstOrderHighPass):
        return {"type": "highpass_first_order", "f0_Hz": model.f0}
    if isinstance(model, Delay):
        return {"type": "delay", "tau_s": model.tau}
    if isinstance(model, CavityPole):
        return {"type": "cavity_pole", "delta_nu_c_Hz": model.delta_nu_c}
    if isinstance(model, PdLockin):
        return {
            "type": "pd_lockin",
            "order": model.order,
            "f_pd_Hz": model.f_pd,
            "omega_over_2pi_Hz": model.omega_over_2pi,
        }
    if isinstance(model, Product):
        return {"type": "product", "factors": [model_to_dict(m) for m in model.factors]}
    if isinstance(model, BranchSum):
        return {"type": "sum", "branches": [model_to_dict(m) for m in model.branches]}
    if isinstance(model, Tabulated):
        return {
            "type": "tabulated",
            "freqs_Hz": model.trace.freqs.tolist(),
            "gain_dB": model.trace.gain_db.tolist(),
            "phase_deg": model.trace.phase_deg.tolist(),
        }
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(d: dict, base_dir: Path | None = None) -> TransferModel:
    kind = d.get("type")
    if kind == "gain":
        return Gain(d["k"], d.get("label", ""))
    if kind == "pid":
        return Pid(d["k_p"], d.get("f_i_Hz", 0.0), d.get("f_d_Hz"))
    if kind == "integrator":
        return Integrator(d["f_i_Hz"])
    if kind == "lowpass_butterworth":
        return LowPassButterworth(d["order"], d["f0_Hz"])
    if kind == "highpass_first_order":
        return FirstOrderHighPass(d["f0_Hz"])
    if kind == "delay":
        return Delay(d["tau_s"])
    if kind == "cavity_pole":
        return CavityPole(d["delta_nu_c_Hz"])
    if kind == "pd_lockin":
        return PdLockin(d["order"], d["f_pd_Hz"], d["omega_over_2pi_Hz"])
    if kind == "product":
        return Product(tuple(model_from_dict(m, base_dir) for m in d["factors"]))
    if kind == "sum":
        return BranchSum(tuple(model_from_dict(m, base_dir) for m in d["branches"]))
    if kind == "tabulated":
        if "csv_path" in d:
            from .measure import parse_bode_csv

            path = Path(d["csv_path"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            return Tabulated(parse_bode_csv(path))
        return Tabulated(
            BodeTrace.from_gain_phase(
                np.asarray(d["freqs_Hz"]), np.asarray(d["gain_dB"]), np.asarray(d["phase_deg"])
            )
        )
    raise ConfigError(f"unknown model type {kind!r}")


# -- loop documents ----------------------------------------------------------

def loop_to_dict(cfg: LoopConfig) -> dict:
    disc = cfg.discriminator
    return {
        "discriminator": {
            "modulation": {
                "beta_rad": disc.modulation.beta,
                "omega_over_2pi_Hz": disc.modulation.omega_over_2pi,
            },
            "detector": {
                "responsivity_A_per_W": disc.detector.responsivity,
                "transimpedance_V_per_A": disc.detector.transimpedance,
                "nep_W_per_sqrtHz": disc.detector.nep,
                "f_pd_Hz": disc.detector.f_pd,
                "order": disc.detector.order,
            },
            "delta_nu_c_Hz": disc.delta_nu_c,
            "p_pd_W": disc.p_pd,
            "f_m_Hz": disc.f_m,
            "lp_order": disc.lp_order,
            "k_e_override_V_per_Hz": disc.k_e_override,
            "offset_V": disc.offset_v,
        },
        "k_fast": {
            "k_p": cfg.k_fast.k_p,
            "f_i_Hz": cfg.k_fast.f_i,
            "f_d_Hz": cfg.k_fast.f_d,
            "parasitic_f0_Hz": cfg.k_fast.parasitic_f0,
        },
        "f_i_slow_Hz": cfg.f_i_slow,
        "g_fast": model_to_dict(cfg.g_fast),
        "g_slow": model_to_dict(cfg.g_slow),
        "tau_l_s": cfg.tau_l,
        "demod": None if cfg.demod is None else model_to_dict(cfg.demod),
        "pd": None if cfg.pd is None else model_to_dict(cfg.pd),
        "label": cfg.label,
    }


def loop_from_dict(d: dict, base_dir: Path | None = None) -> LoopConfig:
    disc = d["discriminator"]
    try:
        discriminator = DiscriminatorConfig(
            modulation=ModulationConfig(
                beta=disc["modulation"]["beta_rad"],
                omega_over_2pi=disc["modulation"]["omega_over_2pi_Hz"],
            ),
            detector=DetectorConfig(
                responsivity=disc["detector"]["responsivity_A_per_W"],
                transimpedance=disc["detector"]["transimpedance_V_per_A"],
                nep=disc["detector"]["nep_W_per_sqrtHz"],
                f_pd=disc["detector"]["f_pd_Hz"],
                order=disc["detector"]["order"],
            ),
            delta_nu_c=disc["delta_nu_c_Hz"],
            p_pd=disc["p_pd_W"],
            f_m=disc.get("f_m_Hz"),
            lp_order=disc.get("lp_order", 8),
            k_e_override=disc.get("k_e_override_V_per_Hz"),
            offset_v=disc.get("offset_V", 0.0),
        )
        kf = d["k_fast"]
        return LoopConfig(
            discriminator=discriminator,
            k_fast=FastFilterConfig(
                k_p=kf["k_p"],
                f_i=kf.get("f_i_Hz", 0.0),
                f_d=kf.get("f_d_Hz"),
                parasitic_f0=kf.get("parasitic_f0_Hz"),
            ),
            f_i_slow=d["f_i_slow_Hz"],
            g_fast=model_from_dict(d["g_fast"], base_dir),
            g_slow=model_from_dict(d["g_slow"], base_dir),
            tau_l=d["tau_l_s"],
            demod=None if d.get("demod") is None else model_from_dict(d["demod"], base_dir),
            pd=None if d.get("pd") is None else model_from_dict(d["pd"], base_dir),
            label=d.get("label", ""),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


@dataclass
class ProjectConfig:
    """A complete analysis setup: loop model, noise model, trace files."""

    loop: LoopConfig
    noise: NoiseModel | None = None
    s_n4_v2_per_hz: float = 0.0
    traces: dict[str, str] = field(default_factory=dict)
    label: str = ""
    base_dir: Path | None = None

    def trace_path(self, key: str) -> Path:
        p = Path(self.traces[key])
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def project_to_dict(pc: ProjectConfig) -> dict:
    noise = None
    if pc.noise is not None:
        noise = {
            "h_minus1_Hz2": pc.noise.h_minus1,
            "h0_Hz2_per_Hz": pc.noise.h0,
            "f_low_Hz": pc.noise.f_low,
            "s_n4_V2_per_Hz": pc.s_n4_v2_per_hz,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "label": pc.label,
        "loop": loop_to_dict(pc.loop),
        "noise": noise,
        "traces": dict(pc.traces),
    }


def project_from_dict(d: dict, base_dir: Path | None = None) -> ProjectConfig:
    validate_document(d, "project_config")
    noise = None
    s_n4 = 0.0
    if d.get("noise") is not None:
        n = d["noise"]
        noise = NoiseModel(
            h_minus1=n["h_minus1_Hz2"], h0=n["h0_Hz2_per_Hz"], f_low=n.get("f_low_Hz", 10.0)
        )
        s_n4 = n.get("s_n4_V2_per_Hz", 0.0)
    return ProjectConfig(
        loop=loop_from_dict(d["loop"], base_dir),
        noise=noise,
        s_n4_v2_per_hz=s_n4,
        traces=dict(d.get("traces", {})),
        label=d.get("label", ""),
        base_dir=base_dir,
    )


def load_project(path) -> ProjectConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return project_from_dict(doc, base_dir=path.parent)
