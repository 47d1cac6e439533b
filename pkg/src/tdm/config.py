"""YAML run configuration mirroring ReconConfig; CLI flags override keys."""

import yaml

from .diffusion import SamplerConfig, SigmaSchedule
from .errors import ConfigurationError
from .optim import ADMMConfig
from .recon import ReconConfig

_SCHEDULE_KEYS = {"sigma_min", "sigma_max", "n_steps"}
_ADMM_KEYS = {"lam", "rho", "sweeps", "cg_iters", "cg_tol"}
_SAMPLER_KEYS = {"n_corrector", "snr"}
_TOP_KEYS = {
    "schedule",
    "admm",
    "sampler",
    "sub_batch",
    "final_projection",
    "projection_sweeps",
    "pocs_sweeps",
    "art_relax",
    "seed",
    "log_every",
}


def load_config(path):
    """Parse a YAML config file into a plain nested dict."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config root must be a mapping, got {type(data).__name__}")
    return data


def _section(data, name, allowed):
    section = data.get(name, {}) or {}
    if not isinstance(section, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return section


def build_recon_config(data=None, **overrides):
    """Assemble a ReconConfig from a config dict plus keyword overrides.

    Overrides use flat names: schedule/admm/sampler fields are addressed
    directly (sigma_min, lam, snr, ...) and win over file values.
    """
    data = dict(data or {})
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

    sched = dict(_section(data, "schedule", _SCHEDULE_KEYS))
    admm = dict(_section(data, "admm", _ADMM_KEYS))
    sampler = dict(_section(data, "sampler", _SAMPLER_KEYS))
    top = {k: v for k, v in data.items() if k not in ("schedule", "admm", "sampler")}

    for key, value in overrides.items():
        if value is None:
            continue
        if key in _SCHEDULE_KEYS:
            sched[key] = value
        elif key in _ADMM_KEYS:
            admm[key] = value
        elif key in _SAMPLER_KEYS:
            sampler[key] = value
        elif key in _TOP_KEYS:
            top[key] = value
        else:
            raise ConfigurationError(f"unknown config override {key!r}")

    schedule = SigmaSchedule(**sched) if sched else None
    return ReconConfig(
        schedule=schedule,
        admm=ADMMConfig(**admm),
        sampler=SamplerConfig(**sampler),
        **top,
    )
