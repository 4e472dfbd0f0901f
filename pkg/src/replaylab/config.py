"""Run configuration: schema, defaults, validation, hashing."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "config_hash", "KNOWN_METHODS",
           "desk_preset"]

KNOWN_METHODS = (
    "ge", "ss", "dr", "shield", "shield_um", "pm_st", "pm_window",
    "rapo", "rapo_off_rep", "rapo_topk", "rapo_local",
)

_DEFAULTS = {
    "run_id": "run",
    "graph": {
        "nodes": 50, "branching": 1.1, "sens_frac": 0.2,
        "locality": 0.0, "local_span": 3, "sens_style": "grow",
        "seeds": [1],
    },
    "env": {
        "k_seed": 3, "seed_pool": "all", "refire": True,
        "reward": "linear", "action_costs": [0.002, 0.001, 0.0],
    },
    "fields": {
        "lam": 0.1, "alpha": 0.5, "eta": 0.05, "tau": 0.3,
        "delta": 1.0, "delay": 50,
    },
    "deformation": {
        "w_g": 1.0, "w_h": 2.0, "psi_min": 0.01, "topk_k": 3,
    },
    "rsd": {
        "t_exp": 500, "t_decay": 200, "t_rep": 500,
        "stimuli": list(range(1, 21)), "rng_mode": "independent",
        "truncate_buffer": False,
    },
    "training": {
        "enabled": False, "scripted_fallback": "moderate",
        "steps": 200000, "episode_len": 200, "lr": 3e-4, "clip": 0.2,
        "gae_lambda": 0.95, "gamma": 0.99, "lr_dual": 1e-2,
        "epochs_per_batch": 4, "seed": 0,
    },
    "shield": {"theta": 10.0, "n_mc": 20, "horizon": 100, "um_tolerance": 0.05},
    "methods": ["ge", "pm_st", "rapo", "rapo_off_rep"],
    "episodes": 20,
    "workers": 1,
    "master_seed": 0,
}


def desk_preset(**overrides) -> dict:
    """Small-scale run settings where replay suppression is measurable.

    High-locality ring graphs with a contiguous sensitive block and stimulus
    seeds in its interior make the sensitive region a bottleneck: once it is
    scarred, gated replay stays confined while nominal replay re-percolates.
    Fire-once cascades keep conductance gating airtight over long horizons.
    """
    preset = {
        "graph": {"nodes": 50, "branching": 3.0, "sens_frac": 0.24,
                  "locality": 1.0, "sens_style": "arc",
                  "seeds": [1, 2, 3, 4, 5]},
        "env": {"k_seed": 6, "seed_pool": "core", "refire": False,
                "reward": "log"},
        "fields": {"alpha": 2.0, "eta": 0.3, "delay": 25},
        "deformation": {"psi_min": 0.001},
        "rsd": {"t_exp": 120, "t_decay": 40, "t_rep": 120},
        "training": {"gamma": 0.8},
        "methods": ["ge", "pm_st", "rapo", "rapo_off_rep"],
        "episodes": 10,
    }
    for key, val in overrides.items():
        if key in preset and isinstance(preset[key], dict):
            preset[key] = {**preset[key], **val}
        else:
            preset[key] = val
    return preset


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.raw[key]

    def section(self, key) -> dict:
        return self.raw[key]

    def hash(self) -> str:
        return config_hash(self.raw)

    def snapshot(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2)


def config_hash(obj: dict) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _merge(defaults, override, path=""):
    if isinstance(defaults, dict):
        if not isinstance(override, dict):
            raise ConfigError(f"config field {path or '<root>'} must be an object")
        out = {}
        for k, v in defaults.items():
            if k in override:
                out[k] = _merge(v, override[k], f"{path}.{k}".lstrip("."))
            else:
                out[k] = v
        for k in override:
            if k not in defaults:
                raise ConfigError(f"unknown config field {path + '.' + k if path else k}")
        return out
    return override


def _validate(cfg: dict) -> None:
    for m in cfg["methods"]:
        if m not in KNOWN_METHODS:
            raise ConfigError(f"unknown method id {m!r}")
    g = cfg["graph"]
    if g["nodes"] < 10:
        raise ConfigError("graph.nodes must be >= 10")
    if not (0.15 <= g["sens_frac"] <= 0.25):
        raise ConfigError("graph.sens_frac must lie in [0.15, 0.25]")
    if not g["seeds"]:
        raise ConfigError("graph.seeds must be nonempty")
    r = cfg["rsd"]
    if min(r["t_exp"], r["t_decay"], r["t_rep"]) < 1:
        raise ConfigError("rsd horizons must be >= 1")
    if not r["stimuli"]:
        raise ConfigError("rsd.stimuli must be nonempty")
    if any(not (1 <= z <= 20) for z in r["stimuli"]):
        raise ConfigError("rsd.stimuli entries must lie in 1..20")
    if cfg["episodes"] < 1:
        raise ConfigError("episodes must be >= 1")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")


def load_config(source, overrides: dict | None = None) -> RunConfig:
    """Load and validate a run config from a path, dict, or JSON string.

    The REPLAYLAB_SEED environment variable overrides the master seed.
    """
    if isinstance(source, dict):
        user = source
    else:
        text = source
        if os.path.exists(str(source)):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    merged = _merge(_DEFAULTS, user)
    if overrides:
        merged = _merge(merged, overrides)
    env_seed = os.environ.get("REPLAYLAB_SEED")
    if env_seed is not None:
        try:
            merged["master_seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError("REPLAYLAB_SEED must be an integer") from exc
    _validate(merged)
    return RunConfig(raw=merged)
