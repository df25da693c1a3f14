"""Episode configuration files: YAML schema, defaults, and builtins.

A config file only needs ``env`` plus whatever it overrides; everything
else comes from the per-environment defaults. The canonical experiment
configs ship as package data (one per paper experiment).
"""
from __future__ import annotations

from dataclasses import asdict, replace
from importlib import resources

import yaml

from .demand import InflowSpec, PopulationSpec
from .env import EpisodeConfig, default_config
from .idm import ActionSpec, IdmParams
from .network import ConfigurationError
from .observe import ObservationSpec
from .rewards import RewardParams
from .world import Tuning

SCHEMA_VERSION = 1

BUILTIN_CONFIGS = (
    "ring",
    "figure_eight",
    "intersection",
    "merge_1100_200",
    "merge_1300_100",
    "merge_1300_200",
    "merge_1500_200",
    "merge_1500_300",
    "bottleneck_2300",
    "bottleneck_2500",
)


def config_to_dict(cfg: EpisodeConfig) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "env": cfg.env_kind,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "warmup": cfg.warmup,
        "dt": cfg.dt,
        "action_slots": cfg.action_slots,
        "rv_as_hv": cfg.rv_as_hv,
        "action": {"kind": cfg.action.kind, "low": cfg.action.lower, "high": cfg.action.upper},
        "observation": {
            "mode": cfg.obs.mode,
            "view_side": cfg.obs.view_side,
            "mask_radius": cfg.obs.mask_radius,
            "stack": cfg.obs.stack,
            "center_rule": cfg.obs.center_rule,
            "intersection_vehicles": cfg.obs.intersection_vehicles,
            "bottleneck_segments": cfg.obs.bottleneck_segments,
        },
        "idm": asdict(cfg.idm),
        "reward": asdict(cfg.reward),
        "tuning": asdict(cfg.tuning),
        "network": dict(cfg.network),
        "population": asdict(cfg.population) if cfg.population else None,
        "inflows": [asdict(spec) for spec in cfg.inflows],
    }


def config_from_dict(data: dict) -> EpisodeConfig:
    if "env" not in data:
        raise ConfigurationError("config: missing required field 'env'")
    cfg = default_config(data["env"])
    overrides = {}
    for key, attr in (
        ("seed", "seed"), ("horizon", "horizon"), ("warmup", "warmup"),
        ("dt", "dt"), ("action_slots", "action_slots"), ("rv_as_hv", "rv_as_hv"),
    ):
        if key in data and data[key] is not None:
            overrides[attr] = data[key]
    if "action" in data and data["action"]:
        a = data["action"]
        try:
            overrides["action"] = ActionSpec(
                a.get("kind", cfg.action.kind),
                float(a.get("low", cfg.action.lower)),
                float(a.get("high", cfg.action.upper)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"action: {exc}") from exc
    if "observation" in data and data["observation"]:
        o = dict(data["observation"])
        base = cfg.obs
        try:
            overrides["obs"] = ObservationSpec(
                mode=o.get("mode", base.mode),
                view_side=float(o.get("view_side", base.view_side)),
                mask_radius=(
                    None
                    if o.get("mask_radius", base.mask_radius) is None
                    else float(o.get("mask_radius", base.mask_radius))
                ),
                stack=int(o.get("stack", base.stack)),
                center_rule=o.get("center_rule", base.center_rule),
                intersection_vehicles=int(
                    o.get("intersection_vehicles", base.intersection_vehicles)
                ),
                bottleneck_segments=int(
                    o.get("bottleneck_segments", base.bottleneck_segments)
                ),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"observation: {exc}") from exc
    for key, cls, attr in (
        ("idm", IdmParams, "idm"),
        ("reward", RewardParams, "reward"),
        ("tuning", Tuning, "tuning"),
    ):
        if key in data and data[key]:
            base = asdict(getattr(cfg, attr))
            unknown = set(data[key]) - set(base)
            if unknown:
                raise ConfigurationError(f"{key}: unknown fields {sorted(unknown)}")
            base.update(data[key])
            try:
                overrides[attr] = cls(**base)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"{key}: {exc}") from exc
    if "network" in data and data["network"] is not None:
        overrides["network"] = dict(data["network"])
    if "population" in data:
        pop = data["population"]
        overrides["population"] = PopulationSpec(**pop) if pop else None
    if "inflows" in data and data["inflows"] is not None:
        try:
            overrides["inflows"] = tuple(InflowSpec(**spec) for spec in data["inflows"])
        except TypeError as exc:
            raise ConfigurationError(f"inflows: {exc}") from exc
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def load_config(path_or_name: str) -> EpisodeConfig:
    """Load a config from a YAML path or a builtin name."""
    import os

    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path_or_name}: config must be a mapping")
        return config_from_dict(data)
    if path_or_name in BUILTIN_CONFIGS:
        ref = resources.files("mixedtraffic").joinpath(f"configs/{path_or_name}.yaml")
        data = yaml.safe_load(ref.read_text())
        return config_from_dict(data)
    raise FileNotFoundError(
        f"config {path_or_name!r}: no such file, and not one of {BUILTIN_CONFIGS}"
    )


def save_config(cfg: EpisodeConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
