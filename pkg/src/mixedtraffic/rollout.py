"""Rollout records: persistence, replay, and sweep drivers.

A record holds the full per-step state of one episode plus its config and
seed, so metrics can be recomputed offline and the episode can be replayed
bit for bit by re-simulating the recorded actions.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .configio import config_from_dict, config_to_dict
from .env import Episode, EpisodeConfig

RECORD_VERSION = 1


@dataclass
class RolloutRecord:
    config: EpisodeConfig
    seed: int
    arrays: dict
    version: int = RECORD_VERSION

    @property
    def config_hash(self) -> str:
        payload = json.dumps(config_to_dict(self.config), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def control_mask(self) -> np.ndarray:
        return self.arrays["phase"] == 1

    def step_states(self, k: int) -> dict:
        """Per-vehicle arrays recorded at step k."""
        offs = self.arrays["offsets"]
        sl = slice(int(offs[k]), int(offs[k + 1]))
        return {
            name: self.arrays[name][sl]
            for name in ("vid", "cls", "role", "route", "epos", "lane", "arc", "v", "accel")
        }


def save_rollout(record: RolloutRecord, path) -> None:
    header = json.dumps(
        {
            "version": record.version,
            "seed": record.seed,
            "config": config_to_dict(record.config),
            "config_hash": record.config_hash,
        }
    )
    np.savez_compressed(path, __header__=np.frombuffer(header.encode(), dtype=np.uint8),
                        **record.arrays)


def load_rollout(path) -> RolloutRecord:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files if k != "__header__"}
        header = json.loads(bytes(data["__header__"]).decode())
    if header["version"] != RECORD_VERSION:
        raise ValueError(f"unsupported rollout version {header['version']}")
    config = config_from_dict(header["config"])
    rec = RolloutRecord(config=config, seed=header["seed"], arrays=arrays)
    if rec.config_hash != header["config_hash"]:
        raise ValueError("rollout header hash does not match its config")
    return rec


def rollouts_equal(a: RolloutRecord, b: RolloutRecord) -> bool:
    if set(a.arrays) != set(b.arrays):
        return False
    for k in a.arrays:
        x, y = a.arrays[k], b.arrays[k]
        if x.shape != y.shape or x.dtype != y.dtype:
            return False
        if not np.array_equal(x, y, equal_nan=True):
            return False
    return True


def run_episode(
    config: EpisodeConfig,
    policy=None,
    record_states: bool = True,
) -> RolloutRecord:
    """Run one full episode under a policy callback (observation -> actions).

    ``policy=None`` sends zero actions; all-human baselines set
    ``config.rv_as_hv`` so the actions are ignored entirely.
    """
    ep = Episode(config, record_states=record_states)
    obs = ep.reset()
    done = False
    steps = 0
    while not done and steps < config.horizon:
        if policy is None:
            actions = np.zeros(config.action_slots)
        else:
            actions = np.asarray(policy(obs), dtype=float).reshape(-1)
        try:
            result = ep.step(actions)
        except Exception as exc:
            raise RuntimeError(f"policy step {steps} failed: {exc}") from exc
        obs = result.observation
        done = result.done
        steps += 1
    arrays = ep._recorder.arrays()
    exits = ep.world.exit_log
    arrays["exit_time"] = np.array([t for t, _ in exits])
    arrays["exit_vid"] = np.array([v for _, v in exits], dtype=np.int64)
    arrays["collision"] = np.array([ep.world.collision])
    arrays["network_params"] = np.frombuffer(
        json.dumps(ep._sampled_network, sort_keys=True).encode(), dtype=np.uint8
    )
    return RolloutRecord(config=config, seed=config.seed, arrays=arrays)


def replay_rollout(record: RolloutRecord) -> RolloutRecord:
    """Re-simulate the recorded actions; must reproduce the record exactly."""
    actions = record.arrays["actions"]
    control_rows = np.where(record.control_mask())[0]
    seq = actions[control_rows]
    counter = {"k": 0}

    def scripted(_obs):
        k = counter["k"]
        counter["k"] += 1
        return seq[k]

    return run_episode(record.config, policy=scripted,
                       record_states="offsets" in record.arrays)


def rollout_time_space(record: RolloutRecord) -> np.ndarray:
    """Long-format (t, vehicle id, route position, velocity) table."""
    from .metrics import time_space_table
    from .network import build_network

    arrays = record.arrays
    params = json.loads(bytes(arrays["network_params"]).decode())
    net = build_network(record.config.env_kind, **params)
    offsets_by_route = {ri: net.route_offsets(r.id) for ri, r in enumerate(net.routes)}
    s_pos = np.array(
        [
            offsets_by_route[int(r)][int(ep)]
            for r, ep in zip(arrays["route"], arrays["epos"])
        ]
    ) + arrays["arc"]
    return time_space_table(
        arrays["time"], arrays["offsets"], arrays["vid"], s_pos, arrays["v"]
    )


def run_density_sweep(
    base: EpisodeConfig,
    parameter: str,
    values,
    n_seeds: int = 10,
    policy=None,
    metric: str | None = None,
) -> list[dict]:
    """Per-grid-point multi-seed summaries (mean and std of the headline
    metric), one row per value, matching the density-sweep evaluation axes.
    """
    from dataclasses import replace

    from .env import merge_inflow_config
    from .metrics import metric_avg_velocity, metric_outflow

    if metric is None:
        metric = "outflow" if base.env_kind == "bottleneck" else "avg_velocity"
    rows = []
    for value in values:
        if parameter == "inflows":
            main, ramp = value
            cfg = merge_inflow_config(
                main, ramp,
                horizon=base.horizon, warmup=base.warmup, seed=base.seed,
                rv_as_hv=base.rv_as_hv, obs=base.obs,
            )
            label = f"{int(main)}/{int(ramp)}"
        elif parameter == "inflow":
            infl = tuple(
                replace_inflow_rate(spec, float(value)) for spec in base.inflows
            )
            cfg = replace(base, inflows=infl)
            label = str(value)
        else:
            cfg = replace(base, network={**base.network, parameter: value})
            label = str(value)
        samples = []
        density = None
        for s in range(n_seeds):
            cfg_s = replace(cfg, seed=cfg.seed + s)
            rec = run_episode(cfg_s, policy=policy, record_states=False)
            if metric == "outflow":
                samples.append(
                    metric_outflow(rec.arrays["exit_time"], float(rec.arrays["time"][-1]), 500.0)
                )
            else:
                samples.append(
                    metric_avg_velocity(
                        rec.arrays["mean_v"], rec.arrays["phase"], rec.arrays["n_veh"]
                    )
                )
            if density is None and cfg.population is not None:
                net_params = json.loads(bytes(rec.arrays["network_params"]).decode())
                from .network import build_network

                net = build_network(cfg.env_kind, **net_params)
                density = cfg.population.total / (net.total_length / 1000.0)
        rows.append(
            {
                "env": base.env_kind,
                "parameter": parameter,
                "value": label,
                "density_veh_km": density if density is not None else "",
                "n_seeds": n_seeds,
                "metric": metric,
                "mean": float(np.mean(samples)),
                "std": float(np.std(samples)),
            }
        )
    return rows


def replace_inflow_rate(spec, rate: float):
    from dataclasses import replace

    return replace(spec, rate=rate)
