"""Deterministic golden-frame procedure shared by the generator and the
acceptance suite: fixed seed, all-human control, fixed step count, slot 0."""
import numpy as np

from mixedtraffic.env import Episode, default_config

GOLDEN_STATES = {
    "ring": dict(network={"circumference": 230.0}, warmup=300, horizon=10),
    "figure_eight": dict(network={"inner_radius": 25.0}, warmup=0, horizon=220),
    "intersection": dict(warmup=400, horizon=10),
    "merge": dict(warmup=0, horizon=420),
    "bottleneck": dict(warmup=40, horizon=220),
}


def golden_frame(kind: str) -> np.ndarray:
    over = dict(GOLDEN_STATES[kind])
    cfg = default_config(kind, seed=0, rv_as_hv=True, **over)
    ep = Episode(cfg, record_states=False)
    obs = ep.reset()
    for _ in range(cfg.horizon - 1):
        result = ep.step(np.zeros(cfg.action_slots))
        obs = result.observation
    return obs[0]
