"""Per-environment reward functions, exact closed forms.

All functions are pure over snapshots; the episode engine feeds them the
same quantities it records, so step rewards can be recomputed from rollout
records bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observe import LayoutError


@dataclass(frozen=True)
class RewardParams:
    ring_alpha: float = 4.0
    fig8_v_des: float = 10.0
    intersection_gain: float = 0.2
    eps: float = 1e-6
    merge_h_max: float = 1.0
    merge_alpha: float = 0.1  # headway-penalty weight; no published value, documented default
    bottleneck_window: float = 10.0
    standstill_v: float = 0.3

    def __post_init__(self):
        for name in ("ring_alpha", "fig8_v_des", "intersection_gain", "eps",
                     "merge_h_max", "merge_alpha", "bottleneck_window", "standstill_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"RewardParams.{name} must be >= 0")


def reward_ring(velocities: np.ndarray, a_rv: float, p: RewardParams, n_expected: int = 22) -> float:
    """Mean velocity minus a weighted control-magnitude penalty."""
    if len(velocities) != n_expected:
        raise LayoutError(f"expected {n_expected} velocities, got {len(velocities)}")
    return float(np.mean(velocities)) - p.ring_alpha * abs(a_rv)

def reward_desired_velocity(velocities: np.ndarray, v_des: float) -> float:
    """max(||v_des*1|| - ||v_des*1 - V||, 0) / ||v_des*1||, in [0, 1]."""
    k = len(velocities)
    if k == 0:
        return 0.0
    target = np.full(k, v_des)
    target_norm = float(np.linalg.norm(target))
    deviation = float(np.linalg.norm(target - np.asarray(velocities, dtype=float)))
    return max(target_norm - deviation, 0.0) / target_norm


def reward_intersection(
    t: float, velocities: np.ndarray, v_max: np.ndarray, standstill_count: int, p: RewardParams
) -> float:
    """Time-weighted normalized delay plus a standstill penalty; always <= 0."""
    velocities = np.asarray(velocities, dtype=float)
    v_max = np.asarray(v_max, dtype=float)
    n = len(velocities)
    delay = float(np.sum((v_max - velocities) / v_max)) if n else 0.0
    return -t * delay / (n + p.eps) - p.intersection_gain * standstill_count


def reward_merge(velocities: np.ndarray, rv_headways: list[float], p: RewardParams) -> float:
    """Desired-velocity reward minus a small-headway penalty over the RVs."""
    base = reward_desired_velocity(velocities, p.fig8_v_des)
    penalty = sum(max(p.merge_h_max - h, 0.0) for h in rv_headways)
    return base - p.merge_alpha * penalty


def reward_bottleneck(exit_times: list[float], now: float, window: float = 10.0) -> float:
    """Outflow over the trailing window, scaled to vehicles/hour.

    Exits are counted on the half-open interval (now - window, now]."""
    count = sum(1 for t in exit_times if now - window < t <= now)
    return count * 3600.0 / window


def headway(gap: float, v: float) -> float:
    """Time headway; near-stopped vehicles use a 0.1 m/s floor."""
    return gap / max(v, 0.1)
