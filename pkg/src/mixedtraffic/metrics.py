"""Evaluation metrics: average velocity, windowed outflow, queue length,
time-space tables, and the stop-and-go wave detector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STANDSTILL_V = 0.3  # m/s
WAVE_V_THRESHOLD = 2.0  # m/s, a vehicle this slow marks a wave
FLOW_ESTABLISHED_V = 2.5  # m/s, every vehicle must first exceed this


def metric_avg_velocity(step_mean_v: np.ndarray, phase: np.ndarray, n_veh: np.ndarray) -> float:
    """Time-mean of the per-step vehicle-mean velocity over control steps.

    Steps with no vehicles are excluded."""
    mask = (phase == 1) & (n_veh > 0)
    if not np.any(mask):
        return float("nan")
    return float(np.mean(step_mean_v[mask]))


def metric_outflow(exit_times: np.ndarray, now: float, window: float = 500.0) -> float:
    """Exits in (now - window, now] scaled to veh/hr; windows longer than the
    elapsed episode fall back to the full duration."""
    window = min(window, now) if now > 0 else window
    if window <= 0:
        return 0.0
    count = int(np.sum((exit_times > now - window) & (exit_times <= now)))
    return count * 3600.0 / window


def metric_queue_length(
    arcs: np.ndarray, velocities: np.ndarray, stop_line_arc: float,
    v_standstill: float = STANDSTILL_V,
) -> int:
    """Consecutive standing vehicles counted backward from the stop line."""
    mask = arcs <= stop_line_arc + 1.0
    if not np.any(mask):
        return 0
    order = np.argsort(-arcs[mask], kind="stable")
    vs = velocities[mask][order]
    count = 0
    for v in vs:
        if v < v_standstill:
            count += 1
        else:
            break
    return count


@dataclass(frozen=True)
class WaveDetection:
    fired: bool
    first_time: float  # s, first low-velocity step after flow established
    drift: float  # m/s, signed drift of the minimum-velocity locus


def detect_wave(
    times: np.ndarray,
    min_v: np.ndarray,
    argmin_s: np.ndarray,
    route_length: float,
    v_threshold: float = WAVE_V_THRESHOLD,
    established_v: float = FLOW_ESTABLISHED_V,
    drift_window_s: float = 30.0,
) -> WaveDetection:
    """Stop-and-go detector over per-step (min velocity, its route position).

    A wave fires the first time any vehicle drops below ``v_threshold``
    after flow is established (all vehicles above ``established_v``, which
    skips the standing start). Drift is the slope of the wrap-unwrapped
    minimum-velocity locus over the window after firing; backward-running
    waves have negative drift.
    """
    est = np.where(min_v >= established_v)[0]
    if len(est) == 0:
        return WaveDetection(False, float("nan"), 0.0)
    start = est[0]
    low = np.where(min_v[start:] < v_threshold)[0]
    if len(low) == 0:
        return WaveDetection(False, float("nan"), 0.0)
    k0 = start + int(low[0])
    t0 = float(times[k0])
    in_win = (times >= t0) & (times <= t0 + drift_window_s) & (min_v < v_threshold)
    ks = np.where(in_win)[0]
    if len(ks) < 2:
        return WaveDetection(True, t0, 0.0)
    locus = argmin_s[ks].astype(float)
    steps = np.diff(locus)
    if route_length > 0:
        steps = np.mod(steps + route_length / 2.0, route_length) - route_length / 2.0
    unwrapped = np.concatenate([[locus[0]], locus[0] + np.cumsum(steps)])
    slope = np.polyfit(times[ks], unwrapped, 1)[0]
    return WaveDetection(True, t0, float(slope))


def time_space_table(
    times: np.ndarray, offsets: np.ndarray, vids: np.ndarray,
    s_pos: np.ndarray, velocities: np.ndarray,
) -> np.ndarray:
    """Long-format (t, vehicle id, route position, velocity) rows."""
    rows = np.empty((len(vids), 4))
    step_of = np.repeat(np.arange(len(times)), np.diff(offsets))
    rows[:, 0] = times[step_of]
    rows[:, 1] = vids
    rows[:, 2] = s_pos
    rows[:, 3] = velocities
    return rows
