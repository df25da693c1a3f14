"""Longitudinal control laws: IDM car following, RV action mapping, failsafe.

Scalar reference implementations live here; the batched hot-path versions in
``mixedtraffic.kernels`` must agree with these bit for bit (tested).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "IdmParams",
    "ActionSpec",
    "idm_acceleration",
    "hv_acceleration",
    "failsafe_acceleration",
    "apply_rv_action",
    "equilibrium_speed",
    "equilibrium_gap",
    "RV_ACCEL_ENVELOPE",
    "B_EMERGENCY",
]

RV_ACCEL_ENVELOPE = 4.0  # m/s^2, physical envelope for velocity-tracking RVs
B_EMERGENCY = 4.5  # m/s^2, failsafe braking assumption


@dataclass(frozen=True)
class IdmParams:
    """Intelligent Driver Model parameters.

    Defaults are the canonical values of the original car-following model:
    v0=30 m/s, T=1 s, a_max=1 m/s^2, b_comf=1.5 m/s^2, delta=4, s0=2 m.
    ``noise_bound`` is the half-width of the uniform per-step acceleration
    noise applied to human drivers.
    """

    v0: float = 30.0
    T: float = 1.0
    a_max: float = 1.0
    b_comf: float = 1.5
    delta: float = 4.0
    s0: float = 2.0
    noise_bound: float = 0.2

    def __post_init__(self):
        for name in ("v0", "T", "a_max", "b_comf", "delta", "s0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be positive")
        if self.noise_bound < 0:
            raise ValueError("IdmParams.noise_bound must be >= 0")


@dataclass(frozen=True)
class ActionSpec:
    """Continuous action bounds; kind is 'acceleration' or 'velocity'."""

    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in ("acceleration", "velocity"):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if not self.lower < self.upper:
            raise ValueError("ActionSpec requires lower < upper")


def idm_acceleration(
    v: float,
    gap: float,
    leader_v: float | None,
    p: IdmParams = IdmParams(),
    v0: float | None = None,
) -> float:
    """Deterministic IDM acceleration; leaderless means gap=inf, leader_v=v.

    ``v0`` overrides the desired speed (used to respect edge speed limits).
    """
    des = p.v0 if v0 is None else v0
    if leader_v is None:
        gap, leader_v = math.inf, v
    if gap < 1e-3:
        gap = 1e-3
    ratio = v / des
    if p.delta == 4.0:
        free = ratio * ratio
        free = free * free
    else:
        free = ratio**p.delta
    dv = v - leader_v
    s_star = p.s0 + max(0.0, v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf)))
    interaction = s_star / gap
    return p.a_max * (1.0 - free - interaction * interaction)


def hv_acceleration(
    v: float,
    gap: float,
    leader_v: float | None,
    p: IdmParams,
    rng,
    v0: float | None = None,
) -> float:
    """IDM plus seeded uniform noise in [-noise_bound, noise_bound]."""
    a = idm_acceleration(v, gap, leader_v, p, v0=v0)
    if p.noise_bound > 0.0:
        a += rng.uniform(-p.noise_bound, p.noise_bound)
    return a


def failsafe_acceleration(
    v: float, gap: float, leader_v: float, dt: float, b: float = B_EMERGENCY
) -> float:
    """Upper bound on acceleration that keeps emergency braking feasible.

    Braking at ``b`` from next step's speed must not reach the leader's
    rear, assuming the leader brakes at the same rate. The leader is
    credited its discrete (next-step) speed, which keeps the bound sound
    under Euler integration.
    """
    if not math.isfinite(gap):
        return math.inf
    lv = leader_v - b * dt
    if lv < 0.0:
        lv = 0.0
    arg = b * dt * b * dt + 2.0 * b * gap + lv * lv
    v1_max = -b * dt + math.sqrt(max(arg, 0.0))
    v1_max = max(v1_max, 0.0)
    return (v1_max - v) / dt


def apply_rv_action(v: float, raw_action: float, spec: ActionSpec, dt: float) -> float:
    """Effective commanded acceleration for a policy action.

    Velocity actions are tracked in one step, limited to the physical
    acceleration envelope. The failsafe bound is applied by the stepper.
    """
    if not math.isfinite(raw_action):
        raise ValueError(f"non-finite policy action {raw_action!r}")
    clamped = min(max(raw_action, spec.lower), spec.upper)
    if spec.kind == "acceleration":
        return clamped
    accel = (clamped - v) / dt
    return min(max(accel, -RV_ACCEL_ENVELOPE), RV_ACCEL_ENVELOPE)


def equilibrium_gap(v: float, p: IdmParams = IdmParams()) -> float:
    """Bumper gap at which a follower of an equal-speed leader holds speed."""
    ratio = v / p.v0
    return (p.s0 + v * p.T) / math.sqrt(1.0 - ratio**p.delta)


def equilibrium_speed(gap: float, p: IdmParams = IdmParams(), iters: int = 200) -> float:
    """Speed at which idm_acceleration(v, gap, v) == 0, by bisection."""
    lo, hi = 0.0, p.v0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if idm_acceleration(mid, gap, mid, p) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
