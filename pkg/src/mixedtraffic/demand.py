"""Vehicle population initialization and inflow-driven spawning.

Closed networks get a fixed population placed at reset; open networks emit
vehicles at deterministic uniform headways (an accumulator per route, no
randomness in timing) with seeded class draws and counter-based robot
vehicle assignment for exact penetration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ConfigurationError
from .world import CLASS_LENGTH, VEHICLE_CLASSES, World


@dataclass(frozen=True)
class PopulationSpec:
    total: int
    rv_count: int
    spacing: str = "uniform_jitter"  # uniform | uniform_jitter
    jitter_frac: float = 0.1  # per-vehicle jitter, so relative shifts reach 20%

    def __post_init__(self):
        if self.rv_count > self.total:
            raise ConfigurationError("rv_count exceeds total population")
        if self.spacing not in ("uniform", "uniform_jitter"):
            raise ConfigurationError(f"unknown spacing rule {self.spacing!r}")


@dataclass(frozen=True)
class InflowSpec:
    route: str
    rate: float  # vehicles/hour
    rv_penetration: float = 0.0
    class_mix: dict = field(default_factory=lambda: {"passenger": 1.0})
    rv_class: str = "passenger"
    mode: str = "uniform"  # uniform | poisson
    rv_mode: str = "counter"  # counter | bernoulli

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigurationError("inflow rate must be >= 0")
        if not 0.0 <= self.rv_penetration <= 1.0:
            raise ConfigurationError("rv_penetration must be in [0, 1]")
        total = sum(self.class_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"class mix sums to {total}, expected 1")
        for name in self.class_mix:
            if name not in VEHICLE_CLASSES:
                raise ConfigurationError(f"unknown vehicle class {name!r}")


def init_closed_population(world: World, spec: PopulationSpec, rng) -> list[int]:
    """Place the population with uniform front-bumper spacing, velocity 0.

    The robot vehicle(s) are the lowest vehicle indices. Jitter is drawn per
    vehicle from the seeded stream and never exceeds half the bumper gap.
    """
    net = world.net
    route = net.routes[0]
    length = net.route_length(route.id)
    n = spec.total
    veh_len = float(CLASS_LENGTH[VEHICLE_CLASSES.index("passenger")])
    if n * (veh_len + world.idm.s0) > length:
        raise ConfigurationError(
            f"{n} vehicles do not fit on {length:.1f} m with jam gaps"
        )
    spacing = length / n
    bumper_gap = spacing - veh_len
    offsets = np.arange(n) * spacing + veh_len
    if spec.spacing == "uniform_jitter":
        jitter = rng.uniform(-spec.jitter_frac, spec.jitter_frac, size=n) * bumper_gap
        offsets = offsets + jitter
    route_offs = net.route_offsets(route.id)
    vids = []
    for i in range(n):
        s = float(offsets[i]) % length
        epos = int(np.searchsorted(route_offs, s, side="right") - 1)
        epos = min(epos, len(route.edges) - 1)
        arc = s - route_offs[epos]
        role = "rv" if i < spec.rv_count else "hv"
        vids.append(
            world.add_vehicle("passenger", role, route.id, lane=0, arc=arc, velocity=0.0, epos=epos)
        )
    return vids


class DemandState:
    """Per-route emission accumulators, class/role queues, and counters."""

    def __init__(self, specs: list[InflowSpec]):
        self.specs = list(specs)
        self.acc = [0.0] * len(self.specs)
        self.spawn_count = [0] * len(self.specs)
        self.pending: list[list[tuple[str, str]]] = [[] for _ in self.specs]

    def _draw_vehicle(self, k: int, rng) -> tuple[str, str]:
        spec = self.specs[k]
        self.spawn_count[k] += 1
        if spec.rv_penetration > 0.0:
            if spec.rv_mode == "counter":
                period = round(1.0 / spec.rv_penetration)
                is_rv = self.spawn_count[k] % period == 0
            else:
                is_rv = rng.random() < spec.rv_penetration
        else:
            is_rv = False
        if is_rv:
            return spec.rv_class, "rv"
        names = sorted(spec.class_mix)
        probs = np.array([spec.class_mix[c] for c in names])
        u = rng.random()
        cls = names[int(np.searchsorted(np.cumsum(probs), u, side="right"))]
        return cls, "hv"

    def step(self, world: World, rng) -> list[int]:
        """Emit due vehicles; insertion defers while the entry lane is full."""
        inserted = []
        dt = world.dt
        for k, spec in enumerate(self.specs):
            if spec.rate > 0.0:
                if spec.mode == "uniform":
                    self.acc[k] += spec.rate * dt / 3600.0
                    while self.acc[k] >= 1.0:
                        self.acc[k] -= 1.0
                        self.pending[k].append(self._draw_vehicle(k, rng))
                else:  # seeded Poisson arrivals
                    mean = spec.rate * dt / 3600.0
                    for _ in range(rng.poisson(mean)):
                        self.pending[k].append(self._draw_vehicle(k, rng))
            while self.pending[k]:
                vid = self._try_insert(world, spec, self.pending[k][0])
                if vid is None:
                    break
                self.pending[k].pop(0)
                inserted.append(vid)
        return inserted

    def _try_insert(self, world: World, spec: InflowSpec, veh: tuple[str, str]) -> int | None:
        cls, role = veh
        net = world.net
        route = net.route(spec.route)
        entry_ge = net.edge_index(route.edges[0])
        n_lanes = net.edges[entry_ge].lane_count
        veh_len = float(CLASS_LENGTH[VEHICLE_CLASSES.index(cls)])
        ge = world.gedge()
        # free space per lane: rear bumper of the rearmost vehicle on entry
        best_lane, best_space = -1, -np.inf
        for lane in range(n_lanes):
            mask = (ge == entry_ge) & (world.lane == lane)
            if np.any(mask):
                space = float(np.min(world.arc[mask] - world.length[mask]))
            else:
                space = float(world._edge_len[entry_ge])
            if space > best_space:
                best_lane, best_space = lane, space
        if best_space < veh_len + world.idm.s0:
            return None
        speed = min(world.tuning.spawn_speed, net.edges[entry_ge].speed_limit)
        return world.add_vehicle(
            cls, role, spec.route, lane=best_lane, arc=veh_len, velocity=speed
        )


@dataclass(frozen=True)
class WarmupSchedule:
    """Control ownership: robot vehicles drive as humans during warmup."""

    warmup_steps: int

    def phase(self, step: int) -> str:
        return "warmup" if step < self.warmup_steps else "control"

    def rv_policy_controlled(self, step: int) -> bool:
        return step >= self.warmup_steps
