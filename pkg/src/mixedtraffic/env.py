"""Episode engine: reset/step semantics for the five environments.

One episode is one logical thread of execution; many episodes can run in
parallel with independent state. Identical (config, seed) pairs produce
bit-identical rollouts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .demand import DemandState, InflowSpec, PopulationSpec, WarmupSchedule, init_closed_population
from .idm import ActionSpec, IdmParams, apply_rv_action
from .network import ConfigurationError, build_network
from .observe import (
    OBSERVATION_DEFAULTS,
    LayoutError,
    ObservationSpec,
    junction_observation,
    position_only_ring,
    precise_bottleneck,
    precise_figure_eight,
    precise_intersection,
    precise_merge,
    precise_ring,
    stack_rv_observations,
)
from .rewards import (
    RewardParams,
    headway,
    reward_bottleneck,
    reward_desired_velocity,
    reward_intersection,
    reward_merge,
    reward_ring,
)
from .world import ROLE_RV, Tuning, World

ENV_KINDS = ("ring", "figure_eight", "intersection", "merge", "bottleneck")

BOTTLENECK_CLASS_MIX = {
    "passenger": 0.70,
    "semi_truck": 0.10,
    "motorcycle": 0.10,
    "delivery_truck": 0.05,
    "bus": 0.05,
}


@dataclass(frozen=True)
class EpisodeConfig:
    env_kind: str
    horizon: int
    warmup: int
    action: ActionSpec
    obs: ObservationSpec
    action_slots: int
    dt: float = 0.1
    seed: int = 0
    idm: IdmParams = field(default_factory=IdmParams)
    reward: RewardParams = field(default_factory=RewardParams)
    tuning: Tuning = field(default_factory=Tuning)
    network: dict = field(default_factory=dict)
    population: PopulationSpec | None = None
    inflows: tuple[InflowSpec, ...] = ()
    rv_as_hv: bool = False  # all-human baseline mode

    def validate(self) -> None:
        if self.env_kind not in ENV_KINDS:
            raise ConfigurationError(f"env_kind: unknown environment {self.env_kind!r}")
        if self.horizon <= 0:
            raise ConfigurationError(f"horizon: must be positive, got {self.horizon}")
        if self.warmup < 0:
            raise ConfigurationError(f"warmup: must be >= 0, got {self.warmup}")
        if self.dt <= 0:
            raise ConfigurationError(f"dt: must be positive, got {self.dt}")
        if self.obs.mode not in ("image", "precise", "position_only"):
            raise ConfigurationError(f"observation.mode: unknown mode {self.obs.mode!r}")
        if self.obs.mode == "position_only" and self.env_kind != "ring":
            raise ConfigurationError("observation.mode: position_only exists only for ring")
        closed = self.env_kind in ("ring", "figure_eight")
        if closed and self.population is None:
            raise ConfigurationError("population: required for closed environments")
        if not closed and not self.inflows and not self.rv_as_hv:
            raise ConfigurationError("inflows: required for open environments")


def default_config(env_kind: str, **overrides) -> EpisodeConfig:
    """Per-environment defaults pinned to the experiment setup."""
    if env_kind == "ring":
        cfg = EpisodeConfig(
            env_kind="ring",
            horizon=3000,
            warmup=3000,
            action=ActionSpec("acceleration", -1.0, 1.0),
            obs=OBSERVATION_DEFAULTS["ring"],
            action_slots=1,
            network={"circumference": [220.0, 270.0]},
            population=PopulationSpec(total=22, rv_count=1),
        )
    elif env_kind == "figure_eight":
        cfg = EpisodeConfig(
            env_kind="figure_eight",
            horizon=1500,
            warmup=0,
            action=ActionSpec("acceleration", -3.0, 3.0),
            obs=OBSERVATION_DEFAULTS["figure_eight"],
            action_slots=1,
            network={"inner_radius": [20.0, 30.0]},
            population=PopulationSpec(total=14, rv_count=1),
            tuning=Tuning(zone_caution_speed=None),
        )
    elif env_kind == "intersection":
        # major flow per approach; the minor 500 veh/hr is read as the
        # east/west street total, so each minor approach gets half
        cfg = EpisodeConfig(
            env_kind="intersection",
            horizon=400,
            warmup=600,
            action=ActionSpec("acceleration", -7.0, 7.0),
            obs=OBSERVATION_DEFAULTS["intersection"],
            action_slots=8,
            network={},
            inflows=(
                InflowSpec("northbound", 1333.0, rv_penetration=0.2),
                InflowSpec("southbound", 1333.0, rv_penetration=0.2),
                InflowSpec("eastbound", 250.0),
                InflowSpec("westbound", 250.0),
            ),
            tuning=Tuning(zone_caution_speed=2.5),
        )
    elif env_kind == "merge":
        cfg = EpisodeConfig(
            env_kind="merge",
            horizon=750,
            warmup=0,
            action=ActionSpec("acceleration", -1.5, 1.5),
            obs=OBSERVATION_DEFAULTS["merge"],
            action_slots=5,
            network={},
            inflows=(
                InflowSpec("highway", 1100.0, rv_penetration=0.1),
                InflowSpec("ramp_1", 200.0),
                InflowSpec("ramp_2", 200.0),
            ),
        )
    elif env_kind == "bottleneck":
        cfg = EpisodeConfig(
            env_kind="bottleneck",
            horizon=1000,
            warmup=40,
            action=ActionSpec("velocity", 0.01, 23.0),
            obs=OBSERVATION_DEFAULTS["bottleneck"],
            action_slots=15,
            network={"scale": 1},
            inflows=(
                InflowSpec(
                    "main", 2300.0, rv_penetration=0.1, class_mix=BOTTLENECK_CLASS_MIX
                ),
            ),
        )
    else:
        raise ConfigurationError(f"unknown environment kind {env_kind!r}")
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def merge_inflow_config(main: float, ramp: float, **overrides) -> EpisodeConfig:
    """Merge config for one highway/on-ramp inflow combination; each ramp
    receives the stated ramp rate."""
    return default_config(
        "merge",
        inflows=(
            InflowSpec("highway", float(main), rv_penetration=0.1),
            InflowSpec("ramp_1", float(ramp)),
            InflowSpec("ramp_2", float(ramp)),
        ),
        **overrides,
    )


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


class Recorder:
    """Accumulates per-step scalars and (optionally) full vehicle states."""

    def __init__(self, record_states: bool):
        self.record_states = record_states
        self.time = []
        self.phase = []
        self.reward = []
        self.done = []
        self.mean_v = []
        self.min_v = []
        self.argmin_s = []
        self.n_veh = []
        self.actions = []
        self.slots = []
        self.counts = []
        self.vid = []
        self.cls = []
        self.role = []
        self.route = []
        self.epos = []
        self.lane = []
        self.arc = []
        self.v = []
        self.accel = []

    def add(self, world: World, phase: int, actions: np.ndarray, reward: float,
            done: bool, slots: list[int | None]) -> None:
        self.time.append(world.sim_time)
        self.phase.append(phase)
        self.reward.append(reward)
        self.done.append(done)
        n = world.n
        self.n_veh.append(n)
        if n:
            self.mean_v.append(float(np.mean(world.v)))
            k = int(np.argmin(world.v))
            self.min_v.append(float(world.v[k]))
            self.argmin_s.append(float(world.s_global()[k]))
        else:
            self.mean_v.append(0.0)
            self.min_v.append(float("nan"))
            self.argmin_s.append(float("nan"))
        self.actions.append(np.asarray(actions, dtype=float))
        self.slots.append([-1 if s is None else s for s in slots])
        if self.record_states:
            self.counts.append(n)
            self.vid.append(world.vid.copy())
            self.cls.append(world.cls.copy())
            self.role.append(world.role.copy())
            self.route.append(world.route.copy())
            self.epos.append(world.epos.copy())
            self.lane.append(world.lane.copy())
            self.arc.append(world.arc.copy())
            self.v.append(world.v.copy())
            self.accel.append(world.accel.copy())

    def arrays(self) -> dict:
        out = {
            "time": np.array(self.time),
            "phase": np.array(self.phase, dtype=np.int8),
            "reward": np.array(self.reward),
            "done": np.array(self.done, dtype=bool),
            "mean_v": np.array(self.mean_v),
            "min_v": np.array(self.min_v),
            "argmin_s": np.array(self.argmin_s),
            "n_veh": np.array(self.n_veh, dtype=np.int64),
            "actions": np.array(self.actions) if self.actions else np.zeros((0, 0)),
            "slots": np.array(self.slots, dtype=np.int64) if self.slots else np.zeros((0, 0), dtype=np.int64),
        }
        if self.record_states:
            counts = np.array(self.counts, dtype=np.int64)
            out["offsets"] = np.concatenate([[0], np.cumsum(counts)])
            for name in ("vid", "cls", "role", "route", "epos", "lane"):
                vals = getattr(self, name)
                out[name] = (
                    np.concatenate(vals) if vals else np.zeros(0, dtype=np.int64)
                )
            for name in ("arc", "v", "accel"):
                vals = getattr(self, name)
                out[name] = np.concatenate(vals) if vals else np.zeros(0)
        return out


class Episode:
    """Single-episode environment with gym-style reset/step."""

    def __init__(self, config: EpisodeConfig, record_states: bool = True):
        config.validate()
        self.config = config
        self.record_states = record_states
        self.world: World | None = None
        self.rng = None
        self.schedule = WarmupSchedule(config.warmup)
        self._slots: list[int | None] = []
        self._unslotted: list[int] = []
        self._demand: DemandState | None = None
        self._control_steps = 0
        self._recorder: Recorder | None = None
        self._sampled_network: dict = {}

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> np.ndarray:
        cfg = self.config
        self.rng = np.random.default_rng(cfg.seed)
        params = {}
        for key, val in cfg.network.items():
            if isinstance(val, (list, tuple)) and len(val) == 2:
                params[key] = float(self.rng.uniform(float(val[0]), float(val[1])))
            else:
                params[key] = val
        self._sampled_network = params
        net = build_network(cfg.env_kind, **params)
        self.world = World(net, idm=cfg.idm, dt=cfg.dt, tuning=cfg.tuning)
        self._slots = [None] * cfg.action_slots
        self._unslotted = []
        self._demand = None
        self._control_steps = 0
        self._recorder = Recorder(self.record_states)

        if cfg.population is not None:
            vids = init_closed_population(self.world, cfg.population, self.rng)
            for vid in vids[: cfg.population.rv_count]:
                self._claim_slot(vid)
        else:
            self._demand = DemandState(list(cfg.inflows))

        for _ in range(cfg.warmup):
            self._advance(None)
        return self._observation()

    def step(self, actions) -> StepResult:
        cfg = self.config
        actions = np.asarray(actions, dtype=float).reshape(-1)
        if actions.shape[0] != cfg.action_slots:
            raise LayoutError(
                f"expected {cfg.action_slots} actions, got {actions.shape[0]}"
            )
        for k, vid in enumerate(self._slots):
            if vid is not None and not math.isfinite(actions[k]):
                raise ValueError(f"non-finite action {actions[k]!r} in slot {k}")
        self._advance(actions)
        self._control_steps += 1
        reward = self._reward()
        done = self._control_steps >= cfg.horizon or self.world.collision
        obs = self._observation()
        info = self._info()
        if self._recorder is not None:
            self._recorder.add(self.world, 1, actions, reward, done, self._slots)
        return StepResult(obs, reward, done, info)

    # -- internals -----------------------------------------------------------

    def _claim_slot(self, vid: int) -> None:
        if None in self._slots:
            self._slots[self._slots.index(None)] = vid
        else:
            self._unslotted.append(vid)

    def _refresh_slots(self) -> None:
        alive = set(int(v) for v in self.world.vid)
        self._slots = [vid if (vid is None or vid in alive) else None for vid in self._slots]
        self._unslotted = [vid for vid in self._unslotted if vid in alive]
        while None in self._slots and self._unslotted:
            self._slots[self._slots.index(None)] = self._unslotted.pop(0)

    def _advance(self, actions: np.ndarray | None) -> None:
        cfg = self.config
        world = self.world
        ctx = world.control_context()
        n = world.n
        if n:
            ge = world.gedge()
            v0_eff = np.minimum(cfg.idm.v0, world._edge_limit[ge])
            p = cfg.idm
            idm_lead = kernels.idm_accel(
                world.v, ctx.gap, ctx.lead_v, v0_eff, p.T, p.a_max, p.b_comf, p.s0, p.delta
            )
            idm_wall = kernels.idm_accel(
                world.v, ctx.wall_gap, np.zeros(n), v0_eff, p.T, p.a_max, p.b_comf, p.s0, p.delta
            )
            cmd = np.minimum(idm_lead, idm_wall)
            if p.noise_bound > 0.0:
                cmd = cmd + self.rng.uniform(-p.noise_bound, p.noise_bound, size=n)
            if actions is not None and not cfg.rv_as_hv:
                for k, vid in enumerate(self._slots):
                    if vid is None:
                        continue
                    idx = np.where(world.vid == vid)[0]
                    if len(idx):
                        i = int(idx[0])
                        cmd[i] = apply_rv_action(world.v[i], float(actions[k]), cfg.action, cfg.dt)
            world.step_dynamics(cmd, ctx)
        else:
            world.step_dynamics(np.zeros(0), ctx)
        if self._demand is not None:
            for vid in self._demand.step(world, self.rng):
                i = int(np.where(world.vid == vid)[0][0])
                if world.role[i] == ROLE_RV:
                    self._claim_slot(vid)
        self._refresh_slots()
        if actions is None and self._recorder is not None:
            self._recorder.add(
                world, 0, np.zeros(cfg.action_slots), 0.0, False, self._slots
            )

    def _rv_indices(self) -> list[int]:
        out = []
        for vid in self._slots:
            if vid is None:
                continue
            idx = np.where(self.world.vid == vid)[0]
            if len(idx):
                out.append(int(idx[0]))
        return out

    def _reward(self) -> float:
        cfg = self.config
        world = self.world
        kind = cfg.env_kind
        p = cfg.reward
        if kind == "ring":
            rvs = self._rv_indices()
            a_rv = float(world.accel[rvs[0]]) if rvs else 0.0
            n_exp = cfg.population.total if cfg.population else world.n
            return reward_ring(world.v, a_rv, p, n_expected=n_exp)
        if kind == "figure_eight":
            return reward_desired_velocity(world.v, p.fig8_v_des)
        if kind == "intersection":
            t = self._control_steps * cfg.dt
            ge = world.gedge()
            v_max = world._edge_limit[ge]
            ss_n = int(np.sum(world.v < p.standstill_v))
            return reward_intersection(t, world.v, v_max, ss_n, p)
        if kind == "merge":
            ctx = world.control_context()
            headways = []
            for i in self._rv_indices():
                if np.isfinite(ctx.gap[i]):
                    headways.append(headway(float(ctx.gap[i]), float(world.v[i])))
            return reward_merge(world.v, headways, p)
        if kind == "bottleneck":
            times = [t for t, _ in world.exit_log]
            return reward_bottleneck(times, world.sim_time, p.bottleneck_window)
        raise ConfigurationError(f"no reward for {kind!r}")

    def _observation(self) -> np.ndarray:
        cfg = self.config
        world = self.world
        spec = cfg.obs
        if spec.mode == "image":
            if spec.center_rule == "junction":
                return junction_observation(world, spec)
            return stack_rv_observations(world, spec, self._slots)
        if spec.mode == "position_only":
            return position_only_ring(world)
        kind = cfg.env_kind
        if kind == "ring":
            return precise_ring(world)
        if kind == "figure_eight":
            return precise_figure_eight(world, expected=cfg.population.total)
        if kind == "intersection":
            return precise_intersection(world, spec)
        if kind == "merge":
            return precise_merge(world, self._slots)
        if kind == "bottleneck":
            times = np.array([t for t, _ in world.exit_log])
            from .metrics import metric_outflow

            out20 = metric_outflow(times, world.sim_time, 20.0) if len(times) else 0.0
            return precise_bottleneck(world, spec, out20)
        raise ConfigurationError(f"no observation for {kind!r}")

    def _info(self) -> dict:
        world = self.world
        info = {
            "mean_velocity": float(np.mean(world.v)) if world.n else 0.0,
            "min_velocity": float(np.min(world.v)) if world.n else 0.0,
            "n_vehicles": int(world.n),
            "collision": bool(world.collision),
            "time": world.sim_time,
        }
        if not world.net.closed:
            from .metrics import metric_outflow

            times = np.array([t for t, _ in world.exit_log])
            info["outflow"] = (
                metric_outflow(times, world.sim_time, 500.0) if len(times) else 0.0
            )
        return info

    @property
    def observation_shape(self) -> tuple:
        spec = self.config.obs
        if spec.mode == "image":
            return spec.image_shape
        probe_lengths = {
            ("ring", "precise"): 3,
            ("ring", "position_only"): 1,
            ("figure_eight", "precise"): 2 * (self.config.population.total if self.config.population else 14),
            ("intersection", "precise"): 4 * spec.intersection_vehicles * 3 + 8,
            ("merge", "precise"): self.config.action_slots * 5,
            ("bottleneck", "precise"): spec.bottleneck_segments * 4 + 1,
        }
        return (probe_lengths[(self.config.env_kind, spec.mode)],)


def reset(config: EpisodeConfig) -> tuple[World, np.ndarray]:
    """Build, warm up, and return (world, first observation)."""
    ep = Episode(config)
    obs = ep.reset()
    return ep.world, obs


def warmup_control(config: EpisodeConfig) -> WarmupSchedule:
    """Control-ownership schedule: RVs drive as HVs during warmup."""
    return WarmupSchedule(config.warmup)
