"""Deterministic microscopic mixed-traffic simulator and RL toolkit."""

__version__ = "0.1.0"

from .env import Episode, EpisodeConfig, StepResult, default_config, merge_inflow_config, reset
from .idm import ActionSpec, IdmParams
from .network import (
    RoadNetwork,
    build_bottleneck,
    build_figure_eight,
    build_intersection,
    build_merge,
    build_network,
    build_ring,
    lane_to_world,
)
from .observe import ObservationSpec, render_bev, stack_rv_observations
from .rewards import RewardParams
from .rollout import RolloutRecord, load_rollout, replay_rollout, run_density_sweep, run_episode, save_rollout
from .world import Tuning, VehicleState, World

__all__ = [
    "ActionSpec",
    "Episode",
    "EpisodeConfig",
    "IdmParams",
    "ObservationSpec",
    "RewardParams",
    "RoadNetwork",
    "RolloutRecord",
    "StepResult",
    "Tuning",
    "VehicleState",
    "World",
    "build_bottleneck",
    "build_figure_eight",
    "build_intersection",
    "build_merge",
    "build_network",
    "build_ring",
    "default_config",
    "lane_to_world",
    "load_rollout",
    "merge_inflow_config",
    "render_bev",
    "replay_rollout",
    "reset",
    "run_density_sweep",
    "run_episode",
    "save_rollout",
    "stack_rv_observations",
]
