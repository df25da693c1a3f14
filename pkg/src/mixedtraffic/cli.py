"""Command-line surface: baselines, policy rollouts, rendering, sweeps,
and the control-protocol server.

All emitted files are deterministic given (config, seed, version). CSV
schemas are versioned through their pinned header rows (see README).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .configio import BUILTIN_CONFIGS, config_from_dict, load_config
from .env import EpisodeConfig
from .idm import idm_acceleration
from .metrics import detect_wave, metric_avg_velocity, metric_outflow, metric_queue_length
from .network import ConfigurationError, build_network
from .observe import IMG_SIZE, render_bev, write_pgm
from .rollout import RolloutRecord, load_rollout, run_density_sweep, run_episode, save_rollout

SUMMARY_COLUMNS = [
    "seed", "env", "mean_velocity", "outflow_veh_hr", "queue_e", "queue_w",
    "wave_fired", "wave_time_s", "collision", "control_steps",
]
TIME_SPACE_COLUMNS = ["t_s", "vehicle_id", "s_m", "v_mps"]
SWEEP_COLUMNS = [
    "env", "parameter", "value", "density_veh_km", "n_seeds", "metric", "mean", "std",
]


def _parse_seeds(text: str) -> list[int]:
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(t) for t in text.split(",")]


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_config_arg(path: str) -> EpisodeConfig:
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise SystemExit(_fail(str(exc)))
    except ConfigurationError as exc:
        raise SystemExit(_fail(f"bad config {path}: {exc}"))


def _episode_summary(record: RolloutRecord) -> dict:
    arrays = record.arrays
    cfg = record.config
    row = {
        "seed": record.seed,
        "env": cfg.env_kind,
        "mean_velocity": metric_avg_velocity(arrays["mean_v"], arrays["phase"], arrays["n_veh"]),
        "outflow_veh_hr": "",
        "queue_e": "",
        "queue_w": "",
        "wave_fired": "",
        "wave_time_s": "",
        "collision": bool(arrays["collision"][0]),
        "control_steps": int(np.sum(arrays["phase"] == 1)),
    }
    if cfg.env_kind in ("merge", "bottleneck", "intersection"):
        row["outflow_veh_hr"] = metric_outflow(
            arrays["exit_time"], float(arrays["time"][-1]), 500.0
        )
    if cfg.env_kind == "intersection" and "offsets" in arrays:
        row["queue_e"], row["queue_w"] = _final_queues(record)
    if cfg.env_kind in ("ring", "figure_eight"):
        params = json.loads(bytes(arrays["network_params"]).decode())
        net = build_network(cfg.env_kind, **params)
        wave = detect_wave(
            arrays["time"], arrays["min_v"], arrays["argmin_s"], net.total_length
        )
        row["wave_fired"] = wave.fired
        row["wave_time_s"] = wave.first_time if wave.fired else ""
    return row


def _final_queues(record: RolloutRecord) -> tuple[int, int]:
    params = json.loads(bytes(record.arrays["network_params"]).decode())
    net = build_network(record.config.env_kind, **params)
    junction = net.junctions[0]
    last = len(record.arrays["time"]) - 1
    states = record.step_states(last)
    queues = {}
    for eid in ("e_in", "w_in"):
        e_idx = net.edge_index(eid)
        route_edges = {ri: r.edges for ri, r in enumerate(net.routes)}
        mask = np.array(
            [
                route_edges[int(r)][int(ep)] == eid
                for r, ep in zip(states["route"], states["epos"])
            ],
            dtype=bool,
        )
        stop_arc = net.edge(eid).length - junction.zone_radius
        queues[eid] = metric_queue_length(states["arc"][mask], states["v"][mask], stop_arc)
    return queues["e_in"], queues["w_in"]


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _write_time_space(path: Path, record: RolloutRecord) -> None:
    arrays = record.arrays
    if "offsets" not in arrays:
        return
    params = json.loads(bytes(arrays["network_params"]).decode())
    net = build_network(record.config.env_kind, **params)
    offsets_by_route = {
        ri: net.route_offsets(r.id) for ri, r in enumerate(net.routes)
    }
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIME_SPACE_COLUMNS)
        offs = arrays["offsets"]
        for k, t in enumerate(arrays["time"]):
            sl = slice(int(offs[k]), int(offs[k + 1]))
            s_pos = (
                np.array(
                    [
                        offsets_by_route[int(r)][int(ep)]
                        for r, ep in zip(arrays["route"][sl], arrays["epos"][sl])
                    ]
                )
                + arrays["arc"][sl]
            )
            for vid, s, v in zip(arrays["vid"][sl], s_pos, arrays["v"][sl]):
                writer.writerow([f"{t:.1f}", int(vid), f"{s:.6f}", f"{v:.6f}"])


def _aggregate(rows: list[dict], key: str) -> tuple[float, float]:
    vals = np.array([float(r[key]) for r in rows if r[key] != ""])
    if len(vals) == 0:
        return float("nan"), float("nan")
    return float(np.mean(vals)), float(np.std(vals))


def cmd_run(args, rv_as_hv: bool) -> int:
    cfg = _load_config_arg(args.config)
    if args.obs_mode:
        cfg = replace(cfg, obs=replace(cfg.obs, mode=args.obs_mode.replace("-", "_")))
    cfg = replace(cfg, rv_as_hv=rv_as_hv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = None
    if not rv_as_hv and args.policy == "idm":
        if cfg.env_kind != "ring" or cfg.obs.mode != "precise":
            return _fail("the idm policy needs the ring environment in precise mode")

        def policy(obs):
            a = idm_acceleration(obs[0], obs[2], obs[0] + obs[1], cfg.idm)
            return np.array([min(max(a, cfg.action.lower), cfg.action.upper)])

    elif not rv_as_hv and args.policy == "script":
        if not args.actions_file:
            return _fail("--policy script needs --actions-file")
        seq = np.load(args.actions_file)
        if isinstance(seq, np.lib.npyio.NpzFile):
            seq = seq["actions"]
        counter = {"k": 0}

        def policy(obs):
            k = min(counter["k"], len(seq) - 1)
            counter["k"] += 1
            return seq[k]

    rows = []
    for seed in _parse_seeds(args.seeds):
        record = run_episode(replace(cfg, seed=seed), policy=policy)
        save_rollout(record, out / f"rollout_seed{seed:04d}.npz")
        _write_time_space(out / f"time_space_seed{seed:04d}.csv", record)
        rows.append(_episode_summary(record))
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, rows)
    mean_v, std_v = _aggregate(rows, "mean_velocity")
    agg = {
        "n_seeds": len(rows),
        "mean_velocity": f"{mean_v:.4f} ± {std_v:.4f}",
    }
    if rows and rows[0]["outflow_veh_hr"] != "":
        mo, so = _aggregate(rows, "outflow_veh_hr")
        agg["outflow_veh_hr"] = f"{mo:.2f} ± {so:.2f}"
    with open(out / "summary_agg.json", "w") as fh:
        json.dump(agg, fh, indent=2, sort_keys=True)
    print(f"wrote {len(rows)} rollouts to {out}")
    for key, val in agg.items():
        print(f"  {key}: {val}")
    return 0


def cmd_render(args) -> int:
    path = Path(args.rollout)
    if not path.exists():
        return _fail(f"rollout file not found: {path}")
    record = load_rollout(path)
    if "offsets" not in record.arrays:
        return _fail(f"{path} was recorded without per-step states")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lo, hi = (int(t) for t in args.steps.split(":", 1))
    renderer = _RecordRenderer(record)
    count = 0
    for step in range(lo, min(hi, len(record.arrays["time"]))):
        for slot, img in renderer.frames(step):
            write_pgm(out / f"frame_{step:05d}_slot{slot:02d}.pgm", img)
            count += 1
    print(f"wrote {count} frames to {out}")
    return 0


class _RecordRenderer:
    """Re-renders observation frames from a recorded rollout."""

    def __init__(self, record: RolloutRecord):
        self.record = record
        params = json.loads(bytes(record.arrays["network_params"]).decode())
        self.net = build_network(record.config.env_kind, **params)

    def frames(self, step: int):
        from .observe import rv_center
        from .world import World

        cfg = self.record.config
        spec = cfg.obs
        states = self.record.step_states(step)
        world = World(self.net, idm=cfg.idm, dt=cfg.dt, tuning=cfg.tuning)
        order = np.argsort(states["vid"], kind="stable")
        for key in states:
            states[key] = states[key][order]
        world.vid = states["vid"].astype(np.int64)
        world.cls = states["cls"].astype(np.int64)
        world.role = states["role"].astype(np.int64)
        world.route = states["route"].astype(np.int64)
        world.epos = states["epos"].astype(np.int64)
        world.lane = states["lane"].astype(np.int64)
        world.arc = states["arc"].astype(float)
        world.v = states["v"].astype(float)
        world.accel = states["accel"].astype(float)
        from .world import CLASS_LENGTH

        world.length = CLASS_LENGTH[world.cls]
        world.spawn_step = np.zeros(world.n, dtype=np.int64)
        slots = [int(s) for s in self.record.arrays["slots"][step]]
        slot_vids = [None if s < 0 else s for s in slots]
        if spec.center_rule == "junction":
            from .observe import junction_observation

            yield 0, junction_observation(world, spec)[0]
            return
        slotted = {v for v in slot_vids if v is not None}
        for k, vid in enumerate(slot_vids):
            if vid is None or not np.any(world.vid == vid):
                yield k, np.zeros((IMG_SIZE, IMG_SIZE), dtype=np.uint8)
            else:
                yield k, render_bev(world, rv_center(world, vid), spec, slotted_rvs=slotted)


def cmd_sweep(args) -> int:
    import yaml

    path = Path(args.config)
    if not path.exists():
        return _fail(f"sweep config not found: {path}")
    with open(path) as fh:
        spec = yaml.safe_load(fh)
    for key in ("base", "parameter", "values"):
        if key not in spec:
            return _fail(f"sweep config missing {key!r}")
    try:
        if isinstance(spec["base"], str):
            base = load_config(spec["base"])
        else:
            base = config_from_dict(spec["base"])
    except (FileNotFoundError, ConfigurationError) as exc:
        return _fail(str(exc))
    base = replace(base, rv_as_hv=bool(spec.get("rv_as_hv", True)))
    rows = run_density_sweep(
        base,
        spec["parameter"],
        spec["values"],
        n_seeds=int(spec.get("n_seeds", 10)),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    print(f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}")
    return 0


def cmd_serve(args) -> int:
    from . import protocol

    if args.transport == "stdio":
        protocol.serve_stdio()
        return 0
    protocol.serve_tcp(
        host=args.host,
        port=args.port,
        max_connections=args.max_connections,
        ready_callback=lambda port: print(f"listening on {args.host}:{port}", flush=True),
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedtraffic",
        description="Deterministic mixed-traffic simulator and RL environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help=f"config path or builtin name {BUILTIN_CONFIGS}")
    common.add_argument("--seeds", default="0:10", help="'a:b' range or comma list")
    common.add_argument("--out", required=True)
    common.add_argument("--obs-mode", choices=["image", "precise", "position-only"],
                        default=None)

    sub.add_parser("run-baseline", parents=[common],
                   help="all-human rollouts with metrics and time-space CSVs")
    rp = sub.add_parser("run-policy", parents=[common],
                        help="rollouts under a built-in or scripted policy")
    rp.add_argument("--policy", choices=["zero", "idm", "script"], default="zero")
    rp.add_argument("--actions-file", default=None,
                    help="npy/npz of per-step action vectors for --policy script")

    rd = sub.add_parser("render", help="export PGM observation frames from a rollout")
    rd.add_argument("--rollout", required=True)
    rd.add_argument("--steps", default="0:1", help="half-open step range 'a:b'")
    rd.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="multi-seed parameter sweep to CSV")
    sw.add_argument("--config", required=True, help="sweep YAML: base, parameter, values")
    sw.add_argument("--out", required=True)

    sv = sub.add_parser("serve", help="serve the framed control protocol")
    sv.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=0)
    sv.add_argument("--max-connections", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-baseline":
            return cmd_run(args, rv_as_hv=True)
        if args.command == "run-policy":
            args.policy = getattr(args, "policy", "zero")
            return cmd_run(args, rv_as_hv=False)
        if args.command == "render":
            return cmd_render(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "serve":
            return cmd_serve(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
