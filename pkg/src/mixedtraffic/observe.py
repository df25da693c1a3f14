"""Policy observations: masked grayscale bird's-eye views and precise vectors.

Images are world-axis-aligned (never rotated with the vehicle heading),
84x84, one byte per pixel, with a four-level palette. A pixel takes a
vehicle's intensity when its center lies inside the vehicle rectangle;
robot vehicles overdraw human-driven ones. All builders are pure functions
of a frozen world snapshot.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .network import RoadNetwork, lane_offset_point
from .world import CLASS_WIDTH, ROLE_RV, World

IMG_SIZE = 84

BG = 0
ROAD = 85
HV = 170
RV = 255

_ROAD_SAMPLE_SPACING = 1.0  # m between polyline vertices fed to the rasterizer


class LayoutError(ValueError):
    """Raised when an observation's fixed layout cannot be satisfied."""


@dataclass(frozen=True)
class ObservationSpec:
    mode: str  # image | precise | position_only
    view_side: float  # m covered by the 84 px image side
    mask_radius: float | None  # None renders the full square
    stack: int
    center_rule: str = "rv"  # rv | junction
    intersection_vehicles: int = 6  # per-approach count in the precise vector
    bottleneck_segments: int = 3

    @property
    def meters_per_pixel(self) -> float:
        return self.view_side / IMG_SIZE

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.stack, IMG_SIZE, IMG_SIZE)


OBSERVATION_DEFAULTS = {
    "ring": ObservationSpec("image", 57.5, 28.75, 1),
    "figure_eight": ObservationSpec("image", 42.5, 21.25, 1),
    "intersection": ObservationSpec("image", 50.0, None, 1, center_rule="junction"),
    "merge": ObservationSpec("image", 41.25, None, 5),
    "bottleneck": ObservationSpec("image", 50.0, 25.0, 15),
}


def _lane_polyline(net: RoadNetwork, edge_idx: int, lane: int) -> tuple[np.ndarray, np.ndarray]:
    """Sampled lane centerline, cached on the network edge tuple."""
    cache = getattr(net, "_lane_polyline_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(net, "_lane_polyline_cache", cache)
    key = (edge_idx, lane)
    if key not in cache:
        edge = net.edges[edge_idx]
        pts = edge.geometry.sample(_ROAD_SAMPLE_SPACING)
        if lane:
            # offset each vertex along the local right normal
            ss = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
            xs = np.empty(len(pts))
            ys = np.empty(len(pts))
            for k, s in enumerate(ss):
                xs[k], ys[k], _ = lane_offset_point(edge, lane, min(s, edge.length))
            cache[key] = (xs, ys)
        else:
            cache[key] = (np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]))
    return cache[key]


def render_bev(
    world: World, center: tuple[float, float], spec: ObservationSpec,
    slotted_rvs: set[int] | None = None,
) -> np.ndarray:
    """One 84x84 grayscale frame centered on a world point.

    ``slotted_rvs`` are the vehicle ids drawn at RV intensity; robot
    vehicles beyond the stack capacity render as HVs in every slice.
    """
    img = np.zeros((IMG_SIZE, IMG_SIZE), dtype=np.uint8)
    cx, cy = float(center[0]), float(center[1])
    mpp = spec.meters_per_pixel
    half_lane = 1.6
    view_reach = spec.view_side * 0.75
    for ei, edge in enumerate(world.net.edges):
        for lane in range(edge.lane_count):
            xs, ys = _lane_polyline(world.net, ei, lane)
            if (
                np.min(xs) > cx + view_reach
                or np.max(xs) < cx - view_reach
                or np.min(ys) > cy + view_reach
                or np.max(ys) < cy - view_reach
            ):
                continue
            kernels.draw_polyline(img, xs, ys, half_lane, ROAD, cx, cy, mpp)

    if slotted_rvs is None:
        slotted_rvs = {int(v) for v in world.vid[world.role == ROLE_RV]}
    ge = world.gedge()
    rv_pass = []
    for i in range(world.n):
        value = RV if int(world.vid[i]) in slotted_rvs else HV
        if value == RV:
            rv_pass.append(i)
            continue
        _draw_vehicle(world, img, i, ge, HV, cx, cy, mpp)
    for i in rv_pass:
        _draw_vehicle(world, img, i, ge, RV, cx, cy, mpp)

    if spec.mask_radius is not None:
        kernels.apply_circle_mask(img, spec.mask_radius, mpp, BG)
    return img


def _draw_vehicle(world, img, i, ge, value, cx, cy, mpp):
    edge = world.net.edges[ge[i]]
    fx, fy, heading = lane_offset_point(edge, int(world.lane[i]), float(world.arc[i]))
    half_len = world.length[i] / 2.0
    ux, uy = math.cos(heading), math.sin(heading)
    rcx = fx - ux * half_len
    rcy = fy - uy * half_len
    half_wid = CLASS_WIDTH[world.cls[i]] / 2.0
    kernels.draw_rect(img, rcx, rcy, ux, uy, half_len, half_wid, value, cx, cy, mpp)


def rv_center(world: World, vid: int) -> tuple[float, float]:
    i = int(np.where(world.vid == vid)[0][0])
    ge = world.gedge()
    edge = world.net.edges[ge[i]]
    x, y, h = lane_offset_point(edge, int(world.lane[i]), float(world.arc[i]))
    half_len = world.length[i] / 2.0
    return (x - math.cos(h) * half_len, y - math.sin(h) * half_len)


def stack_rv_observations(
    world: World, spec: ObservationSpec, slots: list[int | None]
) -> np.ndarray:
    """Per-RV image stack; empty slots are uniform background ("black")."""
    out = np.zeros(spec.image_shape, dtype=np.uint8)
    slotted = {vid for vid in slots if vid is not None}
    for k, vid in enumerate(slots[: spec.stack]):
        if vid is None:
            continue
        out[k] = render_bev(world, rv_center(world, vid), spec, slotted_rvs=slotted)
    return out


def junction_observation(world: World, spec: ObservationSpec) -> np.ndarray:
    center = world.net.junctions[0].center
    slotted = {int(v) for v in world.vid[world.role == ROLE_RV]}
    img = render_bev(world, center, spec, slotted_rvs=slotted)
    return img[None, :, :]


# ---------------------------------------------------------------------------
# precise observation vectors


def precise_ring(world: World) -> np.ndarray:
    """[v_RV, v_lead - v_RV, bumper gap to leader], wrap-aware."""
    rvs = np.where(world.role == ROLE_RV)[0]
    if len(rvs) != 1:
        raise LayoutError(f"ring precise observation expects exactly 1 RV, got {len(rvs)}")
    i = int(rvs[0])
    ctx = world.control_context()
    return np.array([world.v[i], ctx.lead_v[i] - world.v[i], ctx.gap[i]])


def position_only_ring(world: World) -> np.ndarray:
    """[bumper gap to leader] only."""
    return precise_ring(world)[2:3]


def precise_figure_eight(world: World, expected: int = 14) -> np.ndarray:
    """(route position, velocity) of every vehicle in fixed id order."""
    if world.n != expected:
        raise LayoutError(f"figure-eight layout expects {expected} vehicles, got {world.n}")
    order = np.argsort(world.vid)
    s = world.s_global()[order]
    v = world.v[order]
    return np.column_stack([s, v]).reshape(-1)


def precise_intersection(world: World, spec: ObservationSpec) -> np.ndarray:
    """Per approach, the m vehicles nearest the junction: [v, distance,
    approach index]; then per approach edge: [density veh/m, mean velocity].
    Absent slots are zero."""
    m = spec.intersection_vehicles
    junction = world.net.junctions[0]
    approaches = list(junction.incoming)
    ge = world.gedge()
    out = np.zeros(len(approaches) * m * 3 + len(approaches) * 2)
    edge_stats = []
    for a_idx, eid in enumerate(approaches):
        e_idx = world.net.edge_index(eid)
        e_len = world.net.edges[e_idx].length
        mask = ge == e_idx
        dist = e_len - world.arc[mask]
        vs = world.v[mask]
        order = np.argsort(dist, kind="stable")[:m]
        base = a_idx * m * 3
        for k, j in enumerate(order):
            out[base + 3 * k] = vs[j]
            out[base + 3 * k + 1] = dist[j]
            out[base + 3 * k + 2] = a_idx
        edge_stats.append(
            (np.sum(mask) / e_len, float(np.mean(vs)) if len(vs) else 0.0)
        )
    base = len(approaches) * m * 3
    for a_idx, (dens, meanv) in enumerate(edge_stats):
        out[base + 2 * a_idx] = dens
        out[base + 2 * a_idx + 1] = meanv
    return out


MISSING_NEIGHBOR_GAP = 1000.0


def precise_merge(world: World, slots: list[int | None]) -> np.ndarray:
    """Per RV slot: [v_lead, v_follow, gap_lead, gap_follow, v_RV].

    Neighbors are resolved along the highway corridor, so ramp vehicles are
    observed only once merged. Missing neighbors encode as v=0, gap=1000.
    """
    ctx = world.control_context()
    out = np.zeros(len(slots) * 5)
    vid_to_idx = {int(v): k for k, v in enumerate(world.vid)}
    followers: dict[int, int] = {}
    for k in range(world.n):
        li = int(ctx.lead_idx[k])
        if li >= 0:
            followers.setdefault(li, k)
    for slot, vid in enumerate(slots):
        base = slot * 5
        if vid is None or vid not in vid_to_idx:
            continue
        i = vid_to_idx[vid]
        v_lead, gap_lead = 0.0, MISSING_NEIGHBOR_GAP
        if np.isfinite(ctx.gap[i]):
            v_lead, gap_lead = float(ctx.lead_v[i]), float(ctx.gap[i])
        v_fol, gap_fol = 0.0, MISSING_NEIGHBOR_GAP
        j = followers.get(i)
        if j is not None and np.isfinite(ctx.gap[j]):
            v_fol, gap_fol = float(world.v[j]), float(ctx.gap[j])
        out[base : base + 5] = [v_lead, v_fol, gap_lead, gap_fol, float(world.v[i])]
    return out


def precise_bottleneck(world: World, spec: ObservationSpec, outflow_veh_hr: float) -> np.ndarray:
    """Per segment: mean HV position/velocity and mean RV position/velocity,
    then the trailing 20 s outflow in veh/hr."""
    s = world.s_global()
    edges = world.net.routes[0].edges
    offs = world.net.route_offsets(world.net.routes[0].id)
    n_seg = min(spec.bottleneck_segments, len(edges))
    out = np.zeros(n_seg * 4 + 1)
    for k in range(n_seg):
        lo, hi = offs[k], offs[k + 1]
        in_seg = (s >= lo) & (s < hi)
        for role, col in ((0, 0), (1, 2)):
            mask = in_seg & (world.role == role)
            if np.any(mask):
                out[k * 4 + col] = float(np.mean(s[mask]))
                out[k * 4 + col + 1] = float(np.mean(world.v[mask]))
    out[-1] = outflow_veh_hr
    return out


# ---------------------------------------------------------------------------
# export formats


def write_pgm(path, img: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    parts = data.split(b"\n", 3)
    w, h = (int(t) for t in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


STACK_MAGIC = b"BEVT"


def write_stack_tensor(path, stack: np.ndarray) -> None:
    """Raw tensor file: 16-byte header (magic, stack, height, width), then
    slot-major row-major uint8 pixels."""
    s, h, w = stack.shape
    with open(path, "wb") as fh:
        fh.write(STACK_MAGIC + struct.pack("<III", s, h, w))
        fh.write(stack.astype(np.uint8).tobytes())


def read_stack_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if header[:4] != STACK_MAGIC:
            raise ValueError(f"{path}: bad magic")
        s, h, w = struct.unpack("<III", header[4:])
        return np.frombuffer(fh.read(s * h * w), dtype=np.uint8).reshape(s, h, w)
