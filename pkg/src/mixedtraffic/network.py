"""Road networks for the five environments.

Networks are lane graphs with 1D arc-length coordinates plus an exact 2D
embedding used by the rasterizer. Each builder is pure: the same parameters
always produce a structurally identical network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArcSeg, LineSeg, PathGeometry

LANE_WIDTH = 3.2  # m, rasterization and lane offsets only

DEFAULT_SPEED_LIMIT = 30.0  # m/s
INTERSECTION_SPEED_LIMIT = 10.0  # m/s, keeps the all-HV baseline in regime
MERGE_RAMP_SPEED_LIMIT = 15.0  # m/s


class ConfigurationError(ValueError):
    """Raised for out-of-range or inconsistent build parameters."""


class DomainError(ValueError):
    """Raised for out-of-range lane/arc queries against a built network."""


@dataclass(frozen=True)
class Edge:
    id: str
    length: float
    lane_count: int
    speed_limit: float
    geometry: PathGeometry

    def centerline(self, tol: float = 1e-7) -> np.ndarray:
        """2D polyline whose chord length matches ``length`` within tol."""
        return self.geometry.polyline(tol)


@dataclass(frozen=True)
class Movement:
    """One passage of a route through a junction's conflict zone."""

    route_id: str
    entry_edge: str
    s_cross: float  # global route arc position of the crossing center
    axis: int  # movements on different axes conflict


@dataclass(frozen=True)
class Junction:
    id: str
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    rule: str  # none | two_way_stop | merge_yield | lane_drop
    minor: tuple[str, ...] = ()
    ramp: tuple[str, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)
    zone_radius: float = 0.0
    movements: tuple[Movement, ...] = ()
    # lane_drop bookkeeping: upstream lane -> downstream lane (continuing),
    # and upstream dying lane -> upstream target lane to merge into
    upstream_edge: str = ""
    lane_continuation: dict = field(default_factory=dict)
    merge_target: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Route:
    id: str
    edges: tuple[str, ...]


@dataclass(frozen=True)
class RoadNetwork:
    kind: str
    params: dict
    edges: tuple[Edge, ...]
    junctions: tuple[Junction, ...]
    routes: tuple[Route, ...]
    closed: bool

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise DomainError(f"unknown edge {edge_id!r}")

    def edge_index(self, edge_id: str) -> int:
        for i, e in enumerate(self.edges):
            if e.id == edge_id:
                return i
        raise DomainError(f"unknown edge {edge_id!r}")

    def route(self, route_id: str) -> Route:
        for r in self.routes:
            if r.id == route_id:
                return r
        raise DomainError(f"unknown route {route_id!r}")

    def route_edge_lengths(self, route_id: str) -> list[float]:
        return [self.edge(eid).length for eid in self.route(route_id).edges]

    def route_offsets(self, route_id: str) -> list[float]:
        """Cumulative arc offset of each edge along the route."""
        offs = [0.0]
        for L in self.route_edge_lengths(route_id):
            offs.append(offs[-1] + L)
        return offs

    def route_length(self, route_id: str) -> float:
        return self.route_offsets(route_id)[-1]

    @property
    def total_length(self) -> float:
        """Length of the primary (first) route."""
        return self.route_length(self.routes[0].id)

    def junction_for_edge_end(self, edge_id: str) -> Junction | None:
        for j in self.junctions:
            if j.rule == "lane_drop" and j.upstream_edge == edge_id:
                return j
        return None


def lane_offset_point(edge: Edge, lane_index: int, arc_pos: float) -> tuple[float, float, float]:
    x, y, h = edge.geometry.point(arc_pos)
    if lane_index:
        # lanes stack to the right of the direction of travel
        off = lane_index * LANE_WIDTH
        x += off * math.sin(h)
        y -= off * math.cos(h)
    return x, y, h


def lane_to_world(
    net: RoadNetwork, edge_id: str, lane_index: int, arc_pos: float
) -> tuple[float, float, float]:
    """World position and heading of (edge, lane, arc)."""
    edge = net.edge(edge_id)
    if not 0 <= lane_index < edge.lane_count:
        raise DomainError(f"lane {lane_index} out of range on edge {edge_id!r}")
    if not -1e-9 <= arc_pos <= edge.length + 1e-9:
        raise DomainError(f"arc {arc_pos} outside [0, {edge.length}] on {edge_id!r}")
    return lane_offset_point(edge, lane_index, arc_pos)


def world_to_lane(net: RoadNetwork, edge_id: str, lane_index: int, x: float, y: float) -> float:
    """Arc position of the nearest centerline point; inverse of lane_to_world."""
    edge = net.edge(edge_id)
    if lane_index:
        # undo the lane offset approximately by projecting onto lane 0 first,
        # then correcting with the local heading; exact on lines and arcs
        s0, _ = edge.geometry.project(x, y)
        _, _, h = edge.geometry.point(s0)
        off = lane_index * LANE_WIDTH
        x -= off * math.sin(h)
        y += off * math.cos(h)
    s, _ = edge.geometry.project(x, y)
    return s


# ---------------------------------------------------------------------------
# builders


def build_ring(circumference: float, speed_limit: float = DEFAULT_SPEED_LIMIT) -> RoadNetwork:
    """Single-lane closed circular loop of exactly the given length."""
    if not 150.0 <= circumference <= 400.0:
        raise ConfigurationError(f"ring circumference {circumference} outside [150, 400] m")
    radius = circumference / (2.0 * math.pi)
    geom = PathGeometry([ArcSeg(0.0, 0.0, radius, -math.pi / 2.0, 2.0 * math.pi)])
    edge = Edge("ring", circumference, 1, speed_limit, geom)
    return RoadNetwork(
        kind="ring",
        params={"circumference": circumference, "speed_limit": speed_limit},
        edges=(edge,),
        junctions=(),
        routes=(Route("loop", ("ring",)),),
        closed=True,
    )


def build_figure_eight(
    inner_radius: float, speed_limit: float = DEFAULT_SPEED_LIMIT
) -> RoadNetwork:
    """Two three-quarter loops joined by straight crossing segments.

    Total length is pinned to 3*pi*r + 4*r: two 3/4 circles of radius r plus
    two straight crossing segments of length 2r that intersect at the origin.
    """
    if not 15.0 <= inner_radius <= 40.0:
        raise ConfigurationError(f"figure-eight radius {inner_radius} outside [15, 40] m")
    r = inner_radius
    cross_we = Edge(
        "cross_we", 2.0 * r, 1, speed_limit, PathGeometry([LineSeg(-r, 0.0, r, 0.0)])
    )
    loop_ne = Edge(
        "loop_ne",
        1.5 * math.pi * r,
        1,
        speed_limit,
        PathGeometry([ArcSeg(r, r, r, -math.pi / 2.0, 1.5 * math.pi)]),
    )
    cross_ns = Edge(
        "cross_ns", 2.0 * r, 1, speed_limit, PathGeometry([LineSeg(0.0, r, 0.0, -r)])
    )
    loop_sw = Edge(
        "loop_sw",
        1.5 * math.pi * r,
        1,
        speed_limit,
        PathGeometry([ArcSeg(-r, -r, r, 0.0, -1.5 * math.pi)]),
    )
    route = Route("loop", ("cross_we", "loop_ne", "cross_ns", "loop_sw"))
    # both straights yield at the crossing: first-come-first-served all-stop
    offs = [0.0, 2.0 * r, 2.0 * r + 1.5 * math.pi * r, 4.0 * r + 1.5 * math.pi * r]
    crossing = Junction(
        id="crossing",
        incoming=("cross_we", "cross_ns"),
        outgoing=("loop_ne", "loop_sw"),
        rule="two_way_stop",
        minor=("cross_we", "cross_ns"),
        center=(0.0, 0.0),
        zone_radius=6.0,
        movements=(
            Movement("loop", "cross_we", offs[0] + r, 0),
            Movement("loop", "cross_ns", offs[2] + r, 1),
        ),
    )
    return RoadNetwork(
        kind="figure_eight",
        params={"inner_radius": inner_radius, "speed_limit": speed_limit},
        edges=(cross_we, loop_ne, cross_ns, loop_sw),
        junctions=(crossing,),
        routes=(route,),
        closed=True,
    )


def figure_eight_length(inner_radius: float) -> float:
    return 3.0 * math.pi * inner_radius + 4.0 * inner_radius


def build_intersection(
    approach_length: float = 150.0,
    speed_limit: float = INTERSECTION_SPEED_LIMIT,
    zone_radius: float = 8.0,
) -> RoadNetwork:
    """Idealized two-way stop: four approaches, east/west minor."""
    L = approach_length
    half = LANE_WIDTH / 2.0

    def straight(eid, p0, p1):
        return Edge(eid, math.dist(p0, p1), 1, speed_limit, PathGeometry([LineSeg(*p0, *p1)]))

    # keep-right offsets: each direction of travel rides half a lane width
    # to the right of its road axis
    edges = (
        straight("n_in", (-half, L), (-half, 0.0)),  # southbound entry
        straight("s_out", (-half, 0.0), (-half, -L)),
        straight("s_in", (half, -L), (half, 0.0)),  # northbound entry
        straight("n_out", (half, 0.0), (half, L)),
        straight("w_in", (-L, -half), (0.0, -half)),  # eastbound entry
        straight("e_out", (0.0, -half), (L, -half)),
        straight("e_in", (L, half), (0.0, half)),  # westbound entry
        straight("w_out", (0.0, half), (-L, half)),
    )
    routes = (
        Route("southbound", ("n_in", "s_out")),
        Route("northbound", ("s_in", "n_out")),
        Route("eastbound", ("w_in", "e_out")),
        Route("westbound", ("e_in", "w_out")),
    )
    junction = Junction(
        id="center",
        incoming=("n_in", "s_in", "w_in", "e_in"),
        outgoing=("s_out", "n_out", "e_out", "w_out"),
        rule="two_way_stop",
        minor=("e_in", "w_in"),
        center=(0.0, 0.0),
        zone_radius=zone_radius,
        movements=(
            Movement("southbound", "n_in", L, 0),
            Movement("northbound", "s_in", L, 0),
            Movement("eastbound", "w_in", L, 1),
            Movement("westbound", "e_in", L, 1),
        ),
    )
    return RoadNetwork(
        kind="intersection",
        params={
            "approach_length": approach_length,
            "speed_limit": speed_limit,
            "zone_radius": zone_radius,
        },
        edges=edges,
        junctions=(junction,),
        routes=routes,
        closed=False,
    )


def build_merge(
    highway_length: float = 700.0,
    ramp_length: float = 100.0,
    ramp_positions: tuple[float, float] = (1.0 / 3.0, 2.0 / 3.0),
    speed_limit: float = DEFAULT_SPEED_LIMIT,
    ramp_speed_limit: float = MERGE_RAMP_SPEED_LIMIT,
) -> RoadNetwork:
    """Single-lane highway with two right-side on-ramps that must yield."""
    x1 = highway_length * ramp_positions[0]
    x2 = highway_length * ramp_positions[1]
    ramp_angle = math.radians(25.0)

    def hw(eid, xa, xb):
        return Edge(
            eid, xb - xa, 1, speed_limit, PathGeometry([LineSeg(xa, 0.0, xb, 0.0)])
        )

    def ramp(eid, x_end):
        x0 = x_end - ramp_length * math.cos(ramp_angle)
        y0 = -ramp_length * math.sin(ramp_angle)
        return Edge(
            eid, ramp_length, 1, ramp_speed_limit,
            PathGeometry([LineSeg(x0, y0, x_end, 0.0)]),
        )

    edges = (
        hw("hw0", 0.0, x1),
        hw("hw1", x1, x2),
        hw("hw2", x2, highway_length),
        ramp("ramp1", x1),
        ramp("ramp2", x2),
    )
    routes = (
        Route("highway", ("hw0", "hw1", "hw2")),
        Route("ramp_1", ("ramp1", "hw1", "hw2")),
        Route("ramp_2", ("ramp2", "hw2")),
    )
    junctions = (
        Junction(
            id="merge_1",
            incoming=("hw0", "ramp1"),
            outgoing=("hw1",),
            rule="merge_yield",
            ramp=("ramp1",),
            center=(x1, 0.0),
        ),
        Junction(
            id="merge_2",
            incoming=("hw1", "ramp2"),
            outgoing=("hw2",),
            rule="merge_yield",
            ramp=("ramp2",),
            center=(x2, 0.0),
        ),
    )
    return RoadNetwork(
        kind="merge",
        params={
            "highway_length": highway_length,
            "ramp_length": ramp_length,
            "ramp_positions": list(ramp_positions),
            "speed_limit": speed_limit,
            "ramp_speed_limit": ramp_speed_limit,
        },
        edges=edges,
        junctions=junctions,
        routes=routes,
        closed=False,
    )


def build_bottleneck(
    scale: int = 1,
    segment_lengths: tuple[float, float, float] = (200.0, 100.0, 100.0),
    speed_limit: float = DEFAULT_SPEED_LIMIT,
) -> RoadNetwork:
    """Lane-drop corridor: 4*scale -> 2*scale -> scale lanes."""
    if int(scale) != scale or scale < 1:
        raise ConfigurationError(f"bottleneck scale must be a positive integer, got {scale}")
    scale = int(scale)
    counts = (4 * scale, 2 * scale, scale)
    xs = [0.0]
    for L in segment_lengths:
        xs.append(xs[-1] + L)

    edges = []
    for i, (n_lanes, L) in enumerate(zip(counts, segment_lengths)):
        # center each lane group on the corridor axis (lanes stack rightward)
        y_c = (n_lanes - 1) * LANE_WIDTH / 2.0
        edges.append(
            Edge(
                f"seg{i}", L, n_lanes, speed_limit,
                PathGeometry([LineSeg(xs[i], y_c, xs[i + 1], y_c)]),
            )
        )

    def drop(jid, up, down, n_up, n_down, x):
        keep_lo = (n_up - n_down) // 2
        continuation = {keep_lo + k: k for k in range(n_down)}
        target = {}
        for lane in range(n_up):
            if lane not in continuation:
                target[lane] = keep_lo if lane < keep_lo else keep_lo + n_down - 1
        return Junction(
            id=jid,
            incoming=(up,),
            outgoing=(down,),
            rule="lane_drop",
            center=(x, 0.0),
            upstream_edge=up,
            lane_continuation=continuation,
            merge_target=target,
        )

    junctions = (
        drop("drop_1", "seg0", "seg1", counts[0], counts[1], xs[1]),
        drop("drop_2", "seg1", "seg2", counts[1], counts[2], xs[2]),
    )
    return RoadNetwork(
        kind="bottleneck",
        params={
            "scale": scale,
            "segment_lengths": list(segment_lengths),
            "speed_limit": speed_limit,
        },
        edges=tuple(edges),
        junctions=junctions,
        routes=(Route("main", ("seg0", "seg1", "seg2")),),
        closed=False,
    )


BUILDERS = {
    "ring": build_ring,
    "figure_eight": build_figure_eight,
    "intersection": build_intersection,
    "merge": build_merge,
    "bottleneck": build_bottleneck,
}


def build_network(kind: str, **params) -> RoadNetwork:
    if kind not in BUILDERS:
        raise ConfigurationError(f"unknown environment kind {kind!r}")
    return BUILDERS[kind](**params)


# ---------------------------------------------------------------------------
# serialization (human-readable structured description)


def network_to_dict(net: RoadNetwork) -> dict:
    def r6(v):
        return round(float(v), 6)

    return {
        "schema": 1,
        "kind": net.kind,
        "params": net.params,
        "closed": net.closed,
        "edges": [
            {
                "id": e.id,
                "length": r6(e.length),
                "lane_count": e.lane_count,
                "speed_limit": r6(e.speed_limit),
                "start": [r6(v) for v in e.geometry.point(0.0)[:2]],
                "end": [r6(v) for v in e.geometry.point(e.length)[:2]],
            }
            for e in net.edges
        ],
        "junctions": [
            {
                "id": j.id,
                "rule": j.rule,
                "incoming": list(j.incoming),
                "outgoing": list(j.outgoing),
                "minor": list(j.minor),
                "ramp": list(j.ramp),
                "center": [r6(j.center[0]), r6(j.center[1])],
            }
            for j in net.junctions
        ],
        "routes": [{"id": r.id, "edges": list(r.edges)} for r in net.routes],
    }


def save_network(net: RoadNetwork, path) -> None:
    import yaml

    with open(path, "w") as fh:
        yaml.safe_dump(network_to_dict(net), fh, sort_keys=False)


def load_network(path) -> RoadNetwork:
    """Rebuild a network from its serialized builder parameters."""
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh)
    net = build_network(data["kind"], **data["params"])
    if network_to_dict(net) != data:
        raise ConfigurationError(f"{path}: serialized network does not match its parameters")
    return net
