"""Mutable simulation state and the fixed-timestep vehicle stepper.

The stepping loop is strictly single-threaded and deterministic: vehicle
arrays are kept in spawn order, leaders are resolved by a stable sort, and
all randomness is injected by the caller (episode engine).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import junctions as _junctions
from . import kernels
from .idm import B_EMERGENCY, IdmParams
from .network import RoadNetwork

VEHICLE_CLASSES = ("passenger", "semi_truck", "motorcycle", "delivery_truck", "bus")
CLASS_LENGTH = np.array([5.0, 16.0, 2.5, 8.0, 12.0])
CLASS_WIDTH = np.array([1.8, 2.6, 0.9, 2.2, 2.55])

ROLE_HV = 0
ROLE_RV = 1


@dataclass(frozen=True)
class Tuning:
    """Junction-behavior constants (paper-silent plumbing, config-exposed)."""

    zone_caution_speed: float | None = 3.5  # m/s cap through two-way-stop zones
    caution_range: float = 50.0  # m before the zone where the cap ramps in
    critical_gap_s: float = 4.0  # minor-road gap acceptance vs major traffic
    grant_window: float = 15.0  # m before the stop line to queue for a grant
    stop_margin: float = 2.0  # m between the stop line and the zone boundary
    movement_window: float = 40.0  # m around a crossing considered "at" it
    merge_check_range: float = 30.0  # m before a ramp end to test acceptance
    merge_margin_s: float = 0.5  # extra time-gap margin for ramp merges
    lane_merge_window: float = 100.0  # m before a lane drop to change lanes
    drop_caution_speed: float | None = 11.0  # m/s crossing a lane-drop boundary
    lookahead: float = 200.0  # m leader search on open networks
    spawn_speed: float = 10.0  # m/s insertion speed (capped by speed limit)


@dataclass
class VehicleState:
    """Read-only per-vehicle snapshot (API/doc type; arrays are primary)."""

    vid: int
    vehicle_class: str
    role: str
    length: float
    edge_id: str
    lane_index: int
    arc_pos: float
    velocity: float
    last_accel: float
    route_id: str


@dataclass
class Ctx:
    """Per-step control context over the frozen current state."""

    gap: np.ndarray
    lead_v: np.ndarray
    lead_idx: np.ndarray
    wall_gap: np.ndarray
    a_cap: np.ndarray


class World:
    def __init__(
        self,
        net: RoadNetwork,
        idm: IdmParams | None = None,
        dt: float = 0.1,
        tuning: Tuning | None = None,
    ):
        self.net = net
        self.idm = idm or IdmParams()
        self.dt = dt
        self.tuning = tuning or Tuning()
        self.time_step = 0
        self.collision = False
        self.exit_log: list[tuple[float, int]] = []
        self._next_vid = 0
        self._ctx: Ctx | None = None

        n_edges = len(net.edges)
        self._edge_len = np.array([e.length for e in net.edges])
        self._edge_limit = np.array([e.speed_limit for e in net.edges])
        self._edge_lanes = np.array([e.lane_count for e in net.edges], dtype=np.int64)
        max_edges = max(len(r.edges) for r in net.routes)
        self._route_edges = np.zeros((len(net.routes), max_edges), dtype=np.int64)
        self._route_offsets = np.zeros((len(net.routes), max_edges), dtype=np.float64)
        self._route_nedges = np.zeros(len(net.routes), dtype=np.int64)
        self._route_len = np.zeros(len(net.routes))
        for ri, r in enumerate(net.routes):
            offs = net.route_offsets(r.id)
            self._route_nedges[ri] = len(r.edges)
            self._route_len[ri] = offs[-1]
            for k, eid in enumerate(r.edges):
                self._route_edges[ri, k] = net.edge_index(eid)
                self._route_offsets[ri, k] = offs[k]
        # lane continuation across lane drops, keyed by upstream edge index
        self._drop_by_edge = {}
        for j in net.junctions:
            if j.rule == "lane_drop":
                self._drop_by_edge[net.edge_index(j.upstream_edge)] = j
        self.junction_state = {
            j.id: {"granted": {}, "wait": {}} for j in net.junctions if j.rule == "two_way_stop"
        }

        self.vid = np.zeros(0, dtype=np.int64)
        self.cls = np.zeros(0, dtype=np.int64)
        self.role = np.zeros(0, dtype=np.int64)
        self.length = np.zeros(0)
        self.route = np.zeros(0, dtype=np.int64)
        self.epos = np.zeros(0, dtype=np.int64)
        self.lane = np.zeros(0, dtype=np.int64)
        self.arc = np.zeros(0)
        self.v = np.zeros(0)
        self.accel = np.zeros(0)
        self.spawn_step = np.zeros(0, dtype=np.int64)

    # -- state access ------------------------------------------------------

    @property
    def n(self) -> int:
        return self.vid.shape[0]

    @property
    def sim_time(self) -> float:
        return self.time_step * self.dt

    def gedge(self) -> np.ndarray:
        """Global edge index of each vehicle."""
        return self._route_edges[self.route, self.epos]

    def s_global(self) -> np.ndarray:
        """Arc position along the vehicle's own route."""
        return self._route_offsets[self.route, self.epos] + self.arc

    def route_index(self, route_id: str) -> int:
        for ri, r in enumerate(self.net.routes):
            if r.id == route_id:
                return ri
        raise KeyError(route_id)

    def _vid_alive(self, vid: int) -> bool:
        return bool(np.any(self.vid == vid))

    def add_vehicle(
        self,
        vehicle_class: str,
        role: str,
        route_id: str,
        lane: int,
        arc: float,
        velocity: float,
        epos: int = 0,
    ) -> int:
        ci = VEHICLE_CLASSES.index(vehicle_class)
        ri = self.route_index(route_id)
        vid = self._next_vid
        self._next_vid += 1
        self.vid = np.append(self.vid, vid)
        self.cls = np.append(self.cls, ci)
        self.role = np.append(self.role, ROLE_RV if role == "rv" else ROLE_HV)
        self.length = np.append(self.length, CLASS_LENGTH[ci])
        self.route = np.append(self.route, ri)
        self.epos = np.append(self.epos, epos)
        self.lane = np.append(self.lane, lane)
        self.arc = np.append(self.arc, arc)
        self.v = np.append(self.v, velocity)
        self.accel = np.append(self.accel, 0.0)
        self.spawn_step = np.append(self.spawn_step, self.time_step)
        self._ctx = None
        return vid

    def _remove(self, keep_mask: np.ndarray) -> None:
        for name in (
            "vid", "cls", "role", "length", "route", "epos",
            "lane", "arc", "v", "accel", "spawn_step",
        ):
            setattr(self, name, getattr(self, name)[keep_mask])

    def vehicle_states(self) -> list[VehicleState]:
        ge = self.gedge()
        out = []
        for i in range(self.n):
            out.append(
                VehicleState(
                    vid=int(self.vid[i]),
                    vehicle_class=VEHICLE_CLASSES[self.cls[i]],
                    role="rv" if self.role[i] == ROLE_RV else "hv",
                    length=float(self.length[i]),
                    edge_id=self.net.edges[ge[i]].id,
                    lane_index=int(self.lane[i]),
                    arc_pos=float(self.arc[i]),
                    velocity=float(self.v[i]),
                    last_accel=float(self.accel[i]),
                    route_id=self.net.routes[self.route[i]].id,
                )
            )
        return out

    # -- leader resolution ---------------------------------------------------

    def _continuation_lane(self, gedge_idx: int, lane: int, next_gedge: int) -> int | None:
        j = self._drop_by_edge.get(gedge_idx)
        if j is not None:
            return j.lane_continuation.get(lane)
        return min(lane, int(self._edge_lanes[next_gedge]) - 1)

    def control_context(self) -> Ctx:
        if self._ctx is not None:
            return self._ctx
        n = self.n
        ctx = Ctx(
            gap=np.full(n, np.inf),
            lead_v=self.v.copy(),
            lead_idx=np.full(n, -1, dtype=np.int64),
            wall_gap=np.full(n, np.inf),
            a_cap=np.full(n, np.inf),
        )
        if n:
            self._leader_pass(ctx)
            _junctions.apply_constraints(self, ctx)
        self._ctx = ctx
        return ctx

    def _leader_pass(self, ctx: Ctx) -> None:
        ge = self.gedge()
        order = np.lexsort((self.arc, self.lane, ge))
        ge_s = ge[order]
        lane_s = self.lane[order]
        # contiguous (edge, lane) groups in sorted order
        groups: dict[tuple[int, int], tuple[int, int]] = {}
        start = 0
        for k in range(1, len(order) + 1):
            if k == len(order) or ge_s[k] != ge_s[start] or lane_s[k] != lane_s[start]:
                groups[(int(ge_s[start]), int(lane_s[start]))] = (start, k)
                start = k
        for key, (a, b) in groups.items():
            idxs = order[a:b]
            if len(idxs) > 1:
                ctx.lead_idx[idxs[:-1]] = idxs[1:]
                ctx.gap[idxs[:-1]] = (
                    self.arc[idxs[1:]] - self.length[idxs[1:]] - self.arc[idxs[:-1]]
                )
                ctx.lead_v[idxs[:-1]] = self.v[idxs[1:]]
            tail = int(idxs[-1])
            self._walk_for_leader(tail, groups, order, ctx)

    def _walk_for_leader(self, i: int, groups, order, ctx: Ctx) -> None:
        ri = int(self.route[i])
        n_edges = int(self._route_nedges[ri])
        ge_here = int(self._route_edges[ri, self.epos[i]])
        lane = int(self.lane[i])
        dist = self._edge_len[ge_here] - self.arc[i]
        epos = int(self.epos[i])
        closed = self.net.closed
        max_dist = self._route_len[ri] if closed else self.tuning.lookahead
        for _ in range(n_edges):
            nxt = epos + 1
            if nxt >= n_edges:
                if not closed:
                    return
                nxt = 0
            ge_next = int(self._route_edges[ri, nxt])
            lane_next = self._continuation_lane(ge_here, lane, ge_next)
            if lane_next is None:
                return  # lane dies at the drop; the wall constraint covers it
            span = groups.get((ge_next, lane_next))
            if span is not None:
                j = int(order[span[0]])
                ctx.lead_idx[i] = j
                ctx.gap[i] = dist + self.arc[j] - self.length[j]
                ctx.lead_v[i] = self.v[j]
                return
            dist += self._edge_len[ge_next]
            if dist > max_dist:
                return
            epos, ge_here, lane = nxt, ge_next, lane_next

    # -- stepping ------------------------------------------------------------

    def step_dynamics(self, commanded: np.ndarray, ctx: Ctx | None = None) -> None:
        """Apply commanded accelerations, integrate, and advance bookkeeping.

        One commanded acceleration per vehicle, aligned with the current
        vehicle order (HVs from IDM+noise, RVs from their action mapping).
        """
        if ctx is None:
            ctx = self.control_context()
        dt = self.dt
        n = self.n
        if n:
            a = np.minimum(commanded, ctx.a_cap)
            zeros = np.zeros(n)
            fs_lead = kernels.failsafe_bound(self.v, ctx.gap, ctx.lead_v, dt, B_EMERGENCY)
            fs_wall = kernels.failsafe_bound(self.v, ctx.wall_gap, zeros, dt, B_EMERGENCY)
            a = np.minimum(a, np.minimum(fs_lead, fs_wall))
            ge = self.gedge()
            v1 = np.minimum(np.maximum(self.v + a * dt, 0.0), self._edge_limit[ge])
            self.accel = (v1 - self.v) / dt
            self.v = v1
            self.arc = self.arc + v1 * dt
            self._advance_edges()
        self.time_step += 1
        if self.n:
            _junctions.end_of_step(self)
        self._ctx = None
        ctx2 = self.control_context()
        if self.n and np.any(ctx2.gap < -1e-9):
            for i in np.where(ctx2.gap < -1e-9)[0]:
                j = int(ctx2.lead_idx[i])
                if j < 0 or not self._same_pavement(int(i), j):
                    continue  # corridors meet ahead but the paths have not
                self.v[i] = 0.0
                self.v[j] = 0.0
                self.collision = True

    def _same_pavement(self, i: int, j: int) -> bool:
        """Whether a negative corridor gap is a physical overlap.

        True when both vehicles share an edge, or when the leader straddles
        back into the follower's edge (it entered from there)."""
        ge = self.gedge()
        if ge[i] == ge[j]:
            return True
        if self.arc[j] >= self.length[j]:
            return False
        rj = int(self.route[j])
        ej = int(self.epos[j])
        prev = ej - 1
        if prev < 0:
            if not self.net.closed:
                return False
            prev = int(self._route_nedges[rj]) - 1
        return int(self._route_edges[rj, prev]) == int(ge[i])

    def _advance_edges(self) -> None:
        exited = np.zeros(self.n, dtype=bool)
        ge = self.gedge()
        over = self.arc > self._edge_len[ge]
        while np.any(over):
            for i in np.where(over)[0]:
                if exited[i]:
                    continue
                ri = int(self.route[i])
                ge_i = int(self._route_edges[ri, self.epos[i]])
                nxt = int(self.epos[i]) + 1
                if nxt >= self._route_nedges[ri]:
                    if self.net.closed:
                        nxt = 0
                    else:
                        exited[i] = True
                        self.exit_log.append(
                            ((self.time_step + 1) * self.dt, int(self.vid[i]))
                        )
                        continue
                ge_next = int(self._route_edges[ri, nxt])
                lane_next = self._continuation_lane(ge_i, int(self.lane[i]), ge_next)
                if lane_next is None:
                    # a dying lane ends here: hold at the drop point until a
                    # lane change succeeds (no teleporting)
                    self.arc[i] = self._edge_len[ge_i]
                    self.v[i] = 0.0
                    continue
                self.arc[i] -= self._edge_len[ge_i]
                self.epos[i] = nxt
                self.lane[i] = lane_next
            if np.any(exited):
                keep = ~exited
                self._remove(keep)
                exited = exited[keep]
            ge = self.gedge()
            over = self.arc > self._edge_len[ge] if self.n else np.zeros(0, dtype=bool)
