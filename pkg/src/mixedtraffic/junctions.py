"""Junction interaction rules applied inside the stepping loop.

Three rule families, all deterministic functions of the frozen world state:

* two_way_stop - minor approaches stop at their line and cross the conflict
  zone under a first-come-first-served grant, gated by gap acceptance
  against major traffic; major approaches yield to vehicles already granted
  or inside the zone and obey an optional caution speed through the zone.
* merge_yield - on-ramp vehicles proceed only when both resulting highway
  gaps are acceptable, otherwise they stop at the ramp end.
* lane_drop - vehicles on a dying lane change into their target lane at the
  earliest acceptable gap and otherwise stop at the drop point.

Constraints are expressed as virtual stopped leaders (wall gaps) and
acceleration caps consumed by the stepper and the HV controller.
"""
from __future__ import annotations

import bisect
import math

import numpy as np


def _wrap_delta(d: np.ndarray, route_len: float) -> np.ndarray:
    """Map a route-position delta into (-L/2, L/2] on closed routes."""
    d = np.mod(d, route_len)
    return np.where(d > route_len / 2.0, d - route_len, d)


def _movement_frames(world, junction):
    """Per movement: vehicle indices near the crossing and their distances.

    Distance d is from the vehicle's front bumper to the crossing center,
    positive while approaching.
    """
    s = world.s_global()
    frames = []
    for m in junction.movements:
        ri = world.route_index(m.route_id)
        mask = world.route == ri
        if not np.any(mask):
            frames.append((m, np.zeros(0, dtype=np.int64), np.zeros(0)))
            continue
        idx = np.where(mask)[0]
        d = m.s_cross - s[idx]
        if world.net.closed:
            d = _wrap_delta(d, world._route_len[ri])
        near = np.abs(d) <= world.tuning.movement_window
        frames.append((m, idx[near], d[near]))
    return frames


def _axis_busy(world, junction, frames) -> dict[int, bool]:
    """An axis is busy while any of its vehicles occupies the zone or holds
    an active grant."""
    zr = junction.zone_radius
    granted = world.junction_state[junction.id]["granted"]
    busy: dict[int, bool] = {}
    for m, idx, d in frames:
        occupied = bool(np.any((d < zr) & (d > -zr - world.length[idx])))
        has_grant = any(ax == m.axis and world._vid_alive(vid) for vid, ax in granted.items())
        busy[m.axis] = busy.get(m.axis, False) or occupied or has_grant
    return busy


def _apply_two_way_stop(world, junction, ctx) -> None:
    t = world.tuning
    zr = junction.zone_radius
    state = world.junction_state[junction.id]
    granted = state["granted"]
    frames = _movement_frames(world, junction)
    busy = _axis_busy(world, junction, frames)
    for m, idx, d in frames:
        if len(idx) == 0:
            continue
        minor = m.entry_edge in junction.minor
        other_busy = any(ax != m.axis and b for ax, b in busy.items())
        for k, i in enumerate(idx):
            di = d[k]
            entry = di - zr  # front-bumper distance to the zone boundary
            line = entry - t.stop_margin  # ... to the stop line
            vid = int(world.vid[i])
            if di > 0.0:
                needs_wall = (minor and vid not in granted) or (not minor and other_busy)
                if needs_wall:
                    # keeps holding slightly past the line, so standing
                    # vehicles cannot creep into the zone without a grant
                    wall = max(line + world.idm.s0, 0.2)
                    if wall < ctx.wall_gap[i]:
                        ctx.wall_gap[i] = wall
            if t.zone_caution_speed is not None:
                if 0.0 < entry < t.caution_range:
                    allow = math.sqrt(
                        t.zone_caution_speed**2 + 2.0 * world.idm.b_comf * entry
                    )
                elif entry <= 0.0 and di > -zr - world.length[i]:
                    allow = t.zone_caution_speed
                else:
                    continue
                cap = (allow - world.v[i]) / world.dt
                if cap < ctx.a_cap[i]:
                    ctx.a_cap[i] = cap


def _update_grants(world, junction) -> None:
    """Release cleared grants, then admit the longest-waiting eligible head."""
    t = world.tuning
    zr = junction.zone_radius
    state = world.junction_state[junction.id]
    granted, wait = state["granted"], state["wait"]
    frames = _movement_frames(world, junction)

    pos = {}  # vid -> (movement, distance, index)
    for m, idx, d in frames:
        for k, i in enumerate(idx):
            pos[int(world.vid[i])] = (m, d[k], i)
    for vid in list(granted):
        if vid not in pos:
            del granted[vid]
            wait.pop(vid, None)
            continue
        m, di, i = pos[vid]
        if di <= -zr - world.length[i]:  # rear cleared the zone
            del granted[vid]
            wait.pop(vid, None)
    for vid in list(wait):
        if vid not in pos:
            del wait[vid]

    busy = _axis_busy(world, junction, frames)
    # heads: nearest ungranted vehicle per movement, close to the stop line
    heads = []
    for m, idx, d in frames:
        best = None
        for k, i in enumerate(idx):
            vid = int(world.vid[i])
            if vid in granted:
                continue
            line = d[k] - zr - t.stop_margin
            if -2.0 <= line <= t.grant_window:
                if best is None or line < best[1]:
                    best = (vid, line, i, m)
        if best is not None:
            heads.append(best)
            wait.setdefault(best[0], world.time_step)

    # FCFS across movements; ties broken by movement order
    heads.sort(key=lambda h: (wait.get(h[0], world.time_step), h[1]))
    for vid, entry, i, m in heads:
        minor = m.entry_edge in junction.minor
        if not minor:
            continue  # majors keep right of way; no grant needed
        if any(ax != m.axis and b for ax, b in busy.items()):
            continue
        if not _gap_acceptable(world, junction, m):
            continue
        granted[vid] = m.axis
        busy[m.axis] = True

    state["granted"], state["wait"] = granted, wait


def _gap_acceptable(world, junction, movement) -> bool:
    """Minor crossing allowed when every conflicting major approach is at
    least critical_gap_s away from the zone."""
    t = world.tuning
    zr = junction.zone_radius
    for m, idx, d in _movement_frames(world, junction):
        if m.axis == movement.axis or m.entry_edge in junction.minor:
            continue
        for k, i in enumerate(idx):
            entry = d[k] - zr
            if entry <= 0.0:
                if d[k] > -zr - world.length[i]:
                    return False  # already inside the zone
                continue
            tta = entry / max(world.v[i], 0.5)
            if tta < t.critical_gap_s:
                return False
    return True


def _apply_merge_yield(world, junction, ctx) -> None:
    t = world.tuning
    ramp_ge = world.net.edge_index(junction.ramp[0])
    upstream = [e for e in junction.incoming if e not in junction.ramp][0]
    up_ge = world.net.edge_index(upstream)
    ge = world.gedge()
    on_ramp = np.where(ge == ramp_ge)[0]
    if len(on_ramp) == 0:
        return
    ramp_len = world._edge_len[ramp_ge]
    up_len = world._edge_len[up_ge]
    up_idx = np.where(ge == up_ge)[0]
    for i in on_ramp:
        d_end = ramp_len - world.arc[i]
        if d_end > t.merge_check_range:
            continue
        ok = True
        # downstream leader comes from the normal corridor search
        lead_gap = ctx.gap[i]
        if math.isfinite(lead_gap):
            need = world.idm.s0 + t.merge_margin_s * max(0.0, world.v[i] - ctx.lead_v[i])
            ok = lead_gap >= need
        if ok and len(up_idx):
            # nearest highway vehicle still upstream of the merge point
            f_d = up_len - world.arc[up_idx]  # distance of their front to merge
            k = int(np.argmin(f_d))
            rear_gap = f_d[k] - d_end - world.length[i]
            need = world.idm.s0 + t.merge_margin_s * world.v[up_idx[k]]
            ok = rear_gap >= need
        if not ok:
            wall = max(d_end - 0.5 + world.idm.s0, 0.2)
            if wall < ctx.wall_gap[i]:
                ctx.wall_gap[i] = wall


def _apply_lane_drop(world, junction, ctx) -> None:
    t = world.tuning
    up_ge = world.net.edge_index(junction.upstream_edge)
    ge = world.gedge()
    dying = junction.merge_target.keys()
    for i in np.where(ge == up_ge)[0]:
        d_end = world._edge_len[up_ge] - world.arc[i]
        if int(world.lane[i]) in dying:
            wall = max(d_end - 0.3 + world.idm.s0, 0.2)
            if wall < ctx.wall_gap[i]:
                ctx.wall_gap[i] = wall
        if t.drop_caution_speed is not None and d_end < t.caution_range:
            # every lane slows through the reconfiguration point
            allow = math.sqrt(
                t.drop_caution_speed**2 + 2.0 * world.idm.b_comf * d_end
            )
            cap = (allow - world.v[i]) / world.dt
            if cap < ctx.a_cap[i]:
                ctx.a_cap[i] = cap


def _braking_feasible(world, v_behind: float, gap: float, v_ahead: float) -> bool:
    """The trailing vehicle can still keep its emergency-braking envelope."""
    from .idm import B_EMERGENCY, failsafe_acceleration

    return failsafe_acceleration(v_behind, gap, v_ahead, world.dt) >= -B_EMERGENCY


def _lane_drop_merges(world, junction) -> None:
    """Move dying-lane vehicles into their target lane, closest-first.

    Acceptance needs both resulting gaps >= s0 and dynamically feasible
    braking on both sides. Occupancy extends one edge downstream and one
    upstream so vehicles straddling a boundary stay visible.
    """
    t = world.tuning
    up_ge = world.net.edge_index(junction.upstream_edge)
    edge_len = world._edge_len[up_ge]
    ge = world.gedge()
    on_edge = np.where(ge == up_ge)[0]
    if len(on_edge) == 0:
        return
    occupancy: dict[int, list[tuple[float, float, float]]] = {}

    def occupy(lane: int, arc: float, idx: int) -> None:
        occupancy.setdefault(lane, []).append(
            (arc, float(world.length[idx]), float(world.v[idx]))
        )

    for i in on_edge:
        occupy(int(world.lane[i]), float(world.arc[i]), i)
    down_ge = world.net.edge_index(junction.outgoing[0])
    on_down = np.where(ge == down_ge)[0]
    for up_lane, down_lane in junction.lane_continuation.items():
        ahead = [i for i in on_down if int(world.lane[i]) == down_lane]
        if ahead:
            j = min(ahead, key=lambda i: world.arc[i])
            occupy(up_lane, edge_len + float(world.arc[j]), j)
    feeder = next(
        (
            j2
            for j2 in world.net.junctions
            if j2.rule == "lane_drop" and j2.outgoing[:1] == (junction.upstream_edge,)
        ),
        None,
    )
    if feeder is not None:
        feed_ge = world.net.edge_index(feeder.upstream_edge)
        feed_len = world._edge_len[feed_ge]
        on_feed = np.where(ge == feed_ge)[0]
        for up_lane_f, down_lane_f in feeder.lane_continuation.items():
            behind = [i for i in on_feed if int(world.lane[i]) == up_lane_f]
            if behind:
                j = max(behind, key=lambda i: world.arc[i])
                occupy(down_lane_f, float(world.arc[j]) - feed_len, j)
    for lane in occupancy:
        occupancy[lane].sort()
    candidates = [
        i
        for i in on_edge
        if int(world.lane[i]) in junction.merge_target
        and edge_len - world.arc[i] <= t.lane_merge_window
        and world.arc[i] - world.length[i] >= 0.0  # rear fully on this edge
    ]
    candidates.sort(key=lambda i: -world.arc[i])
    s0 = world.idm.s0
    for i in candidates:
        tgt = junction.merge_target[int(world.lane[i])]
        arr = occupancy.setdefault(tgt, [])
        arc_i, len_i, v_i = float(world.arc[i]), float(world.length[i]), float(world.v[i])
        front = rear = None
        for entry in arr:
            if entry[0] > arc_i:
                front = entry
                break
        for entry in reversed(arr):
            if entry[0] <= arc_i:
                rear = entry
                break
        ok = True
        if front is not None:
            front_gap = front[0] - front[1] - arc_i
            ok = front_gap >= s0 and _braking_feasible(world, v_i, front_gap, front[2])
        if ok and rear is not None:
            rear_gap = arc_i - len_i - rear[0]
            ok = rear_gap >= s0 and _braking_feasible(world, rear[2], rear_gap, v_i)
        if ok:
            occupancy[int(world.lane[i])].remove((arc_i, len_i, v_i))
            bisect.insort(arr, (arc_i, len_i, v_i))
            world.lane[i] = tgt


def lane_change_mandatory(world, junction) -> None:
    """Run the lane-drop merge pass for one junction (public entry point)."""
    _lane_drop_merges(world, junction)


def apply_constraints(world, ctx) -> None:
    for j in world.net.junctions:
        if j.rule == "two_way_stop":
            _apply_two_way_stop(world, j, ctx)
        elif j.rule == "merge_yield":
            _apply_merge_yield(world, j, ctx)
        elif j.rule == "lane_drop":
            _apply_lane_drop(world, j, ctx)


def end_of_step(world) -> None:
    for j in world.net.junctions:
        if j.rule == "lane_drop":
            _lane_drop_merges(world, j)
        elif j.rule == "two_way_stop":
            _update_grants(world, j)
