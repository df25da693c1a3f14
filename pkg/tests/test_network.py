import math

import numpy as np
import pytest

from mixedtraffic.network import (
    ConfigurationError,
    DomainError,
    build_bottleneck,
    build_figure_eight,
    build_intersection,
    build_merge,
    build_ring,
    figure_eight_length,
    lane_to_world,
    network_to_dict,
    save_network,
    load_network,
    world_to_lane,
)

ALL_BUILDERS = {
    "ring": lambda: build_ring(230.0),
    "figure_eight": lambda: build_figure_eight(25.0),
    "intersection": build_intersection,
    "merge": build_merge,
    "bottleneck": lambda: build_bottleneck(1),
}


class TestRing:
    def test_total_length_exact(self):
        assert build_ring(220.0).total_length == 220.0

    def test_closure_in_2d(self):
        net = build_ring(260.0)
        x0, y0, _ = lane_to_world(net, "ring", 0, 0.0)
        x1, y1, _ = lane_to_world(net, "ring", 0, 260.0)
        assert math.hypot(x1 - x0, y1 - y0) < 1e-6

    def test_density_arithmetic(self):
        net = build_ring(230.0)
        assert 22 / (net.total_length / 1000.0) == pytest.approx(95.652, abs=1e-2)

    def test_diametric_point(self):
        # closed-form circle geometry: opposite points are 2R = C/pi apart
        net = build_ring(220.0)
        x0, y0, _ = lane_to_world(net, "ring", 0, 0.0)
        x1, y1, _ = lane_to_world(net, "ring", 0, 110.0)
        assert math.hypot(x1 - x0, y1 - y0) == pytest.approx(220.0 / math.pi, abs=1e-6)

    @pytest.mark.parametrize("bad", [100.0, 449.0, 401.0])
    def test_out_of_range(self, bad):
        with pytest.raises(ConfigurationError):
            build_ring(bad)


class TestFigureEight:
    def test_valid_at_low_radius(self):
        net = build_figure_eight(20.0)
        assert net.closed
        assert net.total_length == pytest.approx(figure_eight_length(20.0))

    def test_length_strictly_increasing(self):
        lengths = [build_figure_eight(r).total_length for r in (15, 20, 25, 30, 40)]
        assert all(a < b for a, b in zip(lengths, lengths[1:]))

    def test_loops_identical_length(self):
        net = build_figure_eight(30.0)
        assert net.edge("loop_ne").length == pytest.approx(net.edge("loop_sw").length)

    def test_pinned_length_formula(self):
        # golden: two 3/4 circles plus two straight 2r crossing segments
        for r in (15.0, 22.5, 40.0):
            assert build_figure_eight(r).total_length == pytest.approx(
                3.0 * math.pi * r + 4.0 * r
            )

    def test_crossing_junction_is_all_stop(self):
        net = build_figure_eight(25.0)
        (j,) = net.junctions
        assert j.rule == "two_way_stop"
        assert set(j.minor) == {"cross_we", "cross_ns"}

    def test_out_of_range(self):
        with pytest.raises(ConfigurationError):
            build_figure_eight(10.0)


class TestIntersection:
    def test_two_way_stop_minor_east_west(self):
        net = build_intersection()
        (j,) = net.junctions
        assert j.rule == "two_way_stop"
        assert set(j.minor) == {"e_in", "w_in"}

    def test_north_south_symmetric_under_rotation(self):
        net = build_intersection()
        n_in = net.edge("n_in")
        s_in = net.edge("s_in")
        for s in (0.0, 50.0, n_in.length):
            x, y, _ = n_in.geometry.point(s)
            xs, ys, _ = s_in.geometry.point(s)
            assert (xs, ys) == pytest.approx((-x, -y), abs=1e-9)

    def test_stop_lines_equidistant(self):
        net = build_intersection()
        (j,) = net.junctions
        dists = []
        for eid in j.incoming:
            edge = net.edge(eid)
            x, y, _ = edge.geometry.point(edge.length - j.zone_radius)
            dists.append(math.hypot(x - j.center[0], y - j.center[1]))
        assert max(dists) - min(dists) < 1e-9

    def test_approaches_long_enough_for_view(self):
        net = build_intersection()
        assert all(net.edge(e).length >= 120.0 for e in net.junctions[0].incoming)


class TestMerge:
    def test_two_merge_yield_junctions(self):
        net = build_merge()
        rules = [j.rule for j in net.junctions]
        assert rules == ["merge_yield", "merge_yield"]

    def test_ramp_routes_end_on_exit_edge(self):
        net = build_merge()
        exit_edge = net.route("highway").edges[-1]
        for rid in ("ramp_1", "ramp_2"):
            assert net.route(rid).edges[-1] == exit_edge

    def test_highway_route_longest(self):
        net = build_merge()
        hw = net.route_length("highway")
        assert hw > net.route_length("ramp_1")
        assert hw > net.route_length("ramp_2")


class TestBottleneck:
    def test_lane_counts_4_2_1(self):
        net = build_bottleneck(1)
        assert [net.edge(e).lane_count for e in ("seg0", "seg1", "seg2")] == [4, 2, 1]

    def test_scaling(self):
        net = build_bottleneck(2)
        assert [e.lane_count for e in net.edges] == [8, 4, 2]

    def test_two_lane_drops(self):
        net = build_bottleneck(1)
        assert [j.rule for j in net.junctions] == ["lane_drop", "lane_drop"]

    def test_scale_below_one_rejected(self):
        with pytest.raises(ConfigurationError):
            build_bottleneck(0)

    def test_continuations_cover_surviving_lanes(self):
        net = build_bottleneck(1)
        j1, j2 = net.junctions
        assert j1.lane_continuation == {1: 0, 2: 1}
        assert j1.merge_target == {0: 1, 3: 2}
        assert j2.lane_continuation == {0: 0}
        assert j2.merge_target == {1: 0}


class TestLaneToWorld:
    def test_ring_wrap_point_identical(self):
        net = build_ring(230.0)
        ax, ay, _ = lane_to_world(net, "ring", 0, 0.0)
        bx, by, _ = lane_to_world(net, "ring", 0, 230.0)
        assert (ax, ay) == pytest.approx((bx, by), abs=1e-6)

    def test_straight_edge_heading_constant(self):
        net = build_merge()
        _, _, h1 = lane_to_world(net, "hw0", 0, 10.0)
        _, _, h2 = lane_to_world(net, "hw0", 0, 200.0)
        assert h1 == h2

    def test_out_of_range_errors(self):
        net = build_ring(230.0)
        with pytest.raises(DomainError):
            lane_to_world(net, "ring", 1, 10.0)
        with pytest.raises(DomainError):
            lane_to_world(net, "ring", 0, 231.0)

    @pytest.mark.parametrize("kind", list(ALL_BUILDERS))
    def test_roundtrip_arc_positions(self, kind):
        net = ALL_BUILDERS[kind]()
        rng = np.random.default_rng(7)
        for edge in net.edges:
            for lane in range(edge.lane_count):
                for s in rng.uniform(0.0, edge.length, size=5):
                    x, y, _ = lane_to_world(net, edge.id, lane, float(s))
                    s_back = world_to_lane(net, edge.id, lane, x, y)
                    assert s_back == pytest.approx(float(s), abs=1e-6)


@pytest.mark.parametrize("kind", list(ALL_BUILDERS))
def test_route_lengths_match_polylines(kind):
    net = ALL_BUILDERS[kind]()
    for route in net.routes:
        poly_total = 0.0
        for eid in route.edges:
            pts = net.edge(eid).centerline(tol=1e-7)
            poly_total += float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        assert abs(poly_total - net.route_length(route.id)) < 1e-6


@pytest.mark.parametrize("kind", list(ALL_BUILDERS))
def test_builders_pure(kind):
    assert network_to_dict(ALL_BUILDERS[kind]()) == network_to_dict(ALL_BUILDERS[kind]())


@pytest.mark.parametrize("kind", list(ALL_BUILDERS))
def test_serialization_golden_and_roundtrip(kind, tmp_path):
    import pathlib

    net = ALL_BUILDERS[kind]()
    golden = pathlib.Path(__file__).parent / "golden" / "networks" / f"{kind}.yaml"
    out = tmp_path / f"{kind}.yaml"
    save_network(net, out)
    assert out.read_text() == golden.read_text()
    loaded = load_network(out)
    assert network_to_dict(loaded) == network_to_dict(net)
