import math

import numpy as np
import pytest

from mixedtraffic.geometry import ArcSeg, LineSeg, PathGeometry


def test_line_point_and_heading():
    seg = LineSeg(0.0, 0.0, 10.0, 0.0)
    x, y, h = seg.point(4.0)
    assert (x, y) == (4.0, 0.0)
    assert h == 0.0


def test_arc_point_full_circle_closure():
    arc = ArcSeg(0.0, 0.0, 10.0, 0.0, 2.0 * math.pi)
    x0, y0, _ = arc.point(0.0)
    x1, y1, _ = arc.point(arc.length)
    assert math.hypot(x1 - x0, y1 - y0) < 1e-9


def test_arc_heading_is_tangent():
    arc = ArcSeg(0.0, 0.0, 5.0, 0.0, math.pi)
    _, _, h = arc.point(0.0)
    assert h == pytest.approx(math.pi / 2.0)
    _, _, h_cw = ArcSeg(0.0, 0.0, 5.0, 0.0, -math.pi).point(0.0)
    assert h_cw == pytest.approx(-math.pi / 2.0)


def test_polyline_length_tolerance():
    arc = ArcSeg(0.0, 0.0, 35.0, 0.0, 2.0 * math.pi)
    path = PathGeometry([arc])
    pts = path.polyline(tol=1e-7)
    chord = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
    assert abs(chord - path.length) < 1e-7


def test_path_cumulative_addressing():
    path = PathGeometry([LineSeg(0, 0, 10, 0), LineSeg(10, 0, 10, 5)])
    assert path.length == pytest.approx(15.0)
    x, y, h = path.point(12.0)
    assert (x, y) == pytest.approx((10.0, 2.0))
    assert h == pytest.approx(math.pi / 2.0)


@pytest.mark.parametrize("s", [0.0, 3.7, 10.0, 31.4, 60.0])
def test_project_roundtrip_line_and_arc(s):
    path = PathGeometry(
        [LineSeg(0, 0, 20, 0), ArcSeg(20, 10, 10.0, -math.pi / 2.0, math.pi)]
    )
    s = min(s, path.length)
    x, y, _ = path.point(s)
    s_back, dist = path.project(x, y)
    assert dist < 1e-9
    assert s_back == pytest.approx(s, abs=1e-6)
