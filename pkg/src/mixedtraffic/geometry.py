"""Planar path geometry for lane centerlines.

Edges carry an analytic path (straight segments and circular arcs) that is
exact under arc-length parametrization; polylines are derived views sampled
at whatever resolution a consumer needs.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LineSeg", "ArcSeg", "PathGeometry"]


@dataclass(frozen=True)
class LineSeg:
    """Straight segment from (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def heading(self) -> float:
        return math.atan2(self.y1 - self.y0, self.x1 - self.x0)

    def point(self, s: float) -> tuple[float, float, float]:
        t = s / self.length
        return (
            self.x0 + t * (self.x1 - self.x0),
            self.y0 + t * (self.y1 - self.y0),
            self.heading,
        )

    def sample(self, max_spacing: float) -> np.ndarray:
        n = max(2, int(math.ceil(self.length / max_spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)
        return np.column_stack(
            [self.x0 + t * (self.x1 - self.x0), self.y0 + t * (self.y1 - self.y0)]
        )

    def polyline(self, tol: float) -> np.ndarray:
        # a straight chord is exact at any resolution
        return np.array([[self.x0, self.y0], [self.x1, self.y1]])

    def project(self, x: float, y: float) -> tuple[float, float]:
        dx, dy = self.x1 - self.x0, self.y1 - self.y0
        L = self.length
        t = ((x - self.x0) * dx + (y - self.y0) * dy) / (L * L)
        s = min(max(t, 0.0), 1.0) * L
        px, py, _ = self.point(s)
        return s, math.hypot(x - px, y - py)


@dataclass(frozen=True)
class ArcSeg:
    """Circular arc around (cx, cy); dtheta > 0 is counterclockwise."""

    cx: float
    cy: float
    radius: float
    theta0: float
    dtheta: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.dtheta)

    def _theta(self, s: float) -> float:
        return self.theta0 + math.copysign(s / self.radius, self.dtheta)

    def point(self, s: float) -> tuple[float, float, float]:
        th = self._theta(s)
        heading = th + math.copysign(math.pi / 2.0, self.dtheta)
        return (
            self.cx + self.radius * math.cos(th),
            self.cy + self.radius * math.sin(th),
            heading,
        )

    def sample(self, max_spacing: float) -> np.ndarray:
        n = max(2, int(math.ceil(self.length / max_spacing)) + 1)
        th = self.theta0 + np.linspace(0.0, self.dtheta, n)
        return np.column_stack(
            [self.cx + self.radius * np.cos(th), self.cy + self.radius * np.sin(th)]
        )

    def polyline(self, tol: float) -> np.ndarray:
        # chord-sum deficit of an arc split into n chords is ~ L*(dtheta/n)^2/24;
        # choose n so the deficit stays below tol
        n = int(math.ceil(math.sqrt(self.length * self.dtheta**2 / (24.0 * tol))))
        n = max(n, 8)
        th = self.theta0 + np.linspace(0.0, self.dtheta, n + 1)
        return np.column_stack(
            [self.cx + self.radius * np.cos(th), self.cy + self.radius * np.sin(th)]
        )

    def project(self, x: float, y: float) -> tuple[float, float]:
        phi = math.atan2(y - self.cy, x - self.cx)
        # closest angle within the swept range, accounting for wrap
        rel = (phi - self.theta0) * math.copysign(1.0, self.dtheta)
        rel = rel % (2.0 * math.pi)
        span = abs(self.dtheta)
        if rel > span:
            # off the arc: snap to whichever endpoint is angularly closer
            rel = 0.0 if (rel - span) > (2.0 * math.pi - rel) else span
        s = rel * self.radius
        px, py, _ = self.point(s)
        return s, math.hypot(x - px, y - py)


class PathGeometry:
    """Piecewise path of segments, addressed by arc length from the start."""

    def __init__(self, segments: list[LineSeg | ArcSeg]):
        if not segments:
            raise ValueError("path needs at least one segment")
        self.segments = list(segments)
        self._cum = [0.0]
        for seg in self.segments:
            self._cum.append(self._cum[-1] + seg.length)

    @property
    def length(self) -> float:
        return self._cum[-1]

    def _locate(self, s: float) -> tuple[LineSeg | ArcSeg, float]:
        s = min(max(s, 0.0), self.length)
        i = bisect.bisect_right(self._cum, s) - 1
        i = min(i, len(self.segments) - 1)
        return self.segments[i], s - self._cum[i]

    def point(self, s: float) -> tuple[float, float, float]:
        """(x, y, heading) at arc position s, clamped to [0, length]."""
        seg, local = self._locate(s)
        return seg.point(local)

    def sample(self, max_spacing: float) -> np.ndarray:
        """Polyline with vertex spacing <= max_spacing, for rasterization."""
        parts = []
        for i, seg in enumerate(self.segments):
            pts = seg.sample(max_spacing)
            parts.append(pts if i == 0 else pts[1:])
        return np.concatenate(parts, axis=0)

    def polyline(self, tol: float = 1e-7) -> np.ndarray:
        """Polyline whose chord-sum length is within tol of the arc length."""
        parts = []
        for i, seg in enumerate(self.segments):
            pts = seg.polyline(tol / len(self.segments))
            parts.append(pts if i == 0 else pts[1:])
        return np.concatenate(parts, axis=0)

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Arc position and distance of the nearest point on the path."""
        best = (0.0, math.inf)
        for seg, off in zip(self.segments, self._cum):
            s, d = seg.project(x, y)
            if d < best[1]:
                best = (off + s, d)
        return best
