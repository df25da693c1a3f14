"""Pure-numpy implementations of the hot kernels.

The numba twins in ``numba_impl`` use the same arithmetic, in the same
order, so both backends produce bit-identical results (pinned by tests).
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "numpy"


def idm_accel(v, gap, lead_v, v0, T, a_max, b_comf, s0, delta):
    """Batched IDM acceleration; gap=inf with lead_v=v means leaderless."""
    den = 2.0 * math.sqrt(a_max * b_comf)
    ratio = v / v0
    if delta == 4.0:
        free = ratio * ratio
        free = free * free
    else:
        free = ratio**delta
    dv = v - lead_v
    s_star = s0 + np.maximum(0.0, v * T + v * dv / den)
    g = np.maximum(gap, 1e-3)
    inter = s_star / g
    return a_max * (1.0 - free - inter * inter)


def failsafe_bound(v, gap, lead_v, dt, b):
    """Max acceleration keeping emergency braking at b feasible next step.

    The leader is credited its discrete next-step speed (see idm module)."""
    lv = np.maximum(lead_v - b * dt, 0.0)
    arg = b * dt * b * dt + 2.0 * b * gap + lv * lv
    v1 = -b * dt + np.sqrt(np.maximum(arg, 0.0))
    v1 = np.maximum(v1, 0.0)
    return (v1 - v) / dt


def draw_polyline(img, xs, ys, half_width, value, cx, cy, mpp):
    """Paint pixels whose centers lie within half_width of the polyline."""
    h, w = img.shape
    c0 = (w - 1) * 0.5
    r0 = (h - 1) * 0.5
    hw2 = half_width * half_width
    for k in range(xs.shape[0] - 1):
        ax, ay = xs[k], ys[k]
        bx, by = xs[k + 1], ys[k + 1]
        ex, ey = bx - ax, by - ay
        L2 = ex * ex + ey * ey
        if L2 == 0.0:
            L2 = 1e-12
        xmin, xmax = min(ax, bx) - half_width, max(ax, bx) + half_width
        ymin, ymax = min(ay, by) - half_width, max(ay, by) + half_width
        ca = int(math.ceil((xmin - cx) / mpp + c0))
        cb = int(math.floor((xmax - cx) / mpp + c0))
        ra = int(math.ceil(r0 - (ymax - cy) / mpp))
        rb = int(math.floor(r0 - (ymin - cy) / mpp))
        ca, cb = max(ca, 0), min(cb, w - 1)
        ra, rb = max(ra, 0), min(rb, h - 1)
        if ca > cb or ra > rb:
            continue
        cols = np.arange(ca, cb + 1)
        rows = np.arange(ra, rb + 1)
        px = cx + (cols - c0) * mpp
        py = cy + (r0 - rows) * mpp
        pxg = px[None, :]
        pyg = py[:, None]
        t = ((pxg - ax) * ex + (pyg - ay) * ey) / L2
        t = np.minimum(np.maximum(t, 0.0), 1.0)
        qx = ax + t * ex
        qy = ay + t * ey
        dx = pxg - qx
        dy = pyg - qy
        hit = dx * dx + dy * dy <= hw2
        sub = img[ra : rb + 1, ca : cb + 1]
        sub[hit] = value


def draw_rect(img, rcx, rcy, ux, uy, half_len, half_wid, value, cx, cy, mpp):
    """Paint pixels whose centers lie inside an oriented rectangle."""
    h, w = img.shape
    c0 = (w - 1) * 0.5
    r0 = (h - 1) * 0.5
    ext_x = abs(ux) * half_len + abs(uy) * half_wid
    ext_y = abs(uy) * half_len + abs(ux) * half_wid
    ca = int(math.ceil((rcx - ext_x - cx) / mpp + c0))
    cb = int(math.floor((rcx + ext_x - cx) / mpp + c0))
    ra = int(math.ceil(r0 - (rcy + ext_y - cy) / mpp))
    rb = int(math.floor(r0 - (rcy - ext_y - cy) / mpp))
    ca, cb = max(ca, 0), min(cb, w - 1)
    ra, rb = max(ra, 0), min(rb, h - 1)
    if ca > cb or ra > rb:
        return
    cols = np.arange(ca, cb + 1)
    rows = np.arange(ra, rb + 1)
    px = cx + (cols - c0) * mpp
    py = cy + (r0 - rows) * mpp
    dx = px[None, :] - rcx
    dy = py[:, None] - rcy
    du = dx * ux + dy * uy
    dn = dx * uy - dy * ux
    hit = (np.abs(du) <= half_len) & (np.abs(dn) <= half_wid)
    sub = img[ra : rb + 1, ca : cb + 1]
    sub[hit] = value


def apply_circle_mask(img, radius, mpp, background):
    """Reset pixels whose centers are farther than radius from the center."""
    h, w = img.shape
    c0 = (w - 1) * 0.5
    r0 = (h - 1) * 0.5
    kx = (np.arange(w) - c0) * mpp
    ky = (r0 - np.arange(h)) * mpp
    d2 = kx[None, :] * kx[None, :] + ky[:, None] * ky[:, None]
    img[d2 > radius * radius] = background
