"""Numba-compiled twins of the numpy kernels.

Same arithmetic and operation order as ``numpy_impl`` (no fastmath), so the
two backends stay bit-identical.
"""
from __future__ import annotations

import math

import numba
import numpy as np

BACKEND = "numba"

_jit = numba.njit(cache=True, fastmath=False)


@_jit
def _idm_accel(v, gap, lead_v, v0, T, a_max, b_comf, s0, delta, out):
    den = 2.0 * math.sqrt(a_max * b_comf)
    for i in range(v.shape[0]):
        ratio = v[i] / v0[i]
        if delta == 4.0:
            free = ratio * ratio
            free = free * free
        else:
            free = ratio**delta
        dv = v[i] - lead_v[i]
        dyn = v[i] * T + v[i] * dv / den
        if dyn < 0.0:
            dyn = 0.0
        s_star = s0 + dyn
        g = gap[i]
        if g < 1e-3:
            g = 1e-3
        inter = s_star / g
        out[i] = a_max * (1.0 - free - inter * inter)
    return out


def idm_accel(v, gap, lead_v, v0, T, a_max, b_comf, s0, delta):
    out = np.empty_like(v)
    return _idm_accel(v, gap, lead_v, v0, T, a_max, b_comf, s0, delta, out)


@_jit
def _failsafe_bound(v, gap, lead_v, dt, b, out):
    for i in range(v.shape[0]):
        lv = lead_v[i] - b * dt
        if lv < 0.0:
            lv = 0.0
        arg = b * dt * b * dt + 2.0 * b * gap[i] + lv * lv
        if arg < 0.0:
            arg = 0.0
        v1 = -b * dt + math.sqrt(arg)
        if v1 < 0.0:
            v1 = 0.0
        out[i] = (v1 - v[i]) / dt
    return out


def failsafe_bound(v, gap, lead_v, dt, b):
    out = np.empty_like(v)
    return _failsafe_bound(v, gap, lead_v, dt, b, out)


@_jit
def draw_polyline(img, xs, ys, half_width, value, cx, cy, mpp):
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
        xmin = min(ax, bx) - half_width
        xmax = max(ax, bx) + half_width
        ymin = min(ay, by) - half_width
        ymax = max(ay, by) + half_width
        ca = int(math.ceil((xmin - cx) / mpp + c0))
        cb = int(math.floor((xmax - cx) / mpp + c0))
        ra = int(math.ceil(r0 - (ymax - cy) / mpp))
        rb = int(math.floor(r0 - (ymin - cy) / mpp))
        if ca < 0:
            ca = 0
        if cb > w - 1:
            cb = w - 1
        if ra < 0:
            ra = 0
        if rb > h - 1:
            rb = h - 1
        for row in range(ra, rb + 1):
            py = cy + (r0 - row) * mpp
            for col in range(ca, cb + 1):
                px = cx + (col - c0) * mpp
                t = ((px - ax) * ex + (py - ay) * ey) / L2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                qx = ax + t * ex
                qy = ay + t * ey
                dx = px - qx
                dy = py - qy
                if dx * dx + dy * dy <= hw2:
                    img[row, col] = value


@_jit
def draw_rect(img, rcx, rcy, ux, uy, half_len, half_wid, value, cx, cy, mpp):
    h, w = img.shape
    c0 = (w - 1) * 0.5
    r0 = (h - 1) * 0.5
    ext_x = abs(ux) * half_len + abs(uy) * half_wid
    ext_y = abs(uy) * half_len + abs(ux) * half_wid
    ca = int(math.ceil((rcx - ext_x - cx) / mpp + c0))
    cb = int(math.floor((rcx + ext_x - cx) / mpp + c0))
    ra = int(math.ceil(r0 - (rcy + ext_y - cy) / mpp))
    rb = int(math.floor(r0 - (rcy - ext_y - cy) / mpp))
    if ca < 0:
        ca = 0
    if cb > w - 1:
        cb = w - 1
    if ra < 0:
        ra = 0
    if rb > h - 1:
        rb = h - 1
    for row in range(ra, rb + 1):
        py = cy + (r0 - row) * mpp
        for col in range(ca, cb + 1):
            px = cx + (col - c0) * mpp
            dx = px - rcx
            dy = py - rcy
            du = dx * ux + dy * uy
            dn = dx * uy - dy * ux
            if abs(du) <= half_len and abs(dn) <= half_wid:
                img[row, col] = value


@_jit
def apply_circle_mask(img, radius, mpp, background):
    h, w = img.shape
    c0 = (w - 1) * 0.5
    r0 = (h - 1) * 0.5
    r2 = radius * radius
    for row in range(h):
        ky = (r0 - row) * mpp
        for col in range(w):
            kx = (col - c0) * mpp
            if kx * kx + ky * ky > r2:
                img[row, col] = background
