"""Throughput comparison of the numba kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py
The same comparison at the simulation level uses MIXEDTRAFFIC_NUMBA=0.
"""
import time

import numpy as np

from mixedtraffic.kernels import numpy_impl

try:
    from mixedtraffic.kernels import numba_impl
except ImportError:
    numba_impl = None


def bench(label, fn, *args, repeat=200):
    fn(*args)  # warm (JIT) outside the timed region
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    per_call = (time.perf_counter() - t0) / repeat
    print(f"  {label:28s} {per_call * 1e6:10.1f} us/call")
    return per_call


def idm_args(n):
    rng = np.random.default_rng(0)
    v = rng.uniform(0, 30, n)
    gap = rng.uniform(1, 100, n)
    lead_v = rng.uniform(0, 30, n)
    v0 = np.full(n, 30.0)
    return v, gap, lead_v, v0, 1.0, 1.0, 1.5, 2.0, 4.0


def raster_scene():
    theta = np.linspace(0, 2 * np.pi, 240)
    xs = 36.0 * np.cos(theta)
    ys = 36.0 * np.sin(theta)
    return xs, ys


def run_backend(name, impl):
    print(f"{name}:")
    results = {}
    for n in (22, 100, 400):
        results[f"idm_n{n}"] = bench(
            f"idm_accel n={n}", impl.idm_accel, *idm_args(n)
        )
    v, gap, lead_v, *_ = idm_args(100)
    results["failsafe"] = bench(
        "failsafe_bound n=100", impl.failsafe_bound, v, gap, lead_v, 0.1, 4.5
    )
    xs, ys = raster_scene()

    def draw():
        img = np.zeros((84, 84), dtype=np.uint8)
        impl.draw_polyline(img, xs, ys, 1.6, 85, 0.0, 0.0, 57.5 / 84)
        for k in range(22):
            a = 2 * np.pi * k / 22.0
            impl.draw_rect(
                img, 36.0 * np.cos(a), 36.0 * np.sin(a),
                -np.sin(a), np.cos(a), 2.5, 0.9, 170, 0.0, 0.0, 57.5 / 84,
            )
        impl.apply_circle_mask(img, 28.75, 57.5 / 84, 0)
        return img

    results["render"] = bench("full 84x84 frame", draw, repeat=100)
    return results


def main():
    base = run_backend("numpy fallback", numpy_impl)
    if numba_impl is None:
        print("numba unavailable; fallback timings only")
        return
    fast = run_backend("numba", numba_impl)
    print("speedup (numpy / numba):")
    for key in base:
        print(f"  {key:28s} {base[key] / fast[key]:8.1f}x")


if __name__ == "__main__":
    main()
