"""Compare the compiled kernels against the pure-Python fallbacks.

Usage: python benchmarks/kernel_benchmark.py [--channels N] [--samples N]
"""

import argparse
import time

import numpy as np

from modewatch.core import ChannelWindow, DetectorConfig
from modewatch.ekf import ekf_init, fft_trigger
from modewatch.kernels import _pure

try:
    from modewatch.kernels import _native
except ImportError:
    _native = None


def time_fn(fn, repeats):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=100)
    parser.add_argument("--samples", type=int, default=150)
    args = parser.parse_args()

    if _native is None:
        print("compiled extension not built; showing pure-Python numbers only")

    rng = np.random.default_rng(0)
    fs = 30.0
    t = np.arange(args.samples) / fs
    y = np.cos(2 * np.pi * 1.4 * t) + 0.1 * rng.standard_normal(args.samples)
    y = (y - y.mean()) / y.std()
    window = ChannelWindow("bench", 0, fs, y)
    config = DetectorConfig()
    candidates = fft_trigger(window, config) or [1.4]
    state = ekf_init(window, candidates)
    filter_args = (
        y,
        state.re,
        state.im,
        state.omega,
        state.sigma,
        state.cov,
        state.q_diag,
        state.r,
        fs,
    )

    repeats = max(1, args.channels)
    rows = []

    pure_ekf = time_fn(lambda: _pure.ekf_filter(*filter_args), repeats)
    rows.append(("ekf_filter (one window)", pure_ekf, None))
    if _native is not None:
        native_ekf = time_fn(lambda: _native.ekf_filter(*filter_args), repeats)
        rows[-1] = ("ekf_filter (one window)", pure_ekf, native_ekf)

    run_data = rng.integers(0, 4, size=args.samples).astype(float)
    pure_run = time_fn(lambda: _pure.longest_repeat_run(run_data), repeats * 10)
    if _native is not None:
        native_run = time_fn(
            lambda: _native.longest_repeat_run(run_data), repeats * 10
        )
        rows.append(("longest_repeat_run", pure_run, native_run))
    else:
        rows.append(("longest_repeat_run", pure_run, None))

    print(f"\n{args.samples}-sample windows, best of 3 x {repeats} runs\n")
    header = f"{'kernel':<26} {'pure (us)':>12} {'native (us)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, pure_s, native_s in rows:
        if native_s is None:
            print(f"{name:<26} {pure_s * 1e6:>12.1f} {'-':>12} {'-':>9}")
        else:
            print(
                f"{name:<26} {pure_s * 1e6:>12.1f} {native_s * 1e6:>12.1f} "
                f"{pure_s / native_s:>8.1f}x"
            )

    if _native is not None:
        out_pure = _pure.ekf_filter(*filter_args)
        out_native = _native.ekf_filter(*filter_args)
        agree = all(
            np.allclose(a, b, rtol=1e-9, atol=1e-12)
            for a, b in zip(out_pure[:-1], out_native[:-1])
        )
        print(f"\nnumerical agreement (rtol 1e-9): {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
