"""Throughput comparison of the compiled dilation kernel vs. the numpy fallback.

Runs both implementations on identical random planes across a sweep of mask
sizes and radii, cross-checks their outputs bit-exactly, and prints one row
per configuration with the speedup of the compiled kernel.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--density D]
"""

import argparse
import time

import numpy as np

from modiste.kernels import _numpy

try:
    from modiste.kernels import _native
except ImportError:
    _native = None

SIZES = ((256, 384), (512, 768), (1024, 1536))
RADII = (1, 3, 7, 15)


def best_of(fn, bits, radius, repeats):
    """Fastest wall-clock time of `repeats` runs, in seconds."""
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(bits, radius)
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="runs per timing (best-of)")
    parser.add_argument("--density", type=float, default=0.15, help="fraction of set pixels")
    args = parser.parse_args()

    if _native is None:
        print("compiled kernel unavailable; timing the numpy fallback only")

    rng = np.random.default_rng(7)
    header = f"{'size':>12} {'radius':>6} {'numpy ms':>10}"
    if _native is not None:
        header += f" {'native ms':>10} {'speedup':>8}"
    print(header)
    for width, height in SIZES:
        bits = rng.random((height, width)) < args.density
        for radius in RADII:
            numpy_s = best_of(_numpy.dilate_chebyshev, bits, radius, args.repeats)
            row = f"{f'{width}x{height}':>12} {radius:>6} {numpy_s * 1e3:>10.3f}"
            if _native is not None:
                native_s = best_of(_native.dilate_chebyshev, bits, radius, args.repeats)
                if not np.array_equal(
                    _native.dilate_chebyshev(bits, radius),
                    _numpy.dilate_chebyshev(bits, radius),
                ):
                    raise SystemExit(
                        f"kernel outputs disagree at {width}x{height} r={radius}"
                    )
                row += f" {native_s * 1e3:>10.3f} {numpy_s / native_s:>7.1f}x"
            print(row)


if __name__ == "__main__":
    main()
