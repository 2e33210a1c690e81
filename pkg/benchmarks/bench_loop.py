"""Time the compiled loop kernel against the pure-Python fallback.

    python benchmarks/bench_loop.py --samples 1000000
"""

import argparse
import time

import numpy as np

from thermosd import _loop_py

try:
    from thermosd import _loop
except ImportError:  # extension not built
    _loop = None


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        bits = np.empty(args[0].size, np.int8)
        t0 = time.perf_counter()
        fn(args[0], args[1], bits, *args[2:])
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--samples", type=int, default=1_000_000, help="loop steps per run (default 1e6)")
    p.add_argument("--repeat", type=int, default=3, help="runs per kernel, best is reported (default 3)")
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    n = args.samples
    power = rng.uniform(-300e-6, 300e-6, n)
    noise = rng.standard_normal(n) * 80e-6
    # 131 kHz clock, 3.3 ms detector, default bridge
    pole = np.exp(-1 / (131e3 * 3.3e-3))
    loop_args = (power, noise, 0.0, pole, 1e4 * (1 - pole), 23.1e-3 * 1.0, 306e-6)

    rows = [("python", _time(_loop_py.run_loop, loop_args, args.repeat))]
    if _loop is not None:
        rows.append(("cython", _time(_loop.run_loop, loop_args, args.repeat)))
    for name, t in rows:
        print(f"{name:>7}: {t * 1e3:9.2f} ms  ({n / t / 1e6:8.2f} Msteps/s)")
    if len(rows) == 2:
        print(f"speed-up: {rows[0][1] / rows[1][1]:.1f}x")
    else:
        print("compiled kernel not available; rebuild with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
