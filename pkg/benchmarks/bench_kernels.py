"""Compare the numba and numpy kernel backends on one reconstruction workload.

    python3 benchmarks/bench_kernels.py [--size 128] [--frames 2000] [--repeat 3]

Frames are generated once and held in memory, so timings cover only the
accumulation kernels (scalar sums, GI/NGI/DGI correlations, DTTCI sums).
"""
import argparse
import time

import numpy as np

from ghostkit import (
    SourceConfig,
    builtin_mask,
    estimate_mean_transmission,
    reconstruct_dgi,
    reconstruct_dttci,
    reconstruct_gi,
    run_acquisition,
    run_from_frames,
    select_count,
)
from ghostkit import _accel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--frames", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = SourceConfig(width=args.size, height=args.size)
    mask = builtin_mask("grayscale-chart", cfg.shape)
    run = run_acquisition(cfg, mask, args.frames, keep_frames=True)
    frames = run.frames.read(np.arange(run.M))
    regs = select_count(run, args.frames // 4, estimate_mean_transmission(run, 120))

    work = {
        "bucket+reference sums": lambda: run_from_frames(frames, mask, cfg),
        "GI": lambda: reconstruct_gi(run, run.M),
        "DGI": lambda: reconstruct_dgi(run, run.M),
        "DTTCI": lambda: reconstruct_dttci(run, regs),
    }
    results = {}
    for backend in ("numba", "numpy"):
        _accel.kernels = _accel.get_kernels(backend)
        for name, fn in work.items():
            fn()  # warm-up (JIT compile)
            results[backend, name] = best_of(fn, args.repeat)

    print(f"{args.frames} frames of {args.size}x{args.size}, best of {args.repeat}")
    print(f"{'workload':24s} {'numba [s]':>10s} {'numpy [s]':>10s} {'ratio':>7s}")
    for name in work:
        a, b = results["numba", name], results["numpy", name]
        print(f"{name:24s} {a:10.4f} {b:10.4f} {b / a:7.2f}")


if __name__ == "__main__":
    main()
