"""Time every hot kernel under numba and under the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once per backend (so numba compile time is
excluded), then timed as the best of ``--repeat`` runs. The end-to-end rows
schedule and cost a bundled model with the segment cache cleared.
"""
import argparse
import timeit

import numpy as np

from photonic_gan import _jit
from photonic_gan.ir import bundled_models
from photonic_gan.kernels import correlate2d, gather_tconv, group_ready, mvm_timing, queue_timing
from photonic_gan.perf import evaluate
from photonic_gan.schedule import ArchConfig, ScheduleOpts, _segment_summary, summarize_schedule
from photonic_gan.sparse import axis_tables


def cases():
    rng = np.random.default_rng(0)
    xp = rng.integers(-128, 128, size=(4, 16, 34, 34)).astype(np.int64)
    w = rng.integers(-128, 128, size=(16, 16, 3, 3)).astype(np.int64)
    x = rng.integers(-128, 128, size=(4, 16, 16, 16)).astype(np.int64)
    wf = rng.integers(-128, 128, size=(16, 8, 4, 4)).astype(np.int64)
    ax = axis_tables(16, 4, 2, 1)
    n = 200_000
    d1 = np.full(n, 0.36)
    ready = np.sort(rng.uniform(0, 1000, n))
    unit = rng.integers(0, 11, n)
    group = rng.integers(0, 5000, n)
    models = bundled_models()
    arch, opts = ArchConfig(16, 2, 11, 3), ScheduleOpts(True, True, True)

    def summary():
        _segment_summary.cache_clear()
        for g in models.values():
            summarize_schedule(g, arch, opts)

    return {
        "correlate2d 4x16x32x32, 3x3": lambda: correlate2d(xp, w, 1, 32, 32),
        "gather_tconv 4x16x16x16 -> 8x32x32": lambda: gather_tconv(x, wf, 4, 2, 1, ax, ax),
        "mvm_timing 200k tiles / 11 units": lambda: mvm_timing(11, 0.0, d1, 0.8958, True),
        "queue_timing 200k ops / 11 units": lambda: queue_timing(ready, unit, 11, 0.3),
        "group_ready 200k ops / 5k groups": lambda: group_ready(group, ready, 5000),
        "build+cost dcgan_like (all opts)": lambda: evaluate(models["dcgan_like"], arch, opts),
        "summaries of 4 models, cold cache": summary,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    before = _jit.use_numba()
    results = {}
    try:
        for flag in (True, False):
            _jit.use_numba(flag)
            for name, fn in cases().items():
                fn()
                results.setdefault(name, []).append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
    finally:
        _jit.use_numba(before)
    width = max(map(len, results))
    print(f"{'kernel':{width}s}  {'numba ms':>10s}  {'numpy ms':>10s}  {'speedup':>8s}")
    for name, (jit, npy) in results.items():
        print(f"{name:{width}s}  {jit * 1e3:10.2f}  {npy * 1e3:10.2f}  {npy / jit:7.1f}x")


if __name__ == "__main__":
    main()
