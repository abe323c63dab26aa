#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy/SciPy fallback.

Times the three metric hot loops (surface extraction, confusion counts,
nearest-surface distances) plus an end-to-end per-case evaluation at a
few volume sizes, and checks that the two backends agree numerically.

Usage: python benchmarks/bench_kernels.py [--sizes 32,64,96] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import volseg
from volseg import segmetrics
from volseg.volcore import LabelMask, SegmentationPair, VoxelGrid


def blob_volume(n: int, seed: int) -> SegmentationPair:
    rng = np.random.default_rng(seed)
    idx = np.indices((n, n, n)).astype(float)
    center = (n - 1) / 2
    r = np.sqrt(((idx - center) ** 2).sum(axis=0))
    ref = (r <= n * 0.3).astype(np.uint8)
    wobble = rng.normal(0, n * 0.02, (n, n, n))
    pred = (r + wobble <= n * 0.3).astype(np.uint8)
    grid = VoxelGrid((n, n, n), (1.0, 1.0, 1.0), np.eye(4), np.zeros((n, n, n)))
    return SegmentationPair(LabelMask(grid, pred), LabelMask(grid, ref))


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_size(n: int, repeats: int) -> list[tuple[str, dict[str, float]]]:
    pair = blob_volume(n, seed=n)
    pred, ref = pair.prediction.voxels, pair.reference.voxels

    rows = []
    for op_name, make_fn in [
        ("surface_mask", lambda b: (lambda: b.surface_mask(pred))),
        ("confusion", lambda b: (lambda: b.confusion_counts(pred, ref))),
    ]:
        times = {}
        for name in volseg.available_backends():
            backend = _backend(name)
            times[name] = timeit(make_fn(backend), repeats)
        rows.append((op_name, times))

    # nearest-surface distances on the actual surface point sets
    volseg.set_backend("pure")
    from volseg.segmetrics import _surface_points_mm

    a = _surface_points_mm(pair.prediction)
    b = _surface_points_mm(pair.reference)
    times = {}
    results = {}
    for name in volseg.available_backends():
        backend = _backend(name)
        times[name] = timeit(lambda: backend.min_dists(a, b), repeats)
        results[name] = backend.min_dists(a, b)
    if len(results) == 2:
        diff = np.abs(results["pure"] - results["ext"]).max()
        assert diff < 1e-9, f"backends disagree by {diff}"
    rows.append((f"min_dists ({len(a)}x{len(b)} pts)", times))

    times = {}
    hd = {}
    for name in volseg.available_backends():
        volseg.set_backend(name)
        times[name] = timeit(lambda: segmetrics.evaluate_pair(pair), repeats)
        hd[name] = segmetrics.hd95(pair)
    if len(hd) == 2:
        assert abs(hd["pure"] - hd["ext"]) < 1e-9
    rows.append(("evaluate_pair (end-to-end)", times))
    return rows


def _backend(name: str):
    volseg.set_backend(name)
    return volseg.get_backend()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="32,64,96")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = volseg.available_backends()
    print(f"backends available: {backends}")
    if "ext" not in backends:
        print("compiled extension not built; timing the pure backend only")

    for n in [int(s) for s in args.sizes.split(",")]:
        print(f"\n== volume {n}^3 ==")
        for op, times in bench_size(n, args.repeats):
            cells = [f"{name} {t * 1e3:8.2f} ms" for name, t in times.items()]
            if len(times) == 2:
                ratio = times["pure"] / times["ext"]
                cells.append(f"speedup x{ratio:.1f}")
            print(f"  {op:32s} " + "  ".join(cells))


if __name__ == "__main__":
    main()
