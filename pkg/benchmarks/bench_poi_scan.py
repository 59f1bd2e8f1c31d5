#!/usr/bin/env python3
"""Benchmark the PoI pixel-scan kernel: numba JIT path vs pure numpy.

Builds a production-scale label raster, runs repeated nearby-PoI queries
through both kernel paths, and reports per-query timings. The numba path
is warmed up once so JIT compilation is not billed to the queries.

    python3 benchmarks/bench_poi_scan.py --size 2000 --queries 200
"""

import argparse
import math
import time

import numpy as np

from floorpose import _kernels


def build_pixel_groups(size, n_pois, n_blobs, rng):
    labels = np.zeros((size, size), dtype=np.uint16)
    for _ in range(n_blobs):
        pid = int(rng.integers(1, n_pois + 1))
        r0 = int(rng.integers(0, size - 60))
        c0 = int(rng.integers(0, size - 60))
        labels[r0 : r0 + int(rng.integers(8, 60)), c0 : c0 + int(rng.integers(8, 60))] = pid
    rr, cc = np.nonzero(labels)
    labs = labels[rr, cc].astype(np.int64)
    order = np.argsort(labs, kind="stable")
    group_ids = np.unique(labs)
    starts = np.append(np.searchsorted(labs[order], group_ids), len(labs)).astype(np.int64)
    return rr[order].astype(np.float64), cc[order].astype(np.float64), starts, len(labs)


def time_path(fn, rows, cols, starts, poses, radius_px):
    t0 = time.perf_counter()
    sink = 0.0
    for x, y, heading in poses:
        dist, _ = fn(rows, cols, starts, x, y, heading, radius_px, 60.0)
        sink += float(np.nansum(np.where(np.isfinite(dist), dist, 0.0)))
    return time.perf_counter() - t0, sink


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=2000, help="raster side in pixels")
    parser.add_argument("--pois", type=int, default=40, help="distinct PoI ids")
    parser.add_argument("--blobs", type=int, default=300, help="labeled rectangles")
    parser.add_argument("--queries", type=int, default=200, help="poses per path")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    rows, cols, starts, n_px = build_pixel_groups(args.size, args.pois, args.blobs, rng)
    poses = [
        (
            float(rng.uniform(0, args.size)),
            float(rng.uniform(0, args.size)),
            float(rng.uniform(-180, 180)),
        )
        for _ in range(args.queries)
    ]
    radius_px = args.size / 4.0
    print(
        f"raster {args.size}x{args.size}, {n_px} labeled pixels, "
        f"{len(starts) - 1} PoIs, {args.queries} queries, radius {radius_px:.0f}px"
    )

    numpy_t, numpy_sink = time_path(
        _kernels.poi_scan_numpy, rows, cols, starts, poses, radius_px
    )
    print(
        f"numpy : {numpy_t:8.3f}s total  {numpy_t / args.queries * 1e3:8.2f} ms/query"
    )

    if _kernels.NUMBA_AVAILABLE:
        # warm-up triggers compilation (or loads the on-disk cache)
        _kernels.poi_scan_numba(rows, cols, starts, 0.0, 0.0, 0.0, radius_px, 60.0)
        numba_t, numba_sink = time_path(
            _kernels.poi_scan_numba, rows, cols, starts, poses, radius_px
        )
        print(
            f"numba : {numba_t:8.3f}s total  {numba_t / args.queries * 1e3:8.2f} ms/query"
        )
        print(f"speedup: {numpy_t / numba_t:.1f}x")
        if not math.isclose(numpy_sink, numba_sink, rel_tol=1e-9):
            raise SystemExit("paths disagree; kernel bug")
    else:
        print("numba : unavailable (FLOORPOSE_NO_NUMBA set or numba not installed)")


if __name__ == "__main__":
    main()
