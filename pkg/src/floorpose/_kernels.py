"""Hot inner-loop kernels: numba-jitted when available, pure numpy otherwise.

The PoI pixel scan runs once per localized frame over every labeled plan
pixel, which is the only loop in the toolkit whose input grows with raster
size rather than record count. Set ``FLOORPOSE_NO_NUMBA=1`` to force the
numpy path; it is also selected automatically when numba is not
importable. Both paths share the same tie rule (first minimum in the
grouped row-major pixel order), so their outputs are interchangeable.

``benchmarks/bench_poi_scan.py`` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np


def numba_disabled_by_env() -> bool:
    return os.environ.get("FLOORPOSE_NO_NUMBA", "") not in ("", "0")


def poi_scan_numpy(rows, cols, group_starts, pos_x, pos_y, heading_deg, radius_px, half_fov_deg):
    """Nearest qualifying pixel per group; inf distance marks an empty group.

    rows/cols hold the labeled pixel coordinates, grouped contiguously per
    PoI id with ``group_starts`` offsets (length n_groups + 1).
    """
    n_groups = len(group_starts) - 1
    best_dist = np.full(n_groups, np.inf)
    best_bearing = np.full(n_groups, np.inf)
    dx = cols - pos_x
    dy = rows - pos_y
    dist = np.hypot(dx, dy)
    bearing = np.degrees(np.arctan2(dy, dx)) - heading_deg
    bearing = np.mod(bearing, 360.0)
    bearing = np.where(bearing > 180.0, bearing - 360.0, bearing)
    ok = (dist <= radius_px) & (np.abs(bearing) <= half_fov_deg)
    masked = np.where(ok, dist, np.inf)
    for g in range(n_groups):
        s, e = group_starts[g], group_starts[g + 1]
        if s == e:
            continue
        i = int(np.argmin(masked[s:e]))
        if np.isfinite(masked[s + i]):
            best_dist[g] = dist[s + i]
            best_bearing[g] = bearing[s + i]
    return best_dist, best_bearing


def _poi_scan_loop(rows, cols, group_starts, pos_x, pos_y, heading_deg, radius_px, half_fov_deg):
    n_groups = len(group_starts) - 1
    best_dist = np.full(n_groups, np.inf)
    best_bearing = np.full(n_groups, np.inf)
    for g in range(n_groups):
        for i in range(group_starts[g], group_starts[g + 1]):
            dx = cols[i] - pos_x
            dy = rows[i] - pos_y
            d = math.hypot(dx, dy)
            if d > radius_px:
                continue
            b = (math.degrees(math.atan2(dy, dx)) - heading_deg) % 360.0
            if b > 180.0:
                b -= 360.0
            if abs(b) > half_fov_deg:
                continue
            if d < best_dist[g]:
                best_dist[g] = d
                best_bearing[g] = b
    return best_dist, best_bearing


NUMBA_AVAILABLE = False
poi_scan_numba = None
if not numba_disabled_by_env():
    try:
        from numba import njit

        poi_scan_numba = njit(cache=True)(_poi_scan_loop)
        NUMBA_AVAILABLE = True
    except ImportError:
        pass

poi_scan = poi_scan_numba if NUMBA_AVAILABLE else poi_scan_numpy
