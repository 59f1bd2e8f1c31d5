"""Independent brute-force PoI query oracle plus random fixture generation.

The oracle scans every labeled pixel of the raw label map in row-major
order with plain Python math, keeping the first strict minimum per PoI id.
It deliberately shares no code with the kernel under test (only the
heading convention, which is part of the query's definition).
"""

import math

import numpy as np

from floorpose import poi as poi_mod


def brute_force_hits(plan, pose, radius, fov):
    heading = poi_mod.heading_from_pose(pose)
    x, y = float(pose.position[0]), float(pose.position[1])
    mpp = plan.meters_per_pixel
    best = {}
    labels = np.asarray(plan.label_map)
    # np.argwhere enumerates row-major, preserving the first-minimum tie rule;
    # unlabeled pixels can never qualify, so the scan stays exhaustive
    for r, c in np.argwhere(labels != 0):
        pid = int(labels[r, c])
        dx = c - x
        dy = r - y
        dist_px = math.hypot(dx, dy)
        if dist_px * mpp > radius:
            continue
        bearing = (math.degrees(math.atan2(dy, dx)) - heading) % 360.0
        if bearing > 180.0:
            bearing -= 360.0
        if abs(bearing) > fov / 2.0:
            continue
        if pid not in best or dist_px < best[pid][0]:
            best[pid] = (dist_px, bearing)
    hits = [
        poi_mod.PoIHit(pid, plan.registry[pid].name, d * mpp, b)
        for pid, (d, b) in best.items()
    ]
    hits.sort(key=lambda h: (h.distance, h.poi_id))
    return hits


def random_plan(rng, size=256, n_pois=8, n_blobs=30, mpp=0.05):
    """Sparse random label field: rectangular patches of random PoI ids."""
    labels = np.zeros((size, size), dtype=np.uint16)
    for _ in range(n_blobs):
        pid = int(rng.integers(1, n_pois + 1))
        r0 = int(rng.integers(0, size - 4))
        c0 = int(rng.integers(0, size - 4))
        hgt = int(rng.integers(1, 12))
        wid = int(rng.integers(1, 12))
        labels[r0 : r0 + hgt, c0 : c0 + wid] = pid
    registry = {
        i: poi_mod.PoIEntry(name=f"poi_{i}", category="area") for i in range(1, n_pois + 1)
    }
    return poi_mod.FloorPlan(
        width=size, height=size, meters_per_pixel=mpp, label_map=labels, registry=registry
    )


def random_horizontal_pose(rng, plan):
    """Pose inside the raster whose optical axis is far from vertical."""
    from floorpose import geometry as geo

    x = float(rng.uniform(0, plan.width - 1))
    y = float(rng.uniform(0, plan.height - 1))
    heading = float(rng.uniform(-math.pi, math.pi))
    tilt = float(rng.uniform(-0.6, 0.6))  # radians off horizontal
    # start from z->x (horizontal look along +x), tilt about y, then yaw about z
    base = np.array([math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4), 0.0])
    tilt_q = np.array([math.cos(tilt / 2), 0.0, math.sin(tilt / 2), 0.0])
    yaw_q = np.array([math.cos(heading / 2), 0.0, 0.0, math.sin(heading / 2)])
    orientation = geo.quat_multiply(yaw_q, geo.quat_multiply(tilt_q, base))
    return geo.Pose6DoF(position=[x, y, 0.0], orientation=orientation)
