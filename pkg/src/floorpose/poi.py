"""Floor-plan raster with pixel-level PoI labels and nearby-PoI queries.

The plan lives in raster coordinates: x is the column (pixels from the
left edge), y is the row (pixels from the top edge), and registered poses
use the same axes. Heading convention, frozen here: 0 degrees points along
plan +x and angles grow toward +y, i.e. clockwise when the raster is viewed
with row 0 at the top. Bearings are reported relative to the camera heading
in (-180, 180], 0 dead ahead, positive to the right.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import _kernels
from .errors import FloorPlanLoadError, OutOfBoundsError, UndefinedHeadingError
from .geometry import Pose6DoF, quat_rotate

# cameras pointing within this many degrees of the plan normal have no
# usable heading
VERTICAL_LIMIT_DEG = 5.0


@dataclass(frozen=True)
class PoIEntry:
    name: str
    category: str


@dataclass(frozen=True)
class PoIHit:
    poi_id: int
    name: str
    distance: float  # meters
    bearing: float  # degrees relative to camera heading, (-180, 180]


@dataclass(frozen=True)
class FloorPlan:
    width: int
    height: int
    meters_per_pixel: float
    label_map: np.ndarray  # (height, width), 0 = unlabeled
    registry: dict[int, PoIEntry]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("plan dimensions must be positive")
        if not self.meters_per_pixel > 0:
            raise ValueError("meters_per_pixel must be positive")
        labels = np.asarray(self.label_map)
        if labels.shape != (self.height, self.width):
            raise ValueError(
                f"label map shape {labels.shape} does not match plan "
                f"{self.height}x{self.width}"
            )
        object.__setattr__(self, "label_map", labels)
        present = set(np.unique(labels).tolist()) - {0}
        unknown = present - set(self.registry)
        if unknown:
            raise ValueError(f"labels without registry entries: {sorted(unknown)}")
        # per-PoI pixel lists, grouped contiguously and row-major within a
        # group; this is the only spatial structure the queries need
        rr, cc = np.nonzero(labels)
        labs = labels[rr, cc].astype(np.int64)
        order = np.argsort(labs, kind="stable")
        group_ids = np.unique(labs)
        starts = np.searchsorted(labs[order], group_ids)
        starts = np.append(starts, len(labs)).astype(np.int64)
        object.__setattr__(self, "_px_rows", rr[order].astype(np.float64))
        object.__setattr__(self, "_px_cols", cc[order].astype(np.float64))
        object.__setattr__(self, "_group_ids", group_ids)
        object.__setattr__(self, "_group_starts", starts)


def heading_from_pose(pose: Pose6DoF) -> float:
    """Compass angle of the camera optical axis projected onto the plan.

    The optical axis is camera +z rotated into the world; its (x, y) part
    gives the heading. Raises when the axis is within VERTICAL_LIMIT_DEG of
    the plan normal, where the projection direction is meaningless.
    """
    axis = quat_rotate(pose.orientation, [0.0, 0.0, 1.0])
    planar = math.hypot(axis[0], axis[1])
    if planar < math.sin(math.radians(VERTICAL_LIMIT_DEG)) * np.linalg.norm(axis):
        raise UndefinedHeadingError("camera points within 5 degrees of vertical")
    return math.degrees(math.atan2(axis[1], axis[0]))


def pois_near(plan: FloorPlan, pose: Pose6DoF, radius: float, fov: float = 360.0) -> list[PoIHit]:
    """PoIs with a labeled pixel within ``radius`` meters and the field of view.

    One hit per PoI id, measured at its nearest qualifying pixel; sorted by
    distance, ties broken by poi_id. ``fov=360`` disables the bearing filter
    (radius-only reporting).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 < fov <= 360:
        raise ValueError("fov must be in (0, 360]")
    x, y = float(pose.position[0]), float(pose.position[1])
    if not (0 <= x < plan.width and 0 <= y < plan.height):
        raise OutOfBoundsError(f"pose ({x:.2f}, {y:.2f}) is outside the plan raster")
    heading = heading_from_pose(pose)

    dist_px, bearing = _kernels.poi_scan(
        plan._px_rows,
        plan._px_cols,
        plan._group_starts,
        x,
        y,
        heading,
        radius / plan.meters_per_pixel,
        fov / 2.0,
    )
    hits = []
    for g, poi_id in enumerate(plan._group_ids):
        if not np.isfinite(dist_px[g]):
            continue
        poi_id = int(poi_id)
        hits.append(
            PoIHit(
                poi_id=poi_id,
                name=plan.registry[poi_id].name,
                distance=dist_px[g] * plan.meters_per_pixel,
                bearing=float(bearing[g]),
            )
        )
    hits.sort(key=lambda h: (h.distance, h.poi_id))
    return hits


def _read_label_array(labels_file: Path) -> np.ndarray:
    img = Image.open(labels_file)
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise FloorPlanLoadError(f"label raster {labels_file} must be single-channel")
    if arr.dtype not in (np.uint8, np.uint16, np.int32):
        raise FloorPlanLoadError(f"label raster {labels_file} has dtype {arr.dtype}")
    return arr.astype(np.uint16)


def load_floorplan(raster_file, labels_file, meta_file) -> FloorPlan:
    """Assemble a FloorPlan from the plan image, 16-bit label PNG, and JSON meta.

    The meta file supplies ``meters_per_pixel`` and the ``registry`` mapping
    ``{poi_id: {name, category}}``.
    """
    raster_file, labels_file, meta_file = Path(raster_file), Path(labels_file), Path(meta_file)
    meta = json.loads(meta_file.read_text())
    try:
        mpp = float(meta["meters_per_pixel"])
        registry_raw = meta["registry"]
    except KeyError as e:
        raise FloorPlanLoadError(f"meta file {meta_file} is missing key {e}") from None
    if mpp <= 0:
        raise FloorPlanLoadError("meters_per_pixel must be positive")
    registry = {}
    for key, entry in registry_raw.items():
        try:
            registry[int(key)] = PoIEntry(name=entry["name"], category=entry["category"])
        except (KeyError, ValueError) as e:
            raise FloorPlanLoadError(f"bad registry entry {key!r}: {e}") from None

    with Image.open(raster_file) as img:
        plan_w, plan_h = img.size
    labels = _read_label_array(labels_file)
    if labels.shape != (plan_h, plan_w):
        raise FloorPlanLoadError(
            f"label raster is {labels.shape[1]}x{labels.shape[0]} but plan image "
            f"is {plan_w}x{plan_h}"
        )
    try:
        return FloorPlan(
            width=plan_w,
            height=plan_h,
            meters_per_pixel=mpp,
            label_map=labels,
            registry=registry,
        )
    except ValueError as e:
        raise FloorPlanLoadError(str(e)) from None


def load_floorplan_from_meta(meta_file) -> FloorPlan:
    """Resolve plan_image / label_image paths from the meta file's directory."""
    meta_file = Path(meta_file)
    meta = json.loads(meta_file.read_text())
    try:
        raster = meta_file.parent / meta["plan_image"]
        labels = meta_file.parent / meta["label_image"]
    except KeyError as e:
        raise FloorPlanLoadError(f"meta file {meta_file} is missing key {e}") from None
    return load_floorplan(raster, labels, meta_file)
