"""Shared synthetic-model builders used across the test modules."""

import numpy as np
import pytest

from floorpose import colmap_io as cio
from floorpose import geometry as geo


def look_at_extrinsics(center, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)):
    """World-to-camera (qvec, tvec) for a camera at ``center`` looking at ``target``."""
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    forward = forward / np.linalg.norm(forward)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, [0.0, 1.0, 0.0])
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    # camera axes expressed in world coordinates form the rows of R (world->cam)
    R = np.stack([right, down, forward])
    qvec = geo.rotmat_to_quat(R)
    tvec = -R @ center
    return qvec, tvec


def make_synthetic_model(
    seed=0,
    n_images=3,
    n_points=50,
    stem="HAND_20231220_141254",
    start_sec=0.3,
    sec_step=5.0,
    width=3840,
    height=2160,
):
    """Projectively consistent sparse model: every image observes every point.

    2D observations are exact pinhole projections of the 3D points, so
    reprojection-preservation checks have a meaningful baseline. Each image
    also carries one unmatched keypoint (sentinel -1).
    """
    rng = np.random.default_rng(seed)
    camera = cio.CameraIntrinsics(
        camera_id=1,
        model_id=cio.CAMERA_MODEL_IDS["PINHOLE"],
        width=width,
        height=height,
        params=[1600.0, 1600.0, width / 2, height / 2],
    )
    pts = rng.uniform(-1.0, 1.0, size=(n_points, 3))
    point_ids = list(range(101, 101 + n_points))

    images = {}
    angles = np.linspace(0.0, 2 * np.pi, n_images, endpoint=False)
    for i in range(n_images):
        center = np.array(
            [5.0 * np.cos(angles[i]), 5.0 * np.sin(angles[i]), 1.0 + 0.2 * i]
        )
        qvec, tvec = look_at_extrinsics(center)
        R = geo.quat_to_rotmat(qvec)
        cam_pts = pts @ R.T + tvec
        K = camera.calibration_matrix()
        uv = (cam_pts[:, :2] / cam_pts[:, 2:3]) * np.array([K[0, 0], K[1, 1]]) + np.array(
            [K[0, 2], K[1, 2]]
        )
        xys = np.vstack([uv, [[7.0 + i, 11.0 + i]]])
        p3d_ids = np.array(point_ids + [cio.INVALID_POINT3D_ID], dtype=np.int64)
        seconds = start_sec + i * sec_step
        images[i + 1] = cio.RegisteredImage(
            image_id=i + 1,
            qvec=qvec,
            tvec=tvec,
            camera_id=1,
            name=f"{stem}_frame_{seconds:05.1f}s.jpg",
            xys=xys,
            point3D_ids=p3d_ids,
        )

    points3D = {}
    for j, pid in enumerate(point_ids):
        points3D[pid] = cio.Point3D(
            point3D_id=pid,
            xyz=pts[j],
            rgb=rng.integers(0, 256, size=3, dtype=np.uint8),
            error=float(rng.uniform(0.1, 2.0)),
            image_ids=np.arange(1, n_images + 1, dtype=np.int32),
            point2D_idxs=np.full(n_images, j, dtype=np.int32),
        )

    model = cio.SparseModel(cameras={1: camera}, images=images, points3D=points3D)
    model.validate()
    return model


@pytest.fixture
def synthetic_model():
    return make_synthetic_model()


@pytest.fixture
def empty_model():
    return cio.SparseModel(cameras={}, images={}, points3D={})
