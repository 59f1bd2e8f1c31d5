"""Similarity-transform estimation and whole-reconstruction geo-registration.

Anchor correspondences map reconstruction-frame camera centers onto
floor-plan world coordinates (x = plan column, y = plan row, z = floor
height). The closed-form least-squares similarity fit (SVD of the 3x3
cross-covariance with the determinant-sign correction) is exact and
deterministic; a RANSAC wrapper guards against a mis-clicked anchor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import colmap_io as cio
from .errors import (
    DegenerateConfigurationError,
    InsufficientAnchorsError,
    MissingAnchorError,
    ParseError,
    RegistrationFailedError,
)
from .geometry import SimilarityTransform, quat_conjugate, quat_multiply, quat_to_rotmat, rotmat_to_quat

DEFAULT_RANSAC_THRESHOLD = 25.0  # plan pixels, roughly the 0.5 m observed system error


@dataclass(frozen=True)
class RegistrationReport:
    transform: SimilarityTransform
    per_anchor_residuals: list[tuple[str, float]]
    rms_residual: float
    inlier_flags: list[bool] | None = None  # populated in robust mode only


@dataclass(frozen=True)
class PathPoint:
    image_name: str
    plan_x: float
    plan_y: float
    frame_seconds: float | None


@dataclass(frozen=True)
class PathValidation:
    points: list[PathPoint]
    in_bounds_fraction: float


def _as_points(arr, what: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{what} must be an (N, 3) array, got {pts.shape}")
    return pts


def estimate_similarity(src, dst) -> SimilarityTransform:
    """Least-squares similarity minimizing sum ||dst_i - (s R src_i + t)||^2.

    Requires >= 3 non-collinear source points; always returns det(R) = +1
    and s > 0. Exactly invariant under permutation of correspondences.
    """
    src = _as_points(src, "src")
    dst = _as_points(dst, "dst")
    if len(src) != len(dst):
        raise ValueError(f"src and dst lengths differ: {len(src)} vs {len(dst)}")
    n = len(src)
    if n < 3:
        raise InsufficientAnchorsError(f"need at least 3 correspondences, got {n}")

    # canonical ordering makes the float reductions independent of the
    # order correspondences were supplied in, so permuting inputs gives
    # bit-identical results
    order = np.lexsort((*src.T[::-1], *dst.T[::-1]))
    src = src[order]
    dst = dst[order]

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    src_c = src - mu_src
    dst_c = dst - mu_dst

    # collinear (or coincident) sources leave the rotation underdetermined;
    # three generic points are merely coplanar, which the rank-2 branch handles
    sv = np.linalg.svd(src_c, compute_uv=False)
    if sv[0] <= 0.0 or sv[1] < 1e-12 * sv[0]:
        raise DegenerateConfigurationError("source points are collinear or coincident")

    A = dst_c.T @ src_c / n
    U, S, Vt = np.linalg.svd(A)
    d = np.ones(3)
    if np.linalg.det(A) < 0:
        d[2] = -1.0
    rank = np.linalg.matrix_rank(A)
    if rank == 0:
        raise DegenerateConfigurationError("cross-covariance has rank 0")
    if rank == 2:
        if np.linalg.det(U) * np.linalg.det(Vt) > 0:
            R = U @ Vt
        else:
            R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    else:
        R = U @ np.diag(d) @ Vt

    var_src = src_c.var(axis=0).sum()
    scale = float(S @ d) / var_src
    if scale <= 0.0:
        raise DegenerateConfigurationError(f"recovered non-positive scale {scale}")
    t = mu_dst - scale * R @ mu_src
    return SimilarityTransform(scale=scale, rotation=rotmat_to_quat(R), translation=t)


def _residuals(transform: SimilarityTransform, src, dst) -> np.ndarray:
    return np.linalg.norm(dst - transform.apply(src), axis=1)


def _make_report(transform, src, dst, names, flags) -> RegistrationReport:
    res = _residuals(transform, src, dst)
    inliers = res if flags is None else res[np.asarray(flags)]
    rms = float(np.sqrt(np.mean(inliers**2))) if len(inliers) else 0.0
    return RegistrationReport(
        transform=transform,
        per_anchor_residuals=list(zip(names, res.tolist())),
        rms_residual=rms,
        inlier_flags=None if flags is None else [bool(f) for f in flags],
    )


def estimate_similarity_robust(
    src,
    dst,
    names=None,
    threshold: float = DEFAULT_RANSAC_THRESHOLD,
    max_iters: int = 200,
    seed: int = 0,
) -> RegistrationReport:
    """RANSAC over minimal 3-subsets, refit on the consensus set.

    Deterministic for a fixed seed. Fails with RegistrationFailedError when
    no sampled subset yields a consensus of at least 3 correspondences.
    """
    src = _as_points(src, "src")
    dst = _as_points(dst, "dst")
    n = len(src)
    if n < 4:
        raise InsufficientAnchorsError(f"robust mode needs at least 4 correspondences, got {n}")
    if names is None:
        names = [f"anchor_{i}" for i in range(n)]
    elif len(names) != n:
        raise ValueError(f"{len(names)} names for {n} correspondences")

    rng = np.random.default_rng(seed)
    best_flags = None
    best_key = (-1, np.inf)
    for _ in range(max_iters):
        idx = rng.choice(n, size=3, replace=False)
        try:
            cand = estimate_similarity(src[idx], dst[idx])
        except DegenerateConfigurationError:
            continue
        res = _residuals(cand, src, dst)
        flags = res <= threshold
        count = int(flags.sum())
        if count < 3:
            continue
        rms = float(np.sqrt(np.mean(res[flags] ** 2)))
        if (count, -rms) > (best_key[0], -best_key[1]):
            best_key = (count, rms)
            best_flags = flags
    if best_flags is None:
        raise RegistrationFailedError("no consensus set of size >= 3 found")

    refit = estimate_similarity(src[best_flags], dst[best_flags])
    return _make_report(refit, src, dst, names, best_flags)


def transform_model(model: cio.SparseModel, transform: SimilarityTransform) -> cio.SparseModel:
    """Apply a similarity to every extrinsic and 3D point of a model.

    Camera centers move with the points (C' = T(C)) and viewing directions
    rotate with T's rotation, so reprojections are preserved: the update is
    qvec' = qvec o R^-1 and tvec' = -R(qvec') C'.
    """
    rot_inv = quat_conjugate(transform.rotation)
    images = {}
    for image_id, img in model.images.items():
        qvec_new = quat_multiply(img.qvec, rot_inv)
        center_new = transform.apply(img.camera_center())
        tvec_new = -quat_to_rotmat(qvec_new) @ center_new
        images[image_id] = replace(img, qvec=qvec_new, tvec=tvec_new)

    points = {
        pid: replace(pt, xyz=transform.apply(pt.xyz)) for pid, pt in model.points3D.items()
    }
    return cio.SparseModel(cameras=model.cameras, images=images, points3D=points)


def anchor_world_coords(anchors) -> np.ndarray:
    """Plan-world coordinates of anchors: (x, y, z) = (col, row, floor height)."""
    return np.array([[a.plan_col, a.plan_row, a.plan_z] for a in anchors], dtype=np.float64)


def validate_anchors(anchors, plan) -> None:
    """Reject anchors pinned outside the floor-plan raster."""
    bad = [
        a.image_name
        for a in anchors
        if not (0 <= a.plan_col < plan.width and 0 <= a.plan_row < plan.height)
    ]
    if bad:
        raise RegistrationFailedError(f"anchors outside the plan raster: {bad}")


def georegister_model(
    model: cio.SparseModel,
    anchors,
    robust: bool = False,
    threshold: float = DEFAULT_RANSAC_THRESHOLD,
    seed: int = 0,
) -> tuple[cio.SparseModel, RegistrationReport]:
    """Fit the similarity from anchor camera centers to plan positions and apply it."""
    if not anchors:
        raise InsufficientAnchorsError("no anchors given")
    by_name = {img.name: img for img in model.images.values()}
    names = [a.image_name for a in anchors]
    missing = [n for n in names if n not in by_name]
    if missing:
        raise MissingAnchorError(missing)

    src = np.array([by_name[n].camera_center() for n in names])
    dst = anchor_world_coords(anchors)
    if robust:
        report = estimate_similarity_robust(src, dst, names, threshold=threshold, seed=seed)
    else:
        transform = estimate_similarity(src, dst)
        report = _make_report(transform, src, dst, names, None)
    return transform_model(model, report.transform), report


def path_points(model: cio.SparseModel) -> list[PathPoint]:
    """Per-image plan coordinates in visit order (ascending frame seconds)."""
    rows = []
    for img in model.images.values():
        try:
            seconds = cio.parse_frame_name(img.name).frame_seconds
        except ParseError:
            seconds = None
        c = img.camera_center()
        rows.append(PathPoint(img.name, float(c[0]), float(c[1]), seconds))
    rows.sort(key=lambda p: (p.frame_seconds is None, p.frame_seconds or 0.0, p.image_name))
    return rows


def validate_path(model: cio.SparseModel, plan) -> PathValidation:
    """Check how much of the registered path lands inside the plan raster."""
    points = path_points(model)
    if not points:
        return PathValidation(points=[], in_bounds_fraction=0.0)
    inside = sum(
        1 for p in points if 0.0 <= p.plan_x < plan.width and 0.0 <= p.plan_y < plan.height
    )
    return PathValidation(points=points, in_bounds_fraction=inside / len(points))


def write_path_csv(points: list[PathPoint]) -> str:
    lines = ["image_name,plan_x,plan_y,frame_seconds"]
    for p in points:
        seconds = "" if p.frame_seconds is None else f"{p.frame_seconds}"
        lines.append(f"{p.image_name},{p.plan_x:.8f},{p.plan_y:.8f},{seconds}")
    return "\n".join(lines) + "\n"
