"""Reference pose-regression losses, evaluation metrics, and a retrieval baseline.

The fixed-weight loss is ``||x_hat - x|| + beta * ||q_hat - q/||q||||`` with
beta defaulting to e^5; the learnable variant replaces beta with trained
task weights, ``exp(-s_x) * trans + exp(-s_q) * rot + s_x + s_q``, with the
standard initial guesses s_x = 0 and s_q = -5. Only the ground-truth
quaternion is rescaled, exactly as the fixed form is written: the loss is
deliberately sensitive to the sign of the prediction (q_hat = -q does not
give zero), and that asymmetry is part of the reference behavior.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .colmap_io import PoseRecord
from .errors import (
    DescriptorError,
    EmptySampleError,
    InvalidQuaternionError,
    MissingGroundTruthError,
    NumericalError,
)
from .geometry import Pose6DoF, normalize_quat, rotation_error_deg

logger = logging.getLogger(__name__)

DEFAULT_BETA = math.exp(5.0)
DEFAULT_S_X = 0.0
DEFAULT_S_Q = -5.0


@dataclass(frozen=True)
class LossParams:
    beta: float = DEFAULT_BETA
    s_x: float = DEFAULT_S_X
    s_q: float = DEFAULT_S_Q
    mode: str = "fixed-beta"  # or "learnable"

    def __post_init__(self):
        if self.mode not in ("fixed-beta", "learnable"):
            raise ValueError(f"unknown loss mode {self.mode!r}")
        if self.mode == "fixed-beta" and not self.beta > 0:
            raise ValueError("beta must be positive in fixed-beta mode")


@dataclass(frozen=True)
class ErrorSample:
    image_path: str
    trans_err: float  # meters
    rot_err: float  # degrees


@dataclass(frozen=True)
class EvalSummary:
    n: int
    mean_trans: float
    median_trans: float
    mean_rot: float
    median_rot: float


@dataclass(frozen=True)
class PlanScale:
    meters_per_pixel: float

    def __post_init__(self):
        if not self.meters_per_pixel > 0:
            raise ValueError("meters_per_pixel must be positive")


def _loss_residuals(pred: Pose6DoF, gt: Pose6DoF) -> tuple[float, float]:
    trans = float(np.linalg.norm(pred.position - gt.position))
    gt_norm = float(np.linalg.norm(gt.orientation))
    if gt_norm <= 0 or not np.isfinite(gt_norm):
        raise InvalidQuaternionError("ground-truth orientation must be nonzero")
    rot = float(np.linalg.norm(pred.orientation - gt.orientation / gt_norm))
    return trans, rot


def posenet_loss(pred: Pose6DoF, gt: Pose6DoF, params: LossParams | None = None) -> float:
    params = params or LossParams()
    trans, rot = _loss_residuals(pred, gt)
    return trans + params.beta * rot


def learnable_loss(pred: Pose6DoF, gt: Pose6DoF, params: LossParams | None = None) -> float:
    params = params or LossParams(mode="learnable")
    trans, rot = _loss_residuals(pred, gt)
    return math.exp(-params.s_x) * trans + math.exp(-params.s_q) * rot + params.s_x + params.s_q


@dataclass(frozen=True)
class LearnableLossGradients:
    d_s_x: float
    d_s_q: float
    d_position: np.ndarray  # w.r.t. predicted position
    d_orientation: np.ndarray  # w.r.t. predicted (raw) quaternion


def learnable_loss_gradients(
    pred: Pose6DoF, gt: Pose6DoF, params: LossParams | None = None
) -> LearnableLossGradients:
    """Analytic partials of learnable_loss; undefined at zero residuals."""
    params = params or LossParams(mode="learnable")
    trans, rot = _loss_residuals(pred, gt)
    if trans == 0.0 or rot == 0.0:
        raise NumericalError("loss gradient is undefined at zero residual")
    w_x = math.exp(-params.s_x)
    w_q = math.exp(-params.s_q)
    gt_unit = gt.orientation / np.linalg.norm(gt.orientation)
    return LearnableLossGradients(
        d_s_x=1.0 - w_x * trans,
        d_s_q=1.0 - w_q * rot,
        d_position=w_x * (pred.position - gt.position) / trans,
        d_orientation=w_q * (pred.orientation - gt_unit) / rot,
    )


def compare_poses(
    preds: list[PoseRecord], gts: list[PoseRecord], scale: PlanScale
) -> list[ErrorSample]:
    """Per-image translation (meters) and rotation (degrees) errors.

    Matched on img_path; output sorted by img_path so parallel evaluation
    merges deterministically. The z component participates in the
    translation error.
    """
    gt_by_path = {r.img_path: r for r in gts}
    missing = [p.img_path for p in preds if p.img_path not in gt_by_path]
    if missing:
        raise MissingGroundTruthError(missing)
    samples = []
    for pred in sorted(preds, key=lambda r: r.img_path):
        gt = gt_by_path[pred.img_path]
        samples.append(
            ErrorSample(
                image_path=pred.img_path,
                trans_err=scale.meters_per_pixel * float(np.linalg.norm(pred.t - gt.t)),
                rot_err=rotation_error_deg(pred.q, gt.q),
            )
        )
    return samples


def summarize(samples: list[ErrorSample]) -> EvalSummary:
    if not samples:
        raise EmptySampleError("cannot summarize zero samples")
    trans = np.array([s.trans_err for s in samples])
    rot = np.array([s.rot_err for s in samples])
    return EvalSummary(
        n=len(samples),
        mean_trans=float(trans.mean()),
        median_trans=float(np.median(trans)),
        mean_rot=float(rot.mean()),
        median_rot=float(np.median(rot)),
    )


def cdf(samples: list[ErrorSample], axis: str) -> list[tuple[float, float]]:
    """Empirical CDF points (sorted value, cumulative fraction), last = 1.0."""
    if not samples:
        raise EmptySampleError("cannot build a CDF from zero samples")
    if axis == "trans":
        values = sorted(s.trans_err for s in samples)
    elif axis == "rot":
        values = sorted(s.rot_err for s in samples)
    else:
        raise ValueError(f"axis must be 'trans' or 'rot', got {axis!r}")
    n = len(values)
    return [(v, (i + 1) / n) for i, v in enumerate(values)]


def summary_csv(summary: EvalSummary) -> str:
    return (
        "n,mean_trans_m,median_trans_m,mean_rot_deg,median_rot_deg\n"
        f"{summary.n},{summary.mean_trans:.8f},{summary.median_trans:.8f},"
        f"{summary.mean_rot:.8f},{summary.median_rot:.8f}\n"
    )


def cdf_csv(points: list[tuple[float, float]], axis: str) -> str:
    unit = "m" if axis == "trans" else "deg"
    lines = [f"error_{unit},cumulative_fraction"]
    for v, f in points:
        lines.append(f"{v:.8f},{f:.8f}")
    return "\n".join(lines) + "\n"


def baseline_localize(query_descriptor, db, k: int = 1) -> Pose6DoF:
    """Exact nearest-neighbor pose lookup over (descriptor, pose) pairs.

    With k > 1 the position is the mean of the k nearest poses and the
    orientation is the normalized component-wise mean after aligning every
    neighbor quaternion to the first neighbor's hemisphere.
    """
    if not db:
        raise ValueError("descriptor database is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query_descriptor, dtype=np.float64)
    try:
        descs = np.stack([np.asarray(d, dtype=np.float64) for d, _ in db])
    except ValueError:
        raise DescriptorError("database descriptors have mixed dimensions") from None
    if query.shape != descs.shape[1:]:
        raise DescriptorError(
            f"query has dimension {query.shape}, database has {descs.shape[1:]}"
        )
    dists = np.linalg.norm(descs - query, axis=1)
    order = np.argsort(dists, kind="stable")[: min(k, len(db))]
    if len(order) == 1:
        return db[int(order[0])][1]
    poses = [db[int(i)][1] for i in order]
    position = np.mean([p.position for p in poses], axis=0)
    ref = poses[0].orientation
    aligned = [
        p.orientation if np.dot(p.orientation, ref) >= 0 else -p.orientation for p in poses
    ]
    return Pose6DoF(position=position, orientation=normalize_quat(np.mean(aligned, axis=0)))


def grayscale_grid_descriptor(pixels, grid: int = 16) -> np.ndarray:
    """Zero-mean, unit-norm vector of grid x grid cell-mean luminances.

    A zero-variance image has no direction to normalize; the zero vector is
    returned and a warning logged so callers can flag the frame.
    """
    img = np.asarray(pixels, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    if img.ndim == 3:
        img = img.mean(axis=2)
    if img.ndim != 2:
        raise ValueError(f"expected 2D or 3D pixel array, got shape {img.shape}")
    cells = np.empty(grid * grid)
    i = 0
    for band in np.array_split(img, grid, axis=0):
        for cell in np.array_split(band, grid, axis=1):
            cells[i] = cell.mean() if cell.size else 0.0
            i += 1
    cells -= cells.mean()
    norm = np.linalg.norm(cells)
    if norm < 1e-12:
        logger.warning("zero-variance image produced a degenerate descriptor")
        return np.zeros(grid * grid)
    return cells / norm
