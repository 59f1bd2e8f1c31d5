"""Toolkit for building and evaluating floor-plan-registered camera-pose datasets."""

from .geometry import (
    Pose6DoF,
    SimilarityTransform,
    camera_center_from_extrinsics,
    rotation_error_deg,
    translation_error,
)

__all__ = [
    "Pose6DoF",
    "SimilarityTransform",
    "camera_center_from_extrinsics",
    "rotation_error_deg",
    "translation_error",
]

__version__ = "0.1.0"
