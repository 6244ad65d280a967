"""Pinhole projection of image detections into the bird's-eye-view plane.

Objects are assumed to move predominantly in the horizontal plane, so the
vertical image axis is dropped: a detection center (u, v) at mean depth d
maps to ground-plane coordinates (x_lateral, z_forward) = ((u - cx) * d / fx, d).
Points are camera-relative per frame; no ego-motion compensation is applied
between frames (the camera is assumed to translate forward without pure
rotation, and no motion model is imposed).
"""

import math
from dataclasses import dataclass


class NonPositiveDepth(ValueError):
    pass


class OutOfFrame(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters; fy/cy are carried for completeness but the
    ground-plane projection only consumes fx/cx."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class BevPoint:
    x_lateral: float   # meters, right positive
    z_forward: float   # meters, > 0


def project_bev(center, mean_depth: float, intrinsics: CameraIntrinsics) -> BevPoint:
    """Map an in-frame detection center plus mean depth onto the ground plane.

    Homogeneous of degree 1 in depth; exactly invertible given (u, v) and
    the intrinsics since z_forward is the depth itself.
    """
    u, v = float(center[0]), float(center[1])
    if mean_depth <= 0:
        raise NonPositiveDepth(f"mean depth must be > 0, got {mean_depth}")
    if not (0 <= u <= intrinsics.width and 0 <= v <= intrinsics.height):
        raise OutOfFrame(f"center ({u}, {v}) outside {intrinsics.width}x{intrinsics.height}")
    return BevPoint((u - intrinsics.cx) * mean_depth / intrinsics.fx, float(mean_depth))


def spatial_cost(a: BevPoint, b: BevPoint) -> float:
    """Euclidean ground-plane distance in meters."""
    return math.hypot(a.x_lateral - b.x_lateral, a.z_forward - b.z_forward)
