"""Instance-depth rasters and the numeric losses defined over them.

A depth raster is either *normalized* (dimensionless, every valid value in
[-1, 1], the per-instance shape around a mean) or *absolute* (meters, every
valid value > 0).  Normalization maps a raw activation x to 2*sigmoid(x) - 1;
denormalization re-centers a normalized raster at a mean depth with a given
half-range:  D = mean + range * normalized.

Losses:

- ``smoothness_loss``: image-gradient-weighted total variation.  Forward
  differences per axis; each axis term is averaged over the pixel pairs that
  are jointly valid (so the last column/row drops out of the x/y term), and
  the two means are summed.
- ``silog_relsq_loss``: scale-invariant logarithmic error (variance focus
  weight configurable, default 0.85) plus mean relative squared error, unit
  mixing weights.
- ``abs_rel_error``: per-pixel |pred - truth| / truth, NaN outside the joint
  validity mask.
"""

from dataclasses import dataclass

import numpy as np


class DimensionMismatch(ValueError):
    pass


class EmptyOverlap(ValueError):
    """No pixel is valid in both rasters."""


class NonPositiveResult(ValueError):
    """Denormalization produced a depth <= 0."""


@dataclass(eq=False)
class DepthMap:
    """Dense per-pixel depth raster with a validity mask.

    ``valid`` defaults to the finite entries of ``values``.  Invariants are
    checked on construction: normalized rasters stay inside [-1, 1] and
    absolute rasters stay strictly positive, on valid pixels.
    """

    values: np.ndarray
    valid: np.ndarray = None
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"depth raster must be 2-D, got shape {v.shape}")
        if self.valid is None:
            mask = np.isfinite(v)
        else:
            mask = np.asarray(self.valid, dtype=bool)
            if mask.shape != v.shape:
                raise DimensionMismatch("validity mask shape differs from values")
            mask = mask & np.isfinite(v)
        picked = v[mask]
        if self.normalized:
            if picked.size and (np.abs(picked) > 1.0).any():
                raise ValueError("normalized raster has values outside [-1, 1]")
        else:
            if picked.size and (picked <= 0.0).any():
                raise ValueError("absolute raster has values <= 0")
        self.values = v
        self.valid = mask

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(eq=False)
class GrayImage:
    """Luminance raster in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"image must be 2-D, got shape {v.shape}")
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("luminance must be finite and in [0, 1]")
        self.values = v


def rgb_to_gray(rgb) -> GrayImage:
    """ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B (channels last)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) array")
    return GrayImage(rgb @ np.array([0.299, 0.587, 0.114]))


def as_depth_map(raster, normalized=False) -> DepthMap:
    if isinstance(raster, DepthMap):
        return raster
    return DepthMap(np.asarray(raster), normalized=normalized)


def normalize_activation(logits) -> DepthMap:
    """Map raw activations to [-1, 1] via 2*sigmoid(x) - 1.

    Computed as sign(x) * tanh(|x|/2), an identical function with bit-exact
    odd symmetry and no overflow for any finite input.
    """
    x = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("activations must be finite")
    out = np.sign(x) * np.tanh(np.abs(x) / 2.0)
    return DepthMap(out, normalized=True)


def denormalize(normalized, mean_depth: float, depth_range: float) -> DepthMap:
    """Absolute raster D = mean_depth + depth_range * normalized.

    ``depth_range`` must be positive; with mean_depth > depth_range the result
    is positive by construction, otherwise any non-positive valid output
    raises NonPositiveResult.
    """
    nm = as_depth_map(normalized, normalized=True)
    if depth_range <= 0:
        raise ValueError(f"depth_range must be > 0, got {depth_range}")
    out = np.where(nm.valid, mean_depth + depth_range * nm.values, np.nan)
    if (out[nm.valid] <= 0.0).any():
        raise NonPositiveResult(
            f"denormalized depth <= 0 (mean {mean_depth}, range {depth_range})"
        )
    return DepthMap(out, valid=nm.valid.copy(), normalized=False)


def smoothness_loss(normalized, image) -> float:
    """Image-gradient-weighted smoothness of a normalized raster.

    mean over valid x-pairs of |dx D| * exp(-|dx I|)  +  same for y.
    Zero iff the raster is constant along both axes on jointly valid pairs.
    """
    nm = as_depth_map(normalized, normalized=True)
    img = image.values if isinstance(image, GrayImage) else np.asarray(image, dtype=np.float64)
    if img.shape != nm.values.shape:
        raise DimensionMismatch(
            f"image shape {img.shape} differs from raster shape {nm.values.shape}"
        )
    total = 0.0
    for axis in (1, 0):
        grad = np.abs(np.diff(nm.values, axis=axis))
        weight = np.exp(-np.abs(np.diff(img, axis=axis)))
        if axis == 1:
            pair_valid = nm.valid[:, :-1] & nm.valid[:, 1:]
        else:
            pair_valid = nm.valid[:-1, :] & nm.valid[1:, :]
        if pair_valid.any():
            total += float((grad * weight)[pair_valid].mean())
    return total


def _joint_mask(pred: DepthMap, truth: DepthMap):
    if pred.values.shape != truth.values.shape:
        raise DimensionMismatch(
            f"prediction shape {pred.values.shape} differs from truth shape "
            f"{truth.values.shape}"
        )
    joint = pred.valid & truth.valid
    if not joint.any():
        raise EmptyOverlap("no jointly valid pixel")
    return joint


def silog_relsq_loss(pred, truth, variance_focus: float = 0.85) -> float:
    """Scale-invariant log error plus relative squared error.

    silog = mean(g^2) - variance_focus * mean(g)^2 with g = log(pred) - log(truth);
    the relative squared term is mean(((pred - truth) / truth)^2).  With
    variance_focus = 1.0 the silog term is invariant to global rescaling of
    the prediction; the 0.85 default trades some of that invariance for
    absolute accuracy.  Non-negative for variance_focus <= 1, and zero iff
    pred equals truth on the joint mask.
    """
    p = as_depth_map(pred)
    t = as_depth_map(truth)
    joint = _joint_mask(p, t)
    g = np.log(p.values[joint]) - np.log(t.values[joint])
    silog = float(np.mean(g * g) - variance_focus * np.mean(g) ** 2)
    rel = (p.values[joint] - t.values[joint]) / t.values[joint]
    return silog + float(np.mean(rel * rel))


def abs_rel_error(pred, truth) -> np.ndarray:
    """Per-pixel |pred - truth| / truth; NaN where either side is invalid."""
    p = as_depth_map(pred)
    t = as_depth_map(truth)
    joint = _joint_mask(p, t)
    out = np.full(p.values.shape, np.nan)
    out[joint] = np.abs(p.values[joint] - t.values[joint]) / t.values[joint]
    return out
