"""Panoptic and tracking quality over image sequences.

All counting is done in integers (pixel areas, intersections, tp/fp/fn);
floating point enters only in final ratios, so small hand-checkable cases are
exact.

Conventions shared by every metric here:

- A panoptic raster stores a semantic class id and an instance id per pixel.
  Instance ids are nonzero only for "thing" classes; stuff classes get
  instance 0.  The semantic id ``VOID`` (0xFFFF) marks unlabeled pixels.
- Truth-side VOID pixels are excluded from every denominator and can never
  produce false positives: a predicted segment burying more than half its
  area in truth-VOID is quietly dropped rather than counted against the
  prediction.
- Segments of one frame become *tubes* when frames are concatenated: the
  (class, instance) key glues slices across time, so temporally consistent
  ids are rewarded and id switches punished.

Quality scores:

- ``pq``: segments/tubes match when same-class IoU > 0.5 (IoU uses the union
  reduced by the prediction's overlap with truth-VOID); per class
  PQ = sum of matched IoU / (TP + FP/2 + FN/2); aggregate = mean over classes
  that appear.
- ``vpq``: PQ statistics accumulated over every temporal window of length k
  (stride 1), ratios taken once at the end.
- ``dvpq``: per (window k, threshold λ) cell, predicted pixels whose absolute
  relative depth error exceeds λ are voided, then windowed PQ as above;
  λ = inf applies no voiding and therefore reduces to plain ``vpq``
  bit-exactly.  The headline number is the mean over all cells.
- ``stq``: geometric mean of association quality (truth thing-tracks versus
  class-agnostic predicted instance tubes, full-sequence pooling) and
  segmentation quality (per-class semantic IoU over all non-void pixels).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .depthops import DepthMap

VOID = 0xFFFF

_OFFSET = np.uint64(1) << np.uint64(32)


class ShapeMismatch(ValueError):
    pass


class MissingDepth(ValueError):
    """Depth-aware evaluation was requested but a side has no depth maps."""


@dataclass(eq=False)
class PanopticMap:
    """Per-pixel (semantic class, instance id) raster.

    Ids must fit in 16 bits each (the serialized form packs them into a
    single u32).  ``instance`` is forced to 0 wherever ``semantic`` is not a
    thing class during evaluation, so stuff relabeling cannot fake tubes.
    """

    semantic: np.ndarray
    instance: np.ndarray

    def __post_init__(self):
        sem = np.asarray(self.semantic)
        inst = np.asarray(self.instance)
        if sem.ndim != 2 or sem.shape != inst.shape:
            raise ShapeMismatch(
                f"semantic {sem.shape} and instance {inst.shape} must be equal 2-D shapes"
            )
        for name, arr in (("semantic", sem), ("instance", inst)):
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"{name} ids must be integers")
            if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
                raise ValueError(f"{name} ids must fit in 16 bits")
        self.semantic = sem.astype(np.uint16)
        self.instance = inst.astype(np.uint16)

    @property
    def height(self) -> int:
        return self.semantic.shape[0]

    @property
    def width(self) -> int:
        return self.semantic.shape[1]


@dataclass
class PanopticSequence:
    """Aligned frames, optionally with per-frame depth rasters."""

    frames: list
    depths: list = None

    def __post_init__(self):
        if not all(isinstance(f, PanopticMap) for f in self.frames):
            raise TypeError("frames must be PanopticMap instances")
        shapes = {(f.height, f.width) for f in self.frames}
        if len(shapes) > 1:
            raise ShapeMismatch(f"frames disagree on size: {sorted(shapes)}")
        if self.depths is not None:
            if len(self.depths) != len(self.frames):
                raise ShapeMismatch("depth list length differs from frame list")
            for d, f in zip(self.depths, self.frames):
                if not isinstance(d, DepthMap):
                    raise TypeError("depths must be DepthMap instances")
                if (d.height, d.width) != (f.height, f.width):
                    raise ShapeMismatch("depth raster size differs from panoptic raster")

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class DvpqConfig:
    things: frozenset
    window_sizes: tuple = (1, 2, 3, 4)
    depth_thresholds: tuple = (0.1, 0.25, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "things", frozenset(int(t) for t in self.things))
        object.__setattr__(self, "window_sizes", tuple(int(k) for k in self.window_sizes))
        object.__setattr__(self, "depth_thresholds", tuple(float(v) for v in self.depth_thresholds))
        if not self.window_sizes or any(k < 1 for k in self.window_sizes):
            raise ValueError("window sizes must be >= 1")
        if not self.depth_thresholds or any(not lam > 0 for lam in self.depth_thresholds):
            raise ValueError("depth thresholds must be > 0")


@dataclass
class PqStats:
    """Integer matching statistics per class, mergeable across windows."""

    tp: dict = field(default_factory=dict)
    fp: dict = field(default_factory=dict)
    fn: dict = field(default_factory=dict)
    iou_sum: dict = field(default_factory=dict)

    def _bump(self, table, cls, amount=1):
        table[cls] = table.get(cls, 0) + amount

    def merge(self, other):
        for name in ("tp", "fp", "fn", "iou_sum"):
            mine, theirs = getattr(self, name), getattr(other, name)
            for cls, val in theirs.items():
                mine[cls] = mine.get(cls, 0) + val
        return self

    def classes(self):
        seen = set(self.tp) | set(self.fp) | set(self.fn)
        return sorted(seen)

    def per_class(self):
        out = {}
        for cls in self.classes():
            tp = self.tp.get(cls, 0)
            denom = tp + 0.5 * self.fp.get(cls, 0) + 0.5 * self.fn.get(cls, 0)
            out[cls] = self.iou_sum.get(cls, 0.0) / denom if denom else 0.0
        return out

    def aggregate(self, classes=None):
        per = self.per_class()
        if classes is not None:
            per = {c: v for c, v in per.items() if c in classes}
        if not per:
            return 0.0
        return sum(per.values()) / len(per)


@dataclass(frozen=True)
class PqResult:
    aggregate: float
    per_class: dict
    stats: PqStats


@dataclass(frozen=True)
class StqResult:
    stq: float
    aq: float
    sq: float


@dataclass(frozen=True)
class DvpqResult:
    dvpq: float
    dvpq_thing: float
    dvpq_stuff: float
    cells: tuple  # of dicts: k, lam, value, thing, stuff


def _tube_ids(maps, things):
    """Encode a list of frames as one flat uint64 raster of tube keys."""
    chunks = []
    for m in maps:
        sem = m.semantic.astype(np.uint64)
        inst = m.instance.astype(np.uint64)
        if things is not None:
            is_thing = np.isin(m.semantic, list(things))
            inst = np.where(is_thing, inst, 0)
        chunks.append((sem << np.uint64(16)) | inst)
    return np.concatenate([c.ravel() for c in chunks])


def _window_stats(pred_maps, truth_maps, things) -> PqStats:
    """Tube-level matching statistics for one aligned window of frames."""
    if not truth_maps:
        return PqStats()
    for p, t in zip(pred_maps, truth_maps):
        if (p.height, p.width) != (t.height, t.width):
            raise ShapeMismatch(
                f"prediction {p.semantic.shape} vs truth {t.semantic.shape}"
            )
    gt = _tube_ids(truth_maps, things)
    pr = _tube_ids(pred_maps, things)

    void_key = np.uint64(VOID) << np.uint64(16)

    gt_ids, gt_areas = np.unique(gt, return_counts=True)
    pr_ids, pr_areas = np.unique(pr, return_counts=True)
    gt_area = dict(zip(gt_ids.tolist(), gt_areas.tolist()))
    pr_area = dict(zip(pr_ids.tolist(), pr_areas.tolist()))
    gt_area.pop(int(void_key), None)
    pr_area.pop(int(void_key), None)

    pair_ids, pair_counts = np.unique(gt * _OFFSET + pr, return_counts=True)
    inter = {}
    void_overlap = {}
    for key, count in zip(pair_ids.tolist(), pair_counts.tolist()):
        g, p = divmod(key, int(_OFFSET))
        if g == int(void_key):
            if p != int(void_key):
                void_overlap[p] = void_overlap.get(p, 0) + count
            continue
        if p == int(void_key):
            continue
        inter[(g, p)] = count

    stats = PqStats()
    matched_gt, matched_pr = set(), set()
    for (g, p), count in inter.items():
        g_class, p_class = g >> 16, p >> 16
        if g_class != p_class:
            continue
        union = gt_area[g] + pr_area[p] - count - void_overlap.get(p, 0)
        iou = count / union
        if iou > 0.5:
            stats._bump(stats.tp, g_class)
            stats._bump(stats.iou_sum, g_class, iou)
            matched_gt.add(g)
            matched_pr.add(p)

    for g, area in gt_area.items():
        if g not in matched_gt:
            stats._bump(stats.fn, g >> 16)
    for p, area in pr_area.items():
        if p in matched_pr:
            continue
        if void_overlap.get(p, 0) / area > 0.5:
            continue
        stats._bump(stats.fp, p >> 16)
    return stats


def pq(pred_maps, truth_maps, things=None) -> PqResult:
    """Panoptic quality over one or more frames treated as a single tube set.

    ``things`` is optional: the maps already separate things from stuff via
    nonzero instance ids.  When given, instance ids on non-thing classes are
    forced to zero before matching.
    """
    if len(pred_maps) != len(truth_maps):
        raise ShapeMismatch("frame counts differ")
    things = None if things is None else frozenset(things)
    stats = _window_stats(list(pred_maps), list(truth_maps), things)
    return PqResult(stats.aggregate(), stats.per_class(), stats)


def vpq(pred_seq, truth_seq, k: int, things=None) -> PqResult:
    """Windowed panoptic quality: stats pooled over all length-k windows."""
    pred_seq, truth_seq = _coerce_sequences(pred_seq, truth_seq)
    if k < 1:
        raise ValueError("window size must be >= 1")
    things = None if things is None else frozenset(things)
    stats = PqStats()
    n = len(truth_seq)
    for start in range(n - k + 1):
        stats.merge(
            _window_stats(
                pred_seq.frames[start : start + k],
                truth_seq.frames[start : start + k],
                things,
            )
        )
    return PqResult(stats.aggregate(), stats.per_class(), stats)


def dvpq(pred_seq, truth_seq, cfg: DvpqConfig) -> DvpqResult:
    """Depth-aware VPQ over the (window, threshold) grid.

    Prediction pixels whose absolute relative depth error exceeds λ are
    voided before matching; truth is never altered.  Pixels without valid
    truth depth are never voided; pixels with valid truth depth but invalid
    predicted depth are voided (the prediction failed there).
    """
    pred_seq, truth_seq = _coerce_sequences(pred_seq, truth_seq)
    if pred_seq.depths is None or truth_seq.depths is None:
        raise MissingDepth("dvpq needs depth rasters on both sides")
    cells = []
    for lam in cfg.depth_thresholds:
        voided = _void_by_depth(pred_seq, truth_seq, lam)
        for k in cfg.window_sizes:
            result = vpq(voided, truth_seq, k, cfg.things)
            per = result.per_class
            cells.append(
                {
                    "k": int(k),
                    "lam": float(lam),
                    "value": result.aggregate,
                    "thing": _mean_over(per, cfg.things, keep=True),
                    "stuff": _mean_over(per, cfg.things, keep=False),
                }
            )
    overall = sum(c["value"] for c in cells) / len(cells)
    thing = sum(c["thing"] for c in cells) / len(cells)
    stuff = sum(c["stuff"] for c in cells) / len(cells)
    return DvpqResult(overall, thing, stuff, tuple(cells))


def _mean_over(per_class, things, keep):
    vals = [v for c, v in per_class.items() if (c in things) == keep]
    return sum(vals) / len(vals) if vals else 0.0


def _void_by_depth(pred_seq, truth_seq, lam) -> PanopticSequence:
    if math.isinf(lam):
        return pred_seq  # no voiding at all: reduces to plain vpq bit-exactly
    frames = []
    for frame, pd, td in zip(pred_seq.frames, pred_seq.depths, truth_seq.depths):
        if (pd.height, pd.width) != (td.height, td.width):
            raise ShapeMismatch("depth raster sizes differ between sides")
        joint = pd.valid & td.valid
        err = np.zeros(pd.values.shape)
        np.divide(
            np.abs(pd.values - td.values), td.values, out=err, where=joint
        )
        kill = td.valid & (~pd.valid | (err > lam))
        sem = frame.semantic.copy()
        inst = frame.instance.copy()
        sem[kill] = VOID
        inst[kill] = 0
        frames.append(PanopticMap(sem, inst))
    return PanopticSequence(frames, pred_seq.depths)


def stq(pred_seq, truth_seq, things=None) -> StqResult:
    """Segmentation-and-tracking quality √(AQ·SQ) with full-sequence tubes.

    AQ: for each truth track g (thing pixels sharing an instance id, pooled
    over all frames), every overlapping class-agnostic predicted tube p
    contributes |p∩g| · IoU(p, g); the sum is divided by |g|, and AQ averages
    this over truth tracks.  SQ: mean over semantic classes of whole-sequence
    IoU.  Truth-VOID pixels are invisible to both.
    """
    pred_seq, truth_seq = _coerce_sequences(pred_seq, truth_seq)
    if not truth_seq.frames:
        return StqResult(0.0, 0.0, 0.0)
    t_sem = np.concatenate([f.semantic.ravel() for f in truth_seq.frames])
    p_sem = np.concatenate([f.semantic.ravel() for f in pred_seq.frames])
    t_inst = np.concatenate([f.instance.ravel() for f in truth_seq.frames])
    p_inst = np.concatenate([f.instance.ravel() for f in pred_seq.frames])
    if t_sem.shape != p_sem.shape:
        raise ShapeMismatch("sequence lengths or frame sizes differ")

    valid = t_sem != VOID

    # --- association quality over instance tubes
    is_thing = (
        np.ones_like(valid)
        if things is None
        else np.isin(t_sem, list(frozenset(things)))
    )
    t_track = np.where(valid & is_thing & (t_inst > 0), t_inst, 0)
    p_track = np.where(valid & (p_inst > 0), p_inst, 0).astype(np.uint64)
    t_track = t_track.astype(np.uint64)

    gt_ids, gt_sizes = np.unique(t_track[t_track > 0], return_counts=True)
    pr_ids, pr_sizes = np.unique(p_track[p_track > 0], return_counts=True)
    pr_size = dict(zip(pr_ids.tolist(), pr_sizes.tolist()))

    both = (t_track > 0) & (p_track > 0)
    pair_ids, pair_counts = np.unique(
        t_track[both] * _OFFSET + p_track[both], return_counts=True
    )
    overlap = {}
    for key, count in zip(pair_ids.tolist(), pair_counts.tolist()):
        g, p = divmod(key, int(_OFFSET))
        overlap.setdefault(g, []).append((p, count))

    if len(gt_ids) == 0:
        aq = 0.0
    else:
        total = 0.0
        for g, size in zip(gt_ids.tolist(), gt_sizes.tolist()):
            acc = 0.0
            for p, inter in overlap.get(g, []):
                union = size + pr_size[p] - inter
                acc += inter * (inter / union)
            total += acc / size
        aq = total / len(gt_ids)

    # --- segmentation quality (semantic IoU, class-mean)
    ts, ps = t_sem[valid].astype(np.uint64), p_sem[valid].astype(np.uint64)
    pair_ids, pair_counts = np.unique(ts * _OFFSET + ps, return_counts=True)
    inter_by_class = {}
    t_count, p_count = {}, {}
    for key, count in zip(pair_ids.tolist(), pair_counts.tolist()):
        t_cls, p_cls = divmod(key, int(_OFFSET))
        if t_cls == p_cls:
            inter_by_class[t_cls] = inter_by_class.get(t_cls, 0) + count
        t_count[t_cls] = t_count.get(t_cls, 0) + count
        if p_cls != VOID:
            p_count[p_cls] = p_count.get(p_cls, 0) + count
    classes = sorted(set(t_count) | set(p_count))
    if not classes:
        sq = 0.0
    else:
        total = 0.0
        for cls in classes:
            inter = inter_by_class.get(cls, 0)
            union = t_count.get(cls, 0) + p_count.get(cls, 0) - inter
            total += inter / union if union else 0.0
        sq = total / len(classes)

    return StqResult(math.sqrt(aq * sq), aq, sq)


def _coerce_sequences(pred_seq, truth_seq):
    if not isinstance(pred_seq, PanopticSequence):
        pred_seq = PanopticSequence(list(pred_seq))
    if not isinstance(truth_seq, PanopticSequence):
        truth_seq = PanopticSequence(list(truth_seq))
    if len(pred_seq) != len(truth_seq):
        raise ShapeMismatch(
            f"sequence lengths differ: {len(pred_seq)} vs {len(truth_seq)}"
        )
    return pred_seq, truth_seq
