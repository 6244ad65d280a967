"""Two-stage cascaded tracking-by-association.

Each frame's detections are matched against the live tracklets stage by
stage: an appearance stage ("am", cosine distance between kernel embeddings)
and a spatial stage ("sm", Euclidean distance between ground-plane
projections).  Pairs whose class labels differ are forbidden outright in
every stage; each stage additionally gates its costs before solving an exact
assignment, and whatever remains unmatched flows to the next stage.
Detections that survive all stages unmatched open fresh tracks with
monotonically increasing ids; tracklets unseen for more than ``max_age``
frames are retired.

All numeric state that can be serialized (centers, depths, kernels, scores)
is held at float32 precision so that a written-and-reread sequence replays
bit-identically; cost arithmetic happens in float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, project_bev
from .lapsolver import FORBIDDEN, CostMatrix, apply_gate, solve

APPEARANCE_STAGE = "am"
SPATIAL_STAGE = "sm"
_STAGES = (APPEARANCE_STAGE, SPATIAL_STAGE)


class ZeroNormKernel(ValueError):
    pass


class NonMonotonicFrame(ValueError):
    pass


class IntrinsicsRequired(ValueError):
    """The spatial stage was requested but no camera intrinsics were given."""


@dataclass
class Detection:
    """One per-frame object proposal.

    center: (u, v) pixels; kernel: appearance embedding (any fixed length);
    mean_depth: meters (> 0); category: class label; score: confidence [0, 1].
    Values are quantized to float32 on construction.
    """

    center: tuple
    kernel: np.ndarray
    mean_depth: float
    category: int
    score: float

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float32)
        if kernel.ndim != 1 or kernel.size == 0:
            raise ValueError("kernel must be a non-empty 1-D vector")
        if not np.isfinite(kernel).all():
            raise ValueError("kernel entries must be finite")
        if float(np.linalg.norm(kernel.astype(np.float64))) == 0.0:
            raise ZeroNormKernel("kernel norm is zero")
        self.kernel = kernel
        u, v = self.center
        self.center = (float(np.float32(u)), float(np.float32(v)))
        self.mean_depth = float(np.float32(self.mean_depth))
        if not self.mean_depth > 0:
            raise ValueError(f"mean_depth must be > 0, got {self.mean_depth}")
        self.score = float(np.float32(self.score))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        self.category = int(self.category)


@dataclass
class Tracklet:
    detection: Detection   # latest matched state
    track_id: int
    last_seen: int         # frame index of the last match
    age: int = 0           # frames since the last match


@dataclass(frozen=True)
class TrackerConfig:
    stages: tuple = (APPEARANCE_STAGE, SPATIAL_STAGE)
    am_gate: float = 0.5     # cosine distance, [0, 2]
    sm_gate: float = 2.0     # meters
    max_age: int = 1         # retire when age exceeds this
    kernel_update: str = "replace"   # "replace" | "ema"
    ema_alpha: float = 0.5           # weight of the newest kernel under "ema"

    def __post_init__(self):
        if not self.stages:
            raise ValueError("at least one stage is required")
        for s in self.stages:
            if s not in _STAGES:
                raise ValueError(f"unknown stage {s!r}; expected 'am' or 'sm'")
        if self.am_gate < 0 or self.sm_gate < 0:
            raise ValueError("gates must be >= 0")
        if self.max_age < 1:
            raise ValueError("max_age must be >= 1")
        if self.kernel_update not in ("replace", "ema"):
            raise ValueError("kernel_update must be 'replace' or 'ema'")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValueError("ema_alpha must be in (0, 1]")


@dataclass
class TrackerState:
    active: list = field(default_factory=list)
    next_id: int = 1
    frame: int = -1


def _kernel_rows(objs):
    kernels = [np.asarray(o.kernel, dtype=np.float64) for o in objs]
    dim = kernels[0].size
    for k in kernels:
        if k.size != dim:
            raise ValueError("kernel dimensions differ")
    return np.stack(kernels)


def appearance_cost(detections, tracklets) -> CostMatrix:
    """Cosine-distance table (1 - cos angle), class mismatches forbidden.

    Finite entries are clipped into [0, 2] to absorb rounding at the
    extremes.
    """
    n, m = len(detections), len(tracklets)
    if n == 0 or m == 0:
        return CostMatrix(np.zeros((n, m)))
    dk = _kernel_rows(detections)
    tk = _kernel_rows([t.detection for t in tracklets])
    if dk.shape[1] != tk.shape[1]:
        raise ValueError("kernel dimensions differ")
    dn = np.linalg.norm(dk, axis=1)
    tn = np.linalg.norm(tk, axis=1)
    if not (dn > 0).all() or not (tn > 0).all():
        raise ZeroNormKernel("kernel norm is zero")
    costs = 1.0 - (dk / dn[:, None]) @ (tk / tn[:, None]).T
    np.clip(costs, 0.0, 2.0, out=costs)
    dcat = np.array([d.category for d in detections])
    tcat = np.array([t.detection.category for t in tracklets])
    costs[dcat[:, None] != tcat[None, :]] = FORBIDDEN
    return CostMatrix(costs)


def spatial_cost_matrix(detections, tracklets, intrinsics: CameraIntrinsics) -> CostMatrix:
    """Ground-plane Euclidean distance table (meters), class mismatches forbidden."""
    n, m = len(detections), len(tracklets)
    if n == 0 or m == 0:
        return CostMatrix(np.zeros((n, m)))
    dp = np.array([_bev_xy(d, intrinsics) for d in detections])
    tp = np.array([_bev_xy(t.detection, intrinsics) for t in tracklets])
    costs = np.hypot(dp[:, 0:1] - tp[None, :, 0], dp[:, 1:2] - tp[None, :, 1])
    dcat = np.array([d.category for d in detections])
    tcat = np.array([t.detection.category for t in tracklets])
    costs[dcat[:, None] != tcat[None, :]] = FORBIDDEN
    return CostMatrix(costs)


def _bev_xy(detection, intrinsics):
    p = project_bev(detection.center, detection.mean_depth, intrinsics)
    return p.x_lateral, p.z_forward


def step(state: TrackerState, detections, intrinsics=None, config=None, frame=None):
    """Advance the tracker by one frame.

    Returns ``(state, assignments)`` where assignments is a list of
    ``(detection index, track_id)`` covering every detection exactly once.
    ``state`` is updated in place and returned for convenience.  ``frame``
    defaults to ``state.frame + 1``; explicit indices may skip ahead (sparse
    annotation), but never backwards or in place.
    """
    config = config if config is not None else TrackerConfig()
    frame = state.frame + 1 if frame is None else int(frame)
    if frame <= state.frame:
        raise NonMonotonicFrame(f"frame {frame} does not advance past {state.frame}")
    if SPATIAL_STAGE in config.stages and intrinsics is None:
        raise IntrinsicsRequired("spatial stage requires camera intrinsics")

    assignments = {}
    unmatched_d = list(range(len(detections)))
    unmatched_t = list(range(len(state.active)))

    for stage in config.stages:
        if not unmatched_d or not unmatched_t:
            break
        dets = [detections[i] for i in unmatched_d]
        trks = [state.active[j] for j in unmatched_t]
        if stage == APPEARANCE_STAGE:
            costs, gate = appearance_cost(dets, trks), config.am_gate
        else:
            costs, gate = spatial_cost_matrix(dets, trks, intrinsics), config.sm_gate
        matching = solve(apply_gate(costs, gate))
        for li, lj in matching.pairs:
            di, tj = unmatched_d[li], unmatched_t[lj]
            tracklet = state.active[tj]
            _absorb(tracklet, detections[di], frame, config)
            assignments[di] = tracklet.track_id
        unmatched_d = [unmatched_d[i] for i in matching.unmatched_rows]
        unmatched_t = [unmatched_t[j] for j in matching.unmatched_cols]

    for di in unmatched_d:
        track_id = state.next_id
        state.next_id += 1
        state.active.append(Tracklet(detections[di], track_id, frame, 0))
        assignments[di] = track_id

    survivors = []
    for t in state.active:
        if t.last_seen < frame:
            t.age = frame - t.last_seen
        if t.age <= config.max_age:
            survivors.append(t)
    state.active = survivors
    state.frame = frame
    return state, [(i, assignments[i]) for i in range(len(detections))]


def _absorb(tracklet, detection, frame, config):
    if config.kernel_update == "ema":
        a = np.float32(config.ema_alpha)
        kernel = a * detection.kernel + (np.float32(1.0) - a) * tracklet.detection.kernel
    else:
        kernel = detection.kernel
    tracklet.detection = Detection(
        detection.center, kernel, detection.mean_depth, detection.category, detection.score
    )
    tracklet.last_seen = frame
    tracklet.age = 0
