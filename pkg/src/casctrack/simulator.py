"""Deterministic synthetic driving scenes for exercising the tracker.

World model: objects move with constant velocity in the ground plane while
the camera translates straight forward (no rotation), so the camera-relative
state of object i at frame f is

    x(f) = x0 + vx * f                 (lateral, meters)
    z(f) = z0 + (vz - camera_speed) * f   (forward depth, meters)

and its image center is the pinhole projection (fx * x / z + cx, cy) — the
world is flat, so everything sits on the horizon line.  An object is visible
when its center lies inside the image and it is not in an occlusion window.

Randomness contract (important for reproducibility and documented so the
streams can be re-derived elsewhere): two independent Philox counter-based
generators are used.

- geometry stream, keyed by ``geometry_seed``: object placement only.  For
  each object in index order, draw uniform x0, z0, vx, vz (in that order);
  a draw that brings the object within ``min_separation`` meters of an
  earlier object at any frame is rejected and redrawn.  Changing ``seed``
  therefore never moves the ground truth.
- noise stream, keyed by ``seed``: first one standard-normal vector of
  ``embedding_dim`` per distinct latent group (group order = first
  appearance over object index), normalized to unit length; then, for every
  frame and every object in ascending order, exactly three draws — a
  standard-normal kernel-noise vector, a standard-normal depth-noise scalar,
  and a uniform dropout scalar — are consumed *unconditionally*, so
  occlusions and visibility never shift another object's noise.

A detection is emitted for a visible object unless the dropout draw fires or
the noisy depth comes out non-positive; its kernel is the renormalized
``latent + sigma_e * noise`` and its mean depth ``z * (1 + sigma_d * nu)``.
Image centers carry no noise.  Detections within a frame are ordered by
object index, which is what lets ``score_against_truth`` recover the
detection-to-object correspondence without a sidecar.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics
from .metrics import VOID, PanopticMap, stq
from .tracker import Detection


class BehindCamera(ValueError):
    """The motion model carried an object to non-positive true depth."""


@dataclass(frozen=True)
class ObjectMotion:
    """Constant-velocity ground-plane track (camera-independent)."""

    x0: float
    z0: float
    vx: float
    vz: float
    category: int = 1
    latent_group: int = None  # objects sharing a group share an embedding


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    num_objects: int
    num_frames: int
    embedding_dim: int = 32
    categories: tuple = (1,)  # cycled over objects when sampling
    camera_speed: float = 0.0
    embedding_noise_sigma: float = 0.0
    depth_noise_sigma: float = 0.0
    dropout: float = 0.0
    occlusions: tuple = ()  # (object_index, start_frame, stop_frame), half-open
    objects: tuple = None  # explicit ObjectMotion list; sampled when None
    geometry_seed: int = 1905
    x_range: tuple = (-5.0, 5.0)
    z_range: tuple = (12.0, 30.0)
    vx_range: tuple = (-0.01, 0.01)
    vz_range: tuple = (-0.02, 0.02)
    min_separation: float = 1.0

    def __post_init__(self):
        if self.num_objects < 1 or self.num_frames < 1 or self.embedding_dim < 1:
            raise ValueError("num_objects, num_frames, embedding_dim must be >= 1")
        if self.embedding_noise_sigma < 0 or self.depth_noise_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not np.isfinite(self.camera_speed):
            raise ValueError("camera_speed must be finite")
        if self.min_separation < 0:
            raise ValueError("min_separation must be >= 0")
        for name in ("x_range", "z_range", "vx_range", "vz_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be a finite (lo, hi) pair")
        if self.objects is not None:
            object.__setattr__(self, "objects", tuple(self.objects))
            if len(self.objects) != self.num_objects:
                raise ValueError("objects list length must equal num_objects")
        for obj, start, stop in self.occlusions:
            if not 0 <= obj < self.num_objects:
                raise ValueError(f"occlusion names unknown object {obj}")
            if not 0 <= start <= stop:
                raise ValueError("occlusion windows must have 0 <= start <= stop")


@dataclass(eq=False)
class GroundTruthTrack:
    """Per-frame true state of one object (arrays indexed by frame)."""

    object_id: int  # 1-based, stable
    category: int
    bev: np.ndarray  # (F, 2): lateral x, forward z, camera-relative
    centers: np.ndarray  # (F, 2): pixel (u, v)
    depths: np.ndarray  # (F,)
    visible: np.ndarray  # (F,) bool: in frame and not occluded
    detected: np.ndarray  # (F,) bool: a detection was actually emitted


@dataclass(frozen=True)
class TrackingScore:
    id_switches: int
    aq: float
    sq: float
    stq: float


def _sample_objects(cfg: ScenarioConfig):
    rng = np.random.Generator(np.random.Philox(cfg.geometry_seed))
    f = np.arange(cfg.num_frames)
    chosen, trajs = [], []
    for index in range(cfg.num_objects):
        for _ in range(1000):
            x0 = rng.uniform(*cfg.x_range)
            z0 = rng.uniform(*cfg.z_range)
            vx = rng.uniform(*cfg.vx_range)
            vz = rng.uniform(*cfg.vz_range)
            xz = np.stack([x0 + vx * f, z0 + vz * f], axis=1)
            ok = all(
                np.hypot(*(xz - other).T).min() >= cfg.min_separation
                for other in trajs
            )
            if ok:
                break
        else:
            raise ValueError(
                f"could not place object {index} with min_separation="
                f"{cfg.min_separation} after 1000 draws"
            )
        trajs.append(xz)
        chosen.append(
            ObjectMotion(x0, z0, vx, vz, cfg.categories[index % len(cfg.categories)])
        )
    return tuple(chosen)


def _trajectories(cfg: ScenarioConfig, intrinsics: CameraIntrinsics):
    objects = cfg.objects if cfg.objects is not None else _sample_objects(cfg)
    f = np.arange(cfg.num_frames, dtype=np.float64)
    xs, zs, us, vis = [], [], [], []
    for index, mot in enumerate(objects):
        x = mot.x0 + mot.vx * f
        z = mot.z0 + (mot.vz - cfg.camera_speed) * f
        if (z <= 0).any():
            first = int(np.argmax(z <= 0))
            raise BehindCamera(
                f"object {index} reaches depth {z[first]:.3f} m at frame {first}"
            )
        u = intrinsics.fx * x / z + intrinsics.cx
        visible = (u >= 0.0) & (u <= intrinsics.width)
        for obj, start, stop in cfg.occlusions:
            if obj == index:
                visible[start:stop] = False
        xs.append(x)
        zs.append(z)
        us.append(u)
        vis.append(visible)
    return objects, np.array(xs), np.array(zs), np.array(us), np.array(vis)


def _latents(cfg, objects, rng):
    group_of = []
    order = {}
    for index, mot in enumerate(objects):
        key = ("g", mot.latent_group) if mot.latent_group is not None else ("o", index)
        if key not in order:
            order[key] = len(order)
        group_of.append(order[key])
    vectors = []
    for _ in range(len(order)):
        raw = rng.standard_normal(cfg.embedding_dim)
        vectors.append(raw / np.linalg.norm(raw))
    return [vectors[g] for g in group_of]


def generate(cfg: ScenarioConfig, intrinsics: CameraIntrinsics):
    """Run the scenario; returns (per-frame Detection lists, truth tracks)."""
    objects, xs, zs, us, visible = _trajectories(cfg, intrinsics)
    noise = np.random.Generator(np.random.Philox(cfg.seed))
    latents = _latents(cfg, objects, noise)
    n, frames_out = cfg.num_objects, []
    detected = np.zeros((n, cfg.num_frames), dtype=bool)
    for f in range(cfg.num_frames):
        dets = []
        for o in range(n):
            eta = noise.standard_normal(cfg.embedding_dim)
            nu = noise.standard_normal()
            drop = noise.uniform()
            if not visible[o, f]:
                continue
            if cfg.dropout > 0.0 and drop < cfg.dropout:
                continue
            depth = zs[o, f] * (1.0 + cfg.depth_noise_sigma * nu)
            if depth <= 0.0:
                continue  # hopeless measurement, sensor stays silent
            raw = latents[o] + cfg.embedding_noise_sigma * eta
            norm = np.linalg.norm(raw)
            kernel = raw / norm if norm > 0 else latents[o]
            dets.append(
                Detection(
                    center=(us[o, f], intrinsics.cy),
                    kernel=kernel,
                    mean_depth=depth,
                    category=objects[o].category,
                    score=1.0,
                )
            )
            detected[o, f] = True
        frames_out.append(dets)
    truth = [
        GroundTruthTrack(
            object_id=o + 1,
            category=objects[o].category,
            bev=np.stack([xs[o], zs[o]], axis=1),
            centers=np.stack([us[o], np.full(cfg.num_frames, float(intrinsics.cy))], axis=1),
            depths=zs[o],
            visible=visible[o],
            detected=detected[o],
        )
        for o in range(n)
    ]
    return frames_out, truth


def score_against_truth(assignments, truth) -> TrackingScore:
    """Score tracker output against generated truth.

    assignments: one list per frame of (detection_index, track_id) pairs,
    exactly as the tracker emits them.  The correspondence between detection
    indices and objects is reconstructed from the generator's ordering
    guarantee (detections appear in object-index order).

    Association/segmentation quality comes from rasterizing each object to
    one pixel per frame (a 1 x num_objects image) and running the sequence
    metrics unchanged; id switches are counted between consecutive emitted
    detections of the same object.
    """
    truth = sorted(truth, key=lambda t: t.object_id)
    if not truth:
        raise ValueError("truth must contain at least one track")
    num_frames = truth[0].visible.size
    if len(assignments) != num_frames:
        raise ValueError(
            f"expected {num_frames} frames of assignments, got {len(assignments)}"
        )
    n = len(truth)
    things = sorted({t.category for t in truth})

    switches = 0
    truth_frames, pred_frames = [], []
    last_id = {}
    for f in range(num_frames):
        emitters = [o for o in range(n) if truth[o].detected[f]]
        pairs = dict(assignments[f])
        if len(pairs) != len(assignments[f]) or sorted(pairs) != list(range(len(emitters))):
            raise ValueError(
                f"frame {f}: assignments must cover detection indices 0..{len(emitters) - 1}"
            )
        t_sem = np.full((1, n), VOID, dtype=np.int64)
        t_inst = np.zeros((1, n), dtype=np.int64)
        p_sem = np.full((1, n), VOID, dtype=np.int64)
        p_inst = np.zeros((1, n), dtype=np.int64)
        for o in range(n):
            if truth[o].visible[f]:
                t_sem[0, o] = truth[o].category
                t_inst[0, o] = truth[o].object_id
        for det_index, o in enumerate(emitters):
            track_id = pairs[det_index]
            p_sem[0, o] = truth[o].category
            p_inst[0, o] = track_id
            if o in last_id and last_id[o] != track_id:
                switches += 1
            last_id[o] = track_id
        truth_frames.append(PanopticMap(t_sem, t_inst))
        pred_frames.append(PanopticMap(p_sem, p_inst))

    quality = stq(pred_frames, truth_frames, things)
    return TrackingScore(switches, quality.aq, quality.sq, quality.stq)


def truth_to_document(truth) -> dict:
    """JSON-ready form of the ground truth (the sidecar file payload)."""
    return {
        "format": "truth v1",
        "num_frames": int(truth[0].visible.size) if truth else 0,
        "tracks": [
            {
                "object_id": int(t.object_id),
                "category": int(t.category),
                "bev": t.bev.tolist(),
                "centers": t.centers.tolist(),
                "depths": t.depths.tolist(),
                "visible": [bool(v) for v in t.visible],
                "detected": [bool(v) for v in t.detected],
            }
            for t in truth
        ],
    }


def truth_from_document(doc) -> list:
    if doc.get("format") != "truth v1":
        raise ValueError(f"not a truth document: format={doc.get('format')!r}")
    return [
        GroundTruthTrack(
            object_id=int(t["object_id"]),
            category=int(t["category"]),
            bev=np.asarray(t["bev"], dtype=np.float64),
            centers=np.asarray(t["centers"], dtype=np.float64),
            depths=np.asarray(t["depths"], dtype=np.float64),
            visible=np.asarray(t["visible"], dtype=bool),
            detected=np.asarray(t["detected"], dtype=bool),
        )
        for t in doc["tracks"]
    ]


# --------------------------------------------------------------- scenarios


DEFAULT_INTRINSICS = CameraIntrinsics(
    fx=500.0, fy=500.0, cx=512.0, cy=256.0, width=1024, height=512
)

TABLE2_FAMILIES = ("appearance_stress", "spatial_stress", "balanced")


def table2_config(family: str, seed: int) -> ScenarioConfig:
    """Bundled stress suite mirroring the stage-ablation structure.

    - appearance_stress: embeddings are essentially pure noise (high sigma in
      a high dimension), so appearance matching finds nothing while objects
      stay far apart in the ground plane — spatial association excels.
    - spatial_stress: clean embeddings but a tight object cluster with very
      noisy depth, so ground-plane gating misleads while appearance is easy.
    - balanced: moderate noise on both channels with occasional dropout;
      neither stage alone is sufficient, the cascade recovers most of it.
    """
    common = dict(seed=int(seed), num_objects=8, num_frames=40)
    if family == "appearance_stress":
        return ScenarioConfig(
            embedding_dim=256,
            embedding_noise_sigma=8.0,
            depth_noise_sigma=0.01,
            camera_speed=0.05,
            x_range=(-6.0, 6.0),
            z_range=(14.0, 30.0),
            min_separation=2.5,
            geometry_seed=401,
            **common,
        )
    if family == "spatial_stress":
        return ScenarioConfig(
            embedding_dim=32,
            embedding_noise_sigma=0.05,
            depth_noise_sigma=0.35,
            x_range=(-1.5, 1.5),
            z_range=(10.0, 14.0),
            min_separation=0.3,
            geometry_seed=402,
            **common,
        )
    if family == "balanced":
        return ScenarioConfig(
            embedding_dim=32,
            embedding_noise_sigma=0.13,
            depth_noise_sigma=0.06,
            dropout=0.03,
            x_range=(-4.0, 4.0),
            z_range=(10.0, 22.0),
            min_separation=1.2,
            geometry_seed=403,
            **common,
        )
    raise ValueError(f"unknown table2 family {family!r}; pick one of {TABLE2_FAMILIES}")
