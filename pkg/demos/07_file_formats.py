# The on-disk formats, round-tripped in a temp directory: detection text
# files, track records, the little binary raster container, intrinsics, and
# stable-bytes JSON results.

import tempfile
from pathlib import Path

import numpy as np

from casctrack import io
from casctrack.depthops import DepthMap
from casctrack.geometry import CameraIntrinsics
from casctrack.metrics import PanopticMap
from casctrack.tracker import Detection

root = Path(tempfile.mkdtemp(prefix="casctrack_formats_"))
print("writing into", root)

# --- detections -----------------------------------------------------------
rng = np.random.default_rng(1)
det = lambda: Detection(center=(rng.uniform(0, 1024), 256.0),
                        kernel=rng.normal(size=8),
                        mean_depth=rng.uniform(5, 40),
                        category=1, score=0.9)
frames = [(0, [det(), det()]), (1, [det()]), (3, [])]  # frame 2 legitimately absent
io.write_detections(root / "dets.txt", "demo-seq", frames)
print("\ndetections file head:")
for line in (root / "dets.txt").read_text().splitlines()[:3]:
    print("   ", line[:88] + ("..." if len(line) > 88 else ""))

seq, dim, back = io.read_detections(root / "dets.txt")
kernels_match = all(
    np.array_equal(a.kernel, b.kernel)
    for (_, xs), (_, ys) in zip(frames, back) for a, b in zip(xs, ys)
)
print(f"round-trip: sequence={seq!r} kernel_dim={dim} frames={len(back)} "
      f"kernels bit-identical={kernels_match}")
# (floats are printed with %.9g, which is lossless for the float32 kernels)

# --- tracks ---------------------------------------------------------------
io.write_tracks(root / "tracks.txt", "demo-seq", [(0, 0, 1), (0, 1, 2), (1, 0, 1)])
print("\ntracks file:", (root / "tracks.txt").read_text().splitlines()[1:])

# --- rasters ----------------------------------------------------------------
# One container for both panoptic (class<<16 | instance, uint32) and depth
# (float32, NaN = invalid) rasters; a one-byte kind field tells them apart.
pan = PanopticMap(np.full((2, 3), 7), np.arange(6).reshape(2, 3))
io.write_raster(root / "frame.seg.upr", pan)
blob = (root / "frame.seg.upr").read_bytes()
print(f"\npanoptic raster: {len(blob)} bytes "
      f"(15 header + {pan.semantic.size} * 4 payload), magic={blob[:4]!r}")
again = io.read_raster(root / "frame.seg.upr")
print("round-trip equal:", np.array_equal(again.semantic, pan.semantic)
      and np.array_equal(again.instance, pan.instance))

depth = DepthMap(np.where(np.eye(3) > 0, np.nan, 12.5))
io.write_raster(root / "frame.dep.upr", depth)
got = io.read_raster(root / "frame.dep.upr")
print("depth raster keeps its holes:", int(np.sum(~got.valid)), "invalid px")

# --- intrinsics + results ---------------------------------------------------
io.write_intrinsics(root / "cam.txt", CameraIntrinsics(500.0, 500.0, 512.0, 256.0,
                                                       1024, 512))
print("\nintrinsics:", (root / "cam.txt").read_text().replace("\n", "  ").strip())

io.write_results(root / "r.json", {"stq": 0.5, "aq": 0.25, "sq": 1.0})
a = (root / "r.json").read_bytes()
io.write_results(root / "r.json", {"sq": 1.0, "aq": 0.25, "stq": 0.5})  # reordered
print("results JSON is byte-stable under key reordering:",
      a == (root / "r.json").read_bytes())
