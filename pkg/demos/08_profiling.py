# How much does tracking cost per frame?  The profile command times each
# stage set over a detection file and reports deltas against a no-tracking
# pass (detections consumed, fresh ids handed out, no matching).
#
# This drives the CLI in-process; the same thing works from a shell:
#   casctrack profile --detections dets.txt --repetitions 5 --out prof.json

import json
import tempfile
from pathlib import Path

from casctrack import cli, io
from casctrack.simulator import DEFAULT_INTRINSICS, ScenarioConfig, generate

root = Path(tempfile.mkdtemp(prefix="casctrack_profile_"))

# a mid-sized load: 40 objects, all visible, noisy embeddings so the
# appearance stage cannot shortcut the work
cfg = ScenarioConfig(
    seed=2, num_objects=40, num_frames=80, embedding_dim=128,
    embedding_noise_sigma=4.0, depth_noise_sigma=0.02,
    x_range=(-15.0, 15.0), z_range=(20.0, 90.0),
    vx_range=(0.0, 0.0), vz_range=(0.0, 0.0), min_separation=0.8,
)
frames, _ = generate(cfg, DEFAULT_INTRINSICS)
io.write_detections(root / "dets.txt", "bench", list(enumerate(frames)),
                    kernel_dim=cfg.embedding_dim)

code = cli.main(["profile", "--detections", str(root / "dets.txt"),
                 "--repetitions", "3", "--out", str(root / "prof.json")])
assert code == 0

doc = json.loads((root / "prof.json").read_text())
print(f"{doc['frames']} frames, up to {doc['detections_per_frame']} detections each\n")
print(f"{'stage set':<10} {'mean':>8} {'p50':>8} {'p99':>8} {'delta':>8}   (ms/frame)")
for name in ("none", "am", "sm", "am_sm"):
    s = doc["per_stage"][name]
    print(f"{name:<10} {s['mean_ms']:>8.3f} {s['p50_ms']:>8.3f} "
          f"{s['p99_ms']:>8.3f} {s['delta_ms']:>8.3f}")

print("""
Notes:
  - the first pass is a warmup (JIT compilation happens there, not in the
    numbers above);
  - 'none' is the baseline every delta is measured against, so its delta
    is 0 by definition;
  - a bar chart of the deltas lands next to the JSON as prof.json.svg, and
    the run manifest as prof.json.manifest.json.""")
