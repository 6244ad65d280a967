# Instance depth utilities: normalization, the combined scale-invariant
# log / relative-squared loss, per-pixel absolute relative error, and the
# edge-aware smoothness regularizer.

import numpy as np

from casctrack.depthops import (
    DepthMap,
    abs_rel_error,
    denormalize,
    normalize_activation,
    silog_relsq_loss,
    smoothness_loss,
)

rng = np.random.default_rng(3)

# A network head emits raw activations per instance; they become a map in
# [-1, 1], then an absolute map via the instance's mean depth and range.
logits = rng.normal(0.0, 2.0, size=(6, 6))
nm = normalize_activation(logits)
print("normalized range: [%.3f, %.3f]" % (nm.values.min(), nm.values.max()))

absolute = denormalize(nm, mean_depth=18.0, depth_range=4.0)
print("absolute range:   [%.2f, %.2f] m around the 18 m mean"
      % (np.nanmin(absolute.values), np.nanmax(absolute.values)))

# --- the training loss --------------------------------------------------
truth = DepthMap(rng.uniform(5.0, 50.0, (16, 16)))

print("\nloss(pred == truth)        =", silog_relsq_loss(truth, truth))
for scale in (1.05, 1.2, 1.5):
    pred = DepthMap(truth.values * scale)
    print("loss(pred = %.2f * truth)  = %.4f" % (scale, silog_relsq_loss(pred, truth)))

# With variance_focus=1.0 the log term ignores global scaling entirely and
# only the relative-squared term reacts -- compare:
pred = DepthMap(truth.values * 1.5)
print("  ... same at focus=1.0    = %.4f (pure (0.5)^2 rel-sq term)"
      % silog_relsq_loss(pred, truth, variance_focus=1.0))

# --- evaluation-side error ----------------------------------------------
noisy = DepthMap(truth.values * (1.0 + rng.normal(0.0, 0.08, truth.values.shape)))
err = abs_rel_error(noisy, truth)
print("\nabs-rel error: mean %.3f, fraction over 0.1: %.2f"
      % (np.nanmean(err), np.nanmean(err > 0.1)))

# --- edge-aware smoothness ----------------------------------------------
# The regularizer charges for depth gradients, discounted where the image
# itself has an edge.  Build a map with a step and an image that either
# knows about the step or doesn't.
step_map = np.zeros((8, 8))
step_map[:, 4:] = 0.5
blind_image = np.zeros((8, 8))
aware_image = np.zeros((8, 8))
aware_image[:, 4:] = 5.0  # strong image edge right where depth jumps

dm = DepthMap(step_map, normalized=True)
print("\nsmoothness, image blind to the edge: %.4f" % smoothness_loss(dm, blind_image))
print("smoothness, image edge at the jump:  %.4f" % smoothness_loss(dm, aware_image))
print("(the image edge discounts the depth discontinuity by e^-5)")
