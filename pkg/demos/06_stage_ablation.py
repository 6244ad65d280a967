# Why a cascade?  Each matching stage has a failure mode the other covers.
# The bundled "table2" scenario families stress each stage in turn; running
# all three stage sets over a few seeds makes the structure visible.
#
#   appearance_stress: embeddings are pure noise -> AM alone collapses
#   spatial_stress:    depth is wild, objects are close -> SM alone collapses
#   balanced:          both cues are partial -> the cascade beats either
#
# (The acceptance suite runs this with 30 seeds per family; five are enough
# to see the shape of the result.)

import numpy as np

from casctrack.simulator import (
    DEFAULT_INTRINSICS,
    TABLE2_FAMILIES,
    generate,
    score_against_truth,
    table2_config,
)
from casctrack.tracker import TrackerConfig, TrackerState, step

SEEDS = range(5)
STAGE_SETS = {"am": ("am",), "sm": ("sm",), "am+sm": ("am", "sm")}


def run(frames, stages):
    state, out = TrackerState(), []
    for dets in frames:
        state, pairs = step(state, dets, DEFAULT_INTRINSICS,
                            TrackerConfig(stages=stages))
        out.append(pairs)
    return out


print(f"{'family':<20} {'AQ(am)':>8} {'AQ(sm)':>8} {'AQ(am+sm)':>10}")
for family in TABLE2_FAMILIES:
    means = {}
    for label, stages in STAGE_SETS.items():
        aqs = []
        for seed in SEEDS:
            frames, truth = generate(table2_config(family, seed), DEFAULT_INTRINSICS)
            aqs.append(score_against_truth(run(frames, stages), truth).aq)
        means[label] = float(np.mean(aqs))
    print(f"{family:<20} {means['am']:>8.3f} {means['sm']:>8.3f} "
          f"{means['am+sm']:>10.3f}")

print("""
Reading the table:
  - on appearance_stress the cascade rides its spatial stage,
  - on spatial_stress it refuses the bad spatial matches (appearance wins
    first, and what falls through is safely unmatched),
  - on balanced neither stage alone suffices and the cascade stacks them.
The published ablation of this design shows the same ordering; its absolute
scores depend on a trained network and are not meaningful here.""")
