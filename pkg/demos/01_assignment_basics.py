# The assignment core: minimum-cost matching with forbidden pairs.
#
# Everything the tracker does per frame reduces to one of these solves, so
# it is worth poking at the solver by itself first.

import numpy as np

from casctrack.lapsolver import FORBIDDEN, apply_gate, solve

costs = np.array([
    [0.2, 0.9, 0.4],
    [0.7, 0.1, 0.8],
    [0.5, 0.6, 0.3],
])

m = solve(costs)
print("3x3 cost table")
print(costs)
print("optimal pairs:", m.pairs, " total cost:", m.total_cost)

# Forbid the diagonal and watch the matching rearrange itself.  FORBIDDEN is
# a true infinity, not a large constant -- a forbidden pair is never taken,
# no matter how expensive the alternatives get.
banned = costs.copy()
np.fill_diagonal(banned, FORBIDDEN)
m = solve(banned)
print("\nwith the diagonal forbidden:", m.pairs, " total cost:", round(m.total_cost, 3))

# Rectangular tables are fine; rows and columns that cannot be matched
# come back in unmatched_rows / unmatched_cols rather than being forced.
wide = np.array([[0.3, FORBIDDEN, 0.6, 0.2],
                 [FORBIDDEN, FORBIDDEN, FORBIDDEN, FORBIDDEN]])
m = solve(wide)
print("\n2x4 with a hopeless row:")
print("  pairs:", m.pairs)
print("  unmatched rows:", m.unmatched_rows, " unmatched cols:", m.unmatched_cols)

# Gating = "forbid everything worse than a threshold".  This is exactly how
# the tracker turns a dense distance table into a sparse, safe one.
rng = np.random.default_rng(0)
dense = rng.random((5, 5)) * 2.0
gated = apply_gate(dense, 0.8)
print("\ndense table gated at 0.8 forbids",
      int(np.isinf(gated.values).sum()), "of 25 entries")
print("matched anyway:", len(solve(gated).pairs), "pairs")

# Determinism: equal-cost optima are broken lexicographically, so reruns
# (and CI machines) always agree on the same pairing.
ties = np.zeros((3, 3))
print("\nall-zero table picks the identity pairing:", solve(ties).pairs)
