# A tour of the sequence metrics with numbers small enough to verify by
# hand: PQ on one pair of frames, VPQ across windows, depth-aware DVPQ, and
# STQ's association/segmentation split.

import math

import numpy as np

from casctrack.metrics import (
    VOID,
    DvpqConfig,
    PanopticMap,
    PanopticSequence,
    dvpq,
    pq,
    stq,
    vpq,
)
from casctrack.depthops import DepthMap

# ---- PQ: segment matching at IoU > 0.5 ----------------------------------
# Truth: two 8-px tubes (rows 0 and 3 over two frames).  The prediction
# covers 6 px of tube 1 and 2 px of tube 2.
sem_t = np.full((4, 4), VOID); sem_t[0, :] = sem_t[3, :] = 1
inst_t = np.zeros((4, 4), dtype=int); inst_t[0, :] = 1; inst_t[3, :] = 2
sem_p = np.full((4, 4), VOID)
inst_p = np.zeros((4, 4), dtype=int)
for r, c in [(0, 0), (0, 1), (0, 2), (3, 0)]:
    sem_p[r, c] = 1
    inst_p[r, c] = 7

res = pq([PanopticMap(sem_p, inst_p)] * 2, [PanopticMap(sem_t, inst_t)] * 2, (1,))
print("PQ toy: tp=%s fp=%s fn=%s" % (res.stats.tp, res.stats.fp, res.stats.fn))
print("  IoU(pred, tube1) = 6/(8+8-6) = %.3f > 0.5 -> the only TP" % (6 / 10))
print("  PQ = 0.6 / (1 + 0/2 + 1/2) = %.4f  (module says %.4f)"
      % ((6 / 10) / 1.5, res.aggregate))

# ---- VPQ: the same counting over k-frame tubes ---------------------------
# An id flip between frames is invisible at k=1 and fatal at k=2.
sem = np.ones((1, 6), dtype=int)
a = PanopticMap(sem, np.array([[1, 1, 1, 2, 2, 2]]))
b = PanopticMap(sem, np.array([[2, 2, 2, 1, 1, 1]]))
truth_seq = [a, a]
pred_seq = [a, b]
print("\nVPQ with an id flip on frame 2:")
for k in (1, 2):
    print("  k=%d -> %.3f" % (k, vpq(pred_seq, truth_seq, k, (1,)).aggregate))

# ---- DVPQ: VPQ after voiding depth-wrong pixels --------------------------
# Prediction segments are perfect but the right tube's depth is 2x truth;
# tightening lambda kills it (TP -> FN), loosening forgives it.
sem = np.full((4, 4), 1)
inst = np.zeros((4, 4), dtype=int); inst[:, :2] = 1; inst[:, 2:] = 2
frames = [PanopticMap(sem, inst)] * 2
truth_depth = [DepthMap(np.full((4, 4), 2.0))] * 2
bad = np.full((4, 4), 2.0); bad[:, 2:] = 4.0
pred_depth = [DepthMap(bad)] * 2

cfg = DvpqConfig(things=(1,), window_sizes=(1,),
                 depth_thresholds=(0.5, math.inf))
res = dvpq(PanopticSequence(frames, pred_depth),
           PanopticSequence(frames, truth_depth), cfg)
for cell in res.cells:
    print("DVPQ cell k=%d lambda=%-4s -> %.4f" % (cell["k"], cell["lam"], cell["value"]))
print("headline DVPQ = %.4f (mean over cells)" % res.dvpq)

# ---- STQ: association x segmentation -------------------------------------
# Perfect masks, but the ids restart halfway: association quality halves
# while segmentation quality stays perfect, and STQ is their geometric mean.
sem = np.array([[1, 1]])
truth_seq = [PanopticMap(sem, np.array([[1, 2]]))] * 2
pred_seq = [PanopticMap(sem, np.array([[1, 2]])),
            PanopticMap(sem, np.array([[3, 4]]))]
res = stq(pred_seq, truth_seq, (1,))
print("\nSTQ with fresh ids at the midpoint:")
print("  AQ=%.3f  SQ=%.3f  STQ=sqrt(AQ*SQ)=%.6f" % (res.aq, res.sq, res.stq))
print("  (exactly sqrt(0.5):", res.stq == math.sqrt(0.5), ")")
