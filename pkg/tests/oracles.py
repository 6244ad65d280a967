"""Independent reference implementations used only by the tests.

Everything here is deliberately naive — exhaustive enumeration and explicit
per-pixel double loops — so that agreement with the package is meaningful.
Nothing in this file imports the package.
"""

import itertools
import math

import numpy as np


def lap_brute_force(costs):
    """Exhaustive assignment oracle.

    Enumerates all injections row-subset -> column-permutation at descending
    cardinality; returns (pairs, total_cost, cardinality) for the
    maximum-cardinality feasible matching with minimum cost, breaking cost
    ties by the lexicographically smallest sorted pair list.  total_cost is
    summed left-to-right over pairs sorted by row, matching the convention of
    the solver under test so equality can be exact.
    """
    costs = np.asarray(costs, dtype=np.float64)
    n, m = costs.shape
    best = None
    for k in range(min(n, m), -1, -1):
        found = False
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                total = 0.0
                feasible = True
                for r, c in zip(rows, cols):
                    if not math.isfinite(costs[r, c]):
                        feasible = False
                        break
                    total += costs[r, c]
                if not feasible:
                    continue
                found = True
                pairs = sorted(zip(rows, cols))
                cand = (total, pairs)
                if best is None or cand < best:
                    best = cand
        if found:
            break
    if best is None:  # k = 0 always succeeds, so best is set; keep guards honest
        return [], 0.0, 0
    return best[1], best[0], len(best[1])


def depth_denormalize_loops(normalized, valid, mean_depth, depth_range):
    h, w = normalized.shape
    out = np.full((h, w), np.nan)
    for i in range(h):
        for j in range(w):
            if valid[i, j]:
                out[i, j] = mean_depth + depth_range * normalized[i, j]
    return out


def smoothness_loss_loops(values, valid, image):
    """Forward differences; each axis averaged over its own valid pairs."""
    h, w = values.shape
    x_terms = []
    for i in range(h):
        for j in range(w - 1):
            if valid[i, j] and valid[i, j + 1]:
                gd = abs(values[i, j + 1] - values[i, j])
                gi = abs(image[i, j + 1] - image[i, j])
                x_terms.append(gd * math.exp(-gi))
    y_terms = []
    for i in range(h - 1):
        for j in range(w):
            if valid[i, j] and valid[i + 1, j]:
                gd = abs(values[i + 1, j] - values[i, j])
                gi = abs(image[i + 1, j] - image[i, j])
                y_terms.append(gd * math.exp(-gi))
    x_mean = sum(x_terms) / len(x_terms) if x_terms else 0.0
    y_mean = sum(y_terms) / len(y_terms) if y_terms else 0.0
    return x_mean + y_mean


def smoothness_grad_loops(values, valid, image):
    """Analytic (sub)gradient of the smoothness loss w.r.t. each pixel.

    Valid away from kinks (zero adjacent differences).  Each axis term is
    normalized by its own count of valid pairs, mirroring the loss.
    """
    h, w = values.shape
    grad = np.zeros((h, w))
    x_pairs = [(i, j) for i in range(h) for j in range(w - 1)
               if valid[i, j] and valid[i, j + 1]]
    y_pairs = [(i, j) for i in range(h - 1) for j in range(w)
               if valid[i, j] and valid[i + 1, j]]
    for i, j in x_pairs:
        s = math.copysign(1.0, values[i, j + 1] - values[i, j])
        wgt = math.exp(-abs(image[i, j + 1] - image[i, j])) / len(x_pairs)
        grad[i, j + 1] += s * wgt
        grad[i, j] -= s * wgt
    for i, j in y_pairs:
        s = math.copysign(1.0, values[i + 1, j] - values[i, j])
        wgt = math.exp(-abs(image[i + 1, j] - image[i, j])) / len(y_pairs)
        grad[i + 1, j] += s * wgt
        grad[i, j] -= s * wgt
    return grad


def silog_relsq_loops(pred, pred_valid, truth, truth_valid, variance_focus):
    logs = []
    relsq = []
    h, w = pred.shape
    for i in range(h):
        for j in range(w):
            if pred_valid[i, j] and truth_valid[i, j]:
                g = math.log(pred[i, j]) - math.log(truth[i, j])
                logs.append(g)
                relsq.append((pred[i, j] - truth[i, j]) ** 2 / truth[i, j] ** 2)
    if not logs:
        raise ValueError("empty overlap")
    k = len(logs)
    mean_sq = sum(x * x for x in logs) / k
    mean = sum(logs) / k
    silog = mean_sq - variance_focus * mean * mean
    return silog + sum(relsq) / k


def abs_rel_loops(pred, pred_valid, truth, truth_valid):
    h, w = pred.shape
    out = np.full((h, w), np.nan)
    for i in range(h):
        for j in range(w):
            if pred_valid[i, j] and truth_valid[i, j]:
                out[i, j] = abs(pred[i, j] - truth[i, j]) / truth[i, j]
    return out
