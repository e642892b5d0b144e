"""Pure NumPy implementation of the weighted scalar Lloyd iteration.

This is the fallback used when the compiled ``_lloyd`` extension is not
available. Both implementations must agree bit for bit, so every reduction
here is sequential in index order (``np.bincount`` and ``np.add.accumulate``
rather than pairwise sums).
"""

import numpy as np


def _seq_sum(values):
    if values.size == 0:
        return 0.0
    return float(np.add.accumulate(values)[-1])


def assign(w, centroids):
    """Index of the nearest centroid for every weight; ties go to the lowest index."""
    diff = w[:, None] - centroids[None, :]
    return np.argmin(diff * diff, axis=1).astype(np.int64)


def farthest_pair(centroids):
    """Lowest-index pair (k1 < k2) maximizing the squared centroid distance."""
    k = centroids.size
    diff = centroids[:, None] - centroids[None, :]
    dist = diff * diff
    dist[np.tril_indices(k)] = -1.0
    flat = int(np.argmax(dist))
    return flat // k, flat % k


def objective(w, h, centroids, assignments):
    r = w - centroids[assignments]
    return _seq_sum(h * r * r)


def run_lloyd(w, h, init, beta, max_iters, regularize):
    """Alternate assignment and (optionally diameter-regularized) centroid updates.

    Parameters
    ----------
    w, h : float64 arrays of length d
        Weights and their nonnegative importances.
    init : float64 array of length K
        Starting centroids.
    beta : float
        Diameter penalty. Only used when ``regularize`` is true.
    max_iters : int
        Iteration cap (at least 1 iteration always runs).
    regularize : bool
        Apply the pulled update to the farthest pair of the previous iterate.

    Returns
    -------
    centroids, assignments, iterations_run, history
        ``history[t]`` is the unpenalized weighted cost after iteration t.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    prev = np.array(init, dtype=np.float64)
    k = prev.size
    hw = h * w
    history = []
    last_assign = None
    it = 0
    for it in range(1, max(int(max_iters), 1) + 1):
        a = assign(w, prev)
        counts = np.bincount(a, minlength=k)
        sum_hw = np.bincount(a, weights=hw, minlength=k)
        sum_h = np.bincount(a, weights=h, minlength=k)
        lo = np.full(k, np.inf)
        hi = np.full(k, -np.inf)
        np.minimum.at(lo, a, w)
        np.maximum.at(hi, a, w)

        cur = prev.copy()
        for c in range(k):
            if counts[c] == 0:
                continue
            if lo[c] == hi[c]:
                cur[c] = lo[c] + 0.0  # canonical +0.0
            elif sum_h[c] > 0:
                cur[c] = sum_hw[c] / sum_h[c]

        if regularize and beta > 0 and k > 1:
            k1, k2 = farthest_pair(prev)
            for kk, other in ((k1, k2), (k2, k1)):
                cur[kk] = (sum_hw[kk] + beta * prev[other]) / (sum_h[kk] + beta)

        # empty clusters: move the worst-served point of a shared cluster in
        for c in range(k):
            if counts[c] != 0:
                continue
            r = w - cur[a]
            resid = h * r * r
            resid[counts[a] < 2] = -1.0
            j = int(np.argmax(resid))
            counts[a[j]] -= 1
            counts[c] += 1
            a[j] = c
            cur[c] = w[j]

        history.append(objective(w, h, cur, a))
        prev = cur
        if last_assign is not None and np.array_equal(a, last_assign):
            break
        last_assign = a
    return prev, a, it, np.array(history)
