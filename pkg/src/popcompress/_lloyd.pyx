# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled weighted scalar Lloyd iteration.

Mirrors ``_lloyd_py.run_lloyd`` operation for operation; every reduction is a
sequential sum in index order so both paths produce identical bits.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _assign(const double[::1] w, const double[::1] c,
                         cnp.int64_t[::1] a) noexcept nogil:
    cdef Py_ssize_t j, k
    cdef Py_ssize_t d = w.shape[0], kk = c.shape[0]
    cdef double t, best, dist
    cdef cnp.int64_t arg
    for j in range(d):
        t = w[j] - c[0]
        best = t * t
        arg = 0
        for k in range(1, kk):
            t = w[j] - c[k]
            dist = t * t
            if dist < best:
                best = dist
                arg = k
        a[j] = arg


def assign(w, centroids):
    w = np.ascontiguousarray(w, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    out = np.empty(w.shape[0], dtype=np.int64)
    _assign(w, centroids, out)
    return out


def run_lloyd(w, h, init, double beta, max_iters, bint regularize):
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    prev_arr = np.array(init, dtype=np.float64)
    cdef double[::1] prev = prev_arr
    cdef Py_ssize_t K = prev.shape[0]
    cdef Py_ssize_t d = wv.shape[0]
    cdef Py_ssize_t n_iter = max(int(max_iters), 1)

    cur_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    a_arr = np.empty(d, dtype=np.int64)
    last_arr = np.empty(d, dtype=np.int64)
    cdef cnp.int64_t[::1] a = a_arr
    cdef cnp.int64_t[::1] last = last_arr
    cdef cnp.int64_t[::1] counts = np.empty(K, dtype=np.int64)
    cdef double[::1] sum_hw = np.empty(K, dtype=np.float64)
    cdef double[::1] sum_h = np.empty(K, dtype=np.float64)
    cdef double[::1] lo = np.empty(K, dtype=np.float64)
    cdef double[::1] hi = np.empty(K, dtype=np.float64)
    history_arr = np.empty(n_iter, dtype=np.float64)
    cdef double[::1] history = history_arr

    cdef Py_ssize_t it = 0, j, c, k1, k2, q, best_j
    cdef cnp.int64_t ca
    cdef double t, dist, best, obj, r
    cdef bint have_last = False, same
    cdef bint pull = regularize and beta > 0 and K > 1

    with nogil:
        for it in range(1, n_iter + 1):
            _assign(wv, prev, a)
            for c in range(K):
                counts[c] = 0
                sum_hw[c] = 0.0
                sum_h[c] = 0.0
                lo[c] = 1.0 / 0.0
                hi[c] = -1.0 / 0.0
            for j in range(d):
                ca = a[j]
                counts[ca] += 1
                sum_hw[ca] += hv[j] * wv[j]
                sum_h[ca] += hv[j]
                if wv[j] < lo[ca]:
                    lo[ca] = wv[j]
                if wv[j] > hi[ca]:
                    hi[ca] = wv[j]

            for c in range(K):
                cur[c] = prev[c]
                if counts[c] == 0:
                    continue
                if lo[c] == hi[c]:
                    cur[c] = lo[c] + 0.0  # canonical +0.0
                elif sum_h[c] > 0:
                    cur[c] = sum_hw[c] / sum_h[c]

            if pull:
                k1 = 0
                k2 = 1
                best = -1.0
                for c in range(K):
                    for q in range(c + 1, K):
                        t = prev[c] - prev[q]
                        dist = t * t
                        if dist > best:
                            best = dist
                            k1 = c
                            k2 = q
                cur[k1] = (sum_hw[k1] + beta * prev[k2]) / (sum_h[k1] + beta)
                cur[k2] = (sum_hw[k2] + beta * prev[k1]) / (sum_h[k2] + beta)

            for c in range(K):
                if counts[c] != 0:
                    continue
                best = -1.0
                best_j = 0
                for j in range(d):
                    if counts[a[j]] < 2:
                        continue
                    t = wv[j] - cur[a[j]]
                    r = hv[j] * t * t
                    if r > best:
                        best = r
                        best_j = j
                counts[a[best_j]] -= 1
                counts[c] += 1
                a[best_j] = c
                cur[c] = wv[best_j]

            obj = 0.0
            for j in range(d):
                t = wv[j] - cur[a[j]]
                obj += hv[j] * t * t
            history[it - 1] = obj

            for c in range(K):
                prev[c] = cur[c]

            if have_last:
                same = True
                for j in range(d):
                    if a[j] != last[j]:
                        same = False
                        break
                if same:
                    break
            for j in range(d):
                last[j] = a[j]
            have_last = True

    return prev_arr, a_arr.copy(), it, history_arr[:it].copy()
