# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels.

Must stay operation-for-operation equivalent to ``_fallback``; the test
suite asserts bit-identical results between the two backends.
"""

import numpy as np

cimport numpy as cnp

NAME = "native"


cdef void _cis_rows(double[:, ::1] out, int[:, ::1] codes,
                    double[::1] flat, long[::1] offsets, long[::1] widths,
                    Py_ssize_t row_start, Py_ssize_t row_stop) noexcept nogil:
    cdef Py_ssize_t m = codes.shape[0]
    cdef Py_ssize_t n = codes.shape[1]
    cdef Py_ssize_t a, b, j
    cdef double s
    for a in range(row_start, row_stop):
        for b in range(a, m):
            s = 0.0
            for j in range(n):
                s += flat[offsets[j] + codes[a, j] * widths[j] + codes[b, j]]
            out[a, b] = s
            out[b, a] = s


def cis_matrix(codes, tables, threads=1):
    """Sum per-attribute value-pair similarities over all object pairs.

    Computes the upper triangle and mirrors it; ``threads`` > 1 splits the
    row range across worker threads (the inner loops release the GIL).
    """
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    m, n = codes.shape
    offsets = np.zeros(n, dtype=np.int64)
    widths = np.zeros(n, dtype=np.int64)
    pos = 0
    parts = []
    for j, tab in enumerate(tables):
        tab = np.ascontiguousarray(tab, dtype=np.float64)
        offsets[j] = pos
        widths[j] = tab.shape[1]
        pos += tab.size
        parts.append(tab.ravel())
    flat = np.concatenate(parts) if parts else np.zeros(0)
    out = np.zeros((m, m), dtype=np.float64)

    if threads <= 1 or m < 2 * threads:
        _cis_chunk(out, codes, flat, offsets, widths, 0, m)
        return out

    import threading

    bounds = np.linspace(0, m, threads + 1).astype(np.int64)
    workers = [
        threading.Thread(
            target=_cis_chunk,
            args=(out, codes, flat, offsets, widths, int(bounds[t]), int(bounds[t + 1])),
        )
        for t in range(threads)
    ]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    return out


def _cis_chunk(double[:, ::1] out, int[:, ::1] codes, double[::1] flat,
               long[::1] offsets, long[::1] widths, Py_ssize_t lo, Py_ssize_t hi):
    with nogil:
        _cis_rows(out, codes, flat, offsets, widths, lo, hi)


def sgd_epoch(double[:, ::1] P, double[:, ::1] Q, double rm,
              int[::1] users, int[::1] items, double[::1] ratings,
              long[::1] order, double lr, double lam,
              int[::1] s_indptr, int[::1] s_indices, double[::1] s_weights,
              int[::1] w_indptr, int[::1] w_indices, double[::1] w_weights,
              bint train_offset):
    """One pass of per-rating gradient steps over ``order``; returns the
    (possibly updated) global offset.  Updates P and Q in place.
    """
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t nt = order.shape[0]
    cdef Py_ssize_t t, idx, u, i, e, c, v
    cdef double t1, t2, err, w, f
    scratch = np.zeros((4, d), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    with nogil:
        for t in range(nt):
            idx = order[t]
            u = users[idx]
            i = items[idx]

            for c in range(d):
                sc[0, c] = 0.0  # sum_v S_uv P_v
                sc[1, c] = 0.0  # sum_j W_ij Q_j
            for e in range(s_indptr[u], s_indptr[u + 1]):
                v = s_indices[e]
                w = s_weights[e]
                for c in range(d):
                    sc[0, c] += w * P[v, c]
            for e in range(w_indptr[i], w_indptr[i + 1]):
                v = w_indices[e]
                w = w_weights[e]
                for c in range(d):
                    sc[1, c] += w * Q[v, c]

            t1 = 0.0
            t2 = 0.0
            for c in range(d):
                t1 += (P[u, c] + sc[0, c]) * Q[i, c]
                t2 += P[u, c] * sc[1, c]
            err = rm + t1 + t2 - ratings[idx]

            for c in range(d):
                sc[2, c] = P[u, c]  # pre-update user row
                sc[3, c] = Q[i, c]  # pre-update item row
            for c in range(d):
                P[u, c] -= lr * (err * (sc[3, c] + sc[1, c]) + lam * sc[2, c])
                Q[i, c] -= lr * (err * (sc[2, c] + sc[0, c]) + lam * sc[3, c])
            for e in range(s_indptr[u], s_indptr[u + 1]):
                v = s_indices[e]
                f = err * s_weights[e]
                for c in range(d):
                    P[v, c] -= lr * (f * sc[3, c])
            for e in range(w_indptr[i], w_indptr[i + 1]):
                v = w_indices[e]
                f = err * w_weights[e]
                for c in range(d):
                    Q[v, c] -= lr * (f * sc[2, c])
            if train_offset:
                rm -= lr * err
    return rm
