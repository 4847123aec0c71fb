"""Pure-Python implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via the
``COUPLEDREC_KERNELS=fallback`` environment variable).  Arithmetic is kept
in the exact operation order of the compiled twin so both backends produce
bit-identical results; the SGD loop therefore runs on Python scalars
rather than numpy vector ops, trading speed for equivalence.
"""

from __future__ import annotations

import numpy as np

NAME = "fallback"


def cis_matrix(codes: np.ndarray, tables, threads: int = 1) -> np.ndarray:
    """Sum per-attribute value-pair similarities over all object pairs.

    ``out[a, b] = sum_j tables[j][codes[a, j], codes[b, j]]``, accumulated
    in ascending attribute order.  ``threads`` is accepted for interface
    parity; the numpy reduction is single-pass already.
    """
    m, n = codes.shape
    out = np.zeros((m, m), dtype=np.float64)
    for j in range(n):
        col = codes[:, j]
        out += tables[j][col[:, None], col[None, :]]
    return out


def sgd_epoch(
    P: np.ndarray,
    Q: np.ndarray,
    rm: float,
    users: np.ndarray,
    items: np.ndarray,
    ratings: np.ndarray,
    order: np.ndarray,
    lr: float,
    lam: float,
    s_indptr: np.ndarray,
    s_indices: np.ndarray,
    s_weights: np.ndarray,
    w_indptr: np.ndarray,
    w_indices: np.ndarray,
    w_weights: np.ndarray,
    train_offset: bool,
) -> float:
    """One pass of per-rating gradient steps over ``order``; returns the
    (possibly updated) global offset.

    For each rating the residual of the graph-augmented prediction is
    propagated to the user row, the item row, the user's graph neighbors
    and the item's graph neighbors, all from the pre-update values.
    Updates P and Q in place.
    """
    d = P.shape[1]
    Pl = P.tolist()
    Ql = Q.tolist()
    sp = s_indptr.tolist()
    si = s_indices.tolist()
    sw = s_weights.tolist()
    wp = w_indptr.tolist()
    wi = w_indices.tolist()
    ww = w_weights.tolist()
    uu = users.tolist()
    ii = items.tolist()
    rr = ratings.tolist()
    rm = float(rm)
    for t in order.tolist():
        u = uu[t]
        i = ii[t]
        pu = Pl[u]
        qi = Ql[i]

        spu = [0.0] * d
        for e in range(sp[u], sp[u + 1]):
            row = Pl[si[e]]
            w = sw[e]
            for c in range(d):
                spu[c] += w * row[c]
        wqi = [0.0] * d
        for e in range(wp[i], wp[i + 1]):
            row = Ql[wi[e]]
            w = ww[e]
            for c in range(d):
                wqi[c] += w * row[c]

        t1 = 0.0
        t2 = 0.0
        for c in range(d):
            t1 += (pu[c] + spu[c]) * qi[c]
            t2 += pu[c] * wqi[c]
        err = rm + t1 + t2 - rr[t]

        pu_old = pu[:]
        qi_old = qi[:]
        for c in range(d):
            pu[c] -= lr * (err * (qi_old[c] + wqi[c]) + lam * pu_old[c])
            qi[c] -= lr * (err * (pu_old[c] + spu[c]) + lam * qi_old[c])
        for e in range(sp[u], sp[u + 1]):
            row = Pl[si[e]]
            f = err * sw[e]
            for c in range(d):
                row[c] -= lr * (f * qi_old[c])
        for e in range(wp[i], wp[i + 1]):
            row = Ql[wi[e]]
            f = err * ww[e]
            for c in range(d):
                row[c] -= lr * (f * pu_old[c])
        if train_offset:
            rm -= lr * err
    P[:] = Pl
    Q[:] = Ql
    return rm
