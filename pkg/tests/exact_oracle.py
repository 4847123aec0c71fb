"""Independent exact-arithmetic reference implementations.

Everything here recomputes the coupled similarities from their set-based
definitions using ``fractions.Fraction``, with literal minimization and
enumeration instead of closed forms, so the production code can be
checked against values that carry no floating-point error and share no
code path with it.
"""

from fractions import Fraction
from itertools import combinations, product


def groups(table, j):
    """Value code -> set of object indices for attribute ``j``."""
    out = {code: set() for code in range(len(table.domains[j]))}
    for o in range(table.num_objects):
        out[int(table.codes[o, j])].add(o)
    return out


def ia_frac(table, j, xc, yc) -> Fraction:
    g = groups(table, j)
    fx, fy = len(g[xc]), len(g[yc])
    return Fraction(fx * fy, fx + fy + fx * fy)


def icp_frac(table, k, w_codes, j, xc) -> Fraction:
    g_j = groups(table, j)
    g_k = groups(table, k)
    union = set()
    for w in w_codes:
        union |= g_k[w]
    return Fraction(len(union & g_j[xc]), len(g_j[xc]))


def ie_pair_frac(table, j, k, xc, yc) -> Fraction:
    """Literal minimization over every value subset of attribute ``k``."""
    values = range(len(table.domains[k]))
    best = None
    for size in range(len(table.domains[k]) + 1):
        for subset in combinations(values, size):
            comp = tuple(v for v in values if v not in subset)
            cand = 2 - icp_frac(table, k, subset, j, xc) - icp_frac(table, k, comp, j, yc)
            if best is None or cand < best:
                best = cand
    return best


def ie_frac(table, j, xc, yc) -> Fraction:
    n = table.num_attributes
    if n == 1:
        return Fraction(1)
    total = Fraction(0)
    for k in range(n):
        if k != j:
            total += Fraction(1, n - 1) * ie_pair_frac(table, j, k, xc, yc)
    return total


def cavs_frac(table, j, xc, yc) -> Fraction:
    return ia_frac(table, j, xc, yc) * ie_frac(table, j, xc, yc)


def cis_frac(table, a, b) -> Fraction:
    return sum(
        cavs_frac(table, j, int(table.codes[a, j]), int(table.codes[b, j]))
        for j in range(table.num_attributes)
    )


def cis_to_vector_frac(table, a, mode_codes) -> Fraction:
    return sum(
        cavs_frac(table, j, int(table.codes[a, j]), int(mode_codes[j]))
        for j in range(table.num_attributes)
    )


def brute_force_mode(table, members):
    """First candidate vector (in domain-product order) maximizing the
    exact total similarity to the members."""
    best_vec = None
    best_score = None
    for cand in product(*(range(len(dom)) for dom in table.domains)):
        score = sum(cis_to_vector_frac(table, int(o), cand) for o in members)
        if best_score is None or score > best_score:
            best_score = score
            best_vec = cand
    return best_vec, best_score


def brute_force_mode_fast(table, members):
    """Same enumeration as :func:`brute_force_mode` with the per-attribute
    member scores (still exact fractions) precomputed once."""
    from collections import Counter

    score_tables = []
    for j in range(table.num_attributes):
        counts = Counter(int(table.codes[int(o), j]) for o in members)
        column_scores = []
        for v in range(len(table.domains[j])):
            column_scores.append(
                sum(cnt * cavs_frac(table, j, xc, v) for xc, cnt in counts.items())
            )
        score_tables.append(column_scores)
    best_vec = None
    best_score = None
    for cand in product(*(range(len(dom)) for dom in table.domains)):
        score = sum(score_tables[j][v] for j, v in enumerate(cand))
        if best_score is None or score > best_score:
            best_score = score
            best_vec = cand
    return best_vec, best_score
