"""Coupled similarity between categorical attribute values and objects.

Two ingredients are combined per attribute: an intra-attribute similarity
driven by value occurrence frequencies (IaAVS), and an inter-attribute
similarity comparing the conditional value distributions two values induce
on the other attributes (IeAVS).  Their product is the coupled attribute
value similarity (CAVS); summing CAVS over attributes gives the coupled
object similarity (CIS), bounded by the attribute count.

The inter-attribute term minimizes ``2 - P(W|x) - P(complement(W)|y)``
over all value subsets ``W`` of the other attribute.  Because conditional
probabilities add over singleton values, the minimum has a closed form
evaluated here in integer arithmetic with one final division, so exact
properties (identity, [0, 1] range) survive floating point.  A literal
subset-enumeration oracle is kept alongside for verification.

Frequencies always come from the full table, never from a subset, so the
similarity stays a fixed function while cluster memberships move.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CategoricalTable
from . import kernels

#: Largest domain accepted by the subset-enumeration oracle.
EXHAUSTIVE_DOMAIN_LIMIT = 20


@dataclass(frozen=True)
class FrequencyIndex:
    """Per attribute, value -> object-set index over a fixed table.

    Object sets are stored as bitmasks (bit ``o`` set when object ``o``
    carries the value), which keeps set algebra cheap for the conditional
    probabilities.  For every attribute the value sets partition the
    objects.
    """

    table: CategoricalTable
    counts: tuple[np.ndarray, ...]
    masks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_table(cls, table: CategoricalTable) -> "FrequencyIndex":
        m, n = table.codes.shape
        counts = []
        masks = []
        for j in range(n):
            size = len(table.domains[j])
            cnt = np.bincount(table.codes[:, j], minlength=size).astype(np.int64)
            vmasks = [0] * size
            for o, code in enumerate(table.codes[:, j]):
                vmasks[code] |= 1 << o
            assert int(cnt.sum()) == m
            counts.append(cnt)
            masks.append(tuple(vmasks))
        return cls(table=table, counts=tuple(counts), masks=tuple(masks))

    @property
    def num_objects(self) -> int:
        return self.table.num_objects

    @property
    def num_attributes(self) -> int:
        return self.table.num_attributes

    def code(self, attr: int, value: str) -> int:
        try:
            return self.table.domains[attr].index(value)
        except ValueError:
            name = self.table.attribute_names[attr]
            raise ValueError(f"value {value!r} not in domain of attribute {name!r}") from None

    def count(self, attr: int, value: str) -> int:
        return int(self.counts[attr][self.code(attr, value)])

    def objects(self, attr: int, value: str) -> frozenset[int]:
        """Set of object indices carrying ``value`` for ``attr``."""
        mask = self.masks[attr][self.code(attr, value)]
        return frozenset(o for o in range(self.num_objects) if mask >> o & 1)

    def joint_counts(self, j: int, k: int) -> np.ndarray:
        """|V_j| x |V_k| co-occurrence counts of value pairs."""
        vk = len(self.table.domains[k])
        flat = self.table.codes[:, j].astype(np.int64) * vk + self.table.codes[:, k]
        vj = len(self.table.domains[j])
        return np.bincount(flat, minlength=vj * vk).reshape(vj, vk)

    def _require_nonzero(self, attr: int, value: str) -> int:
        code = self.code(attr, value)
        if self.counts[attr][code] == 0:
            raise ValueError(f"value {value!r} has zero count for attribute {attr}")
        return code


def build_frequency_index(table: CategoricalTable) -> FrequencyIndex:
    return FrequencyIndex.from_table(table)


@dataclass(frozen=True)
class CouplingParams:
    """Aggregation weights for the inter-attribute similarity.

    ``inter_weights[j, k]`` weights attribute ``k``'s contribution to
    attribute ``j``'s inter-coupling; rows sum to 1 over ``k != j``.
    ``None`` for single-attribute tables, where the inter term is the
    constant 1.
    """

    inter_weights: np.ndarray | None

    def __post_init__(self):
        w = self.inter_weights
        if w is None:
            return
        w = np.ascontiguousarray(w, dtype=np.float64)
        object.__setattr__(self, "inter_weights", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("inter_weights must be square")
        if np.any(w < 0):
            raise ValueError("inter_weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("inter_weights diagonal must be zero")
        if w.shape[0] > 1 and np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("inter_weights rows must sum to 1")

    @classmethod
    def uniform(cls, num_attributes: int) -> "CouplingParams":
        if num_attributes == 1:
            return cls(inter_weights=None)
        w = np.full((num_attributes, num_attributes), 1.0 / (num_attributes - 1))
        np.fill_diagonal(w, 0.0)
        return cls(inter_weights=w)


def iaavs(index: FrequencyIndex, j: int, x: str, y: str) -> float:
    """Frequency-driven similarity of two values of one attribute.

    ``f_x * f_y / (f_x + f_y + f_x * f_y)`` over the full-table value
    frequencies; lies in ``[1/3, 1)`` for observed values.
    """
    fx = index.counts[j][index._require_nonzero(j, x)]
    fy = index.counts[j][index._require_nonzero(j, y)]
    return int(fx * fy) / int(fx + fy + fx * fy)


def icp(index: FrequencyIndex, k: int, W, j: int, x: str) -> float:
    """Fraction of objects with attribute-``j`` value ``x`` whose
    attribute-``k`` value falls in the set ``W``."""
    xc = index._require_nonzero(j, x)
    union = 0
    for w in W:
        union |= index.masks[k][index.code(k, w)]
    gx = index.masks[j][xc]
    return (union & gx).bit_count() / int(index.counts[j][xc])


def ieavs_pair(index: FrequencyIndex, j: int, k: int, x: str, y: str) -> float:
    """Inter-attribute similarity of two attribute-``j`` values through
    attribute ``k``.

    Equals ``min over W of {2 - P(W|x) - P(complement(W)|y)}``; evaluated
    via the additive closed form ``2 - sum_w max(P({w}|x), P({w}|y))``
    with integer numerators and a single division.
    """
    if j == k:
        raise ValueError("inter-attribute similarity needs two distinct attributes")
    xc = index._require_nonzero(j, x)
    yc = index._require_nonzero(j, y)
    cx = int(index.counts[j][xc])
    cy = int(index.counts[j][yc])
    gx = index.masks[j][xc]
    gy = index.masks[j][yc]
    num = 0
    for wmask in index.masks[k]:
        num += max((wmask & gx).bit_count() * cy, (wmask & gy).bit_count() * cx)
    den = cx * cy
    return (2 * den - num) / den


def ieavs_pair_exhaustive(index: FrequencyIndex, j: int, k: int, x: str, y: str) -> float:
    """Literal subset enumeration of the minimum behind :func:`ieavs_pair`.

    Test oracle; refuses domains larger than
    :data:`EXHAUSTIVE_DOMAIN_LIMIT` values to bound the 2^|V_k| loop.
    """
    if j == k:
        raise ValueError("inter-attribute similarity needs two distinct attributes")
    vk = len(index.table.domains[k])
    if vk > EXHAUSTIVE_DOMAIN_LIMIT:
        raise ValueError(
            f"refusing exhaustive enumeration over {vk} values "
            f"(limit {EXHAUSTIVE_DOMAIN_LIMIT}); use ieavs_pair instead"
        )
    xc = index._require_nonzero(j, x)
    yc = index._require_nonzero(j, y)
    cx = int(index.counts[j][xc])
    cy = int(index.counts[j][yc])
    gx = index.masks[j][xc]
    gy = index.masks[j][yc]
    # g_k^*(W) for every subset W, built from each subset minus its lowest bit
    unions = [0] * (1 << vk)
    for s in range(1, 1 << vk):
        low = s & -s
        unions[s] = unions[s ^ low] | index.masks[k][low.bit_length() - 1]
    full = (1 << vk) - 1
    best = 2.0
    for s in range(1 << vk):
        val = 2.0 - (unions[s] & gx).bit_count() / cx - (unions[full ^ s] & gy).bit_count() / cy
        if val < best:
            best = val
    return best


def ieavs(index: FrequencyIndex, params: CouplingParams, j: int, x: str, y: str) -> float:
    """Inter-attribute similarity aggregated over all other attributes.

    Convex combination of the pairwise terms under ``params``; the
    constant 1 for single-attribute tables.
    """
    n = index.num_attributes
    if n == 1:
        return 1.0
    num = 0.0
    den = 0.0
    for k in range(n):
        if k == j:
            continue
        a = params.inter_weights[j, k]
        num += a * ieavs_pair(index, j, k, x, y)
        den += a
    return num / den


def cavs(index: FrequencyIndex, params: CouplingParams, j: int, x: str, y: str) -> float:
    """Coupled attribute value similarity: intra times inter."""
    return iaavs(index, j, x, y) * ieavs(index, params, j, x, y)


def cis(index: FrequencyIndex, params: CouplingParams, a: int, b: int) -> float:
    """Coupled object similarity: CAVS summed over attributes."""
    table = index.table
    total = 0.0
    for j in range(table.num_attributes):
        total += cavs(index, params, j, table.value(a, j), table.value(b, j))
    return total


def _ieavs_pair_table(index: FrequencyIndex, j: int, k: int) -> np.ndarray:
    """Pairwise inter-attribute similarities for all value pairs of ``j``."""
    joint = index.joint_counts(j, k)
    c = index.counts[j]
    # num[x, y] = sum_w max(joint[x, w] * c_y, joint[y, w] * c_x), all int64
    a = joint[:, None, :] * c[None, :, None]
    num = np.maximum(a, np.swapaxes(a, 0, 1)).sum(axis=2)
    den = c[:, None] * c[None, :]
    return (2 * den - num) / den


def cavs_tables(index: FrequencyIndex, params: CouplingParams | None = None) -> list[np.ndarray]:
    """Per attribute, the full |V_j| x |V_j| CAVS lookup table.

    Precomputing these makes object-level similarity a pure table lookup,
    which is what the compiled kernel and the clustering loops consume.
    Requires every domain value to occur in the table.
    """
    n = index.num_attributes
    if params is None:
        params = CouplingParams.uniform(n)
    for j, cnt in enumerate(index.counts):
        if np.any(cnt == 0):
            name = index.table.attribute_names[j]
            raise ValueError(f"attribute {name!r} has domain values with zero count")
    tables = []
    for j in range(n):
        c = index.counts[j]
        prod = c[:, None] * c[None, :]
        intra = prod / (c[:, None] + c[None, :] + prod)
        if n == 1:
            inter = np.ones_like(intra)
        else:
            num = np.zeros_like(intra)
            den = 0.0
            for k in range(n):
                if k == j:
                    continue
                a = params.inter_weights[j, k]
                num += a * _ieavs_pair_table(index, j, k)
                den += a
            inter = num / den
        tables.append(intra * inter)
    return tables


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric object-object similarity with the source identifiers."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.ids):
            raise ValueError("similarity matrix must be square over the ids")
        if np.any(np.abs(v - v.T) > 1e-12):
            raise ValueError("similarity matrix must be symmetric")

    @property
    def size(self) -> int:
        return len(self.ids)

    def save_csv(self, path) -> None:
        """Upper triangle plus diagonal, 12 significant digits."""
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id_a", "id_b", "cis"])
            for a in range(self.size):
                for b in range(a, self.size):
                    writer.writerow([self.ids[a], self.ids[b], f"{self.values[a, b]:.12g}"])


def coupling_matrix(
    table: CategoricalTable,
    params: CouplingParams | None = None,
    threads: int = 1,
) -> SimilarityMatrix:
    """All-pairs coupled object similarity over a table.

    Builds the per-attribute CAVS tables once, then reduces them over the
    object pairs with the active kernel; ``threads`` splits the row range
    across worker threads.
    """
    index = FrequencyIndex.from_table(table)
    tables = cavs_tables(index, params)
    values = kernels.cis_matrix(table.codes, tables, threads=threads)
    return SimilarityMatrix(ids=table.object_ids, values=values)
