"""Loading and validation of rating triples, categorical attribute tables
and relation-graph edge lists.

All loaders read UTF-8 CSV files with a mandatory header (LF or CRLF).
Loaded structures are immutable by convention: nothing in this package
mutates them after construction, so they are safe to share across threads.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

#: Reserved category used for missing/empty categorical cells.  It is
#: appended to an attribute's domain on first use and participates in
#: frequency counts like any other value.
MISSING = "⊥"


class DataError(ValueError):
    """Raised when an input file violates the format or an invariant."""


@dataclass(frozen=True)
class CategoricalTable:
    """Objects described by categorical attributes.

    ``codes[o, j]`` indexes into ``domains[j]``; domains hold the observed
    values of each attribute in first-appearance order.
    """

    object_ids: tuple[str, ...]
    attribute_names: tuple[str, ...]
    codes: np.ndarray  # (num_objects, num_attributes) int32
    domains: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.int32)
        object.__setattr__(self, "codes", codes)
        m, n = codes.shape
        if len(self.object_ids) != m:
            raise DataError(f"{len(self.object_ids)} object ids for {m} rows")
        if len(self.attribute_names) != n or n < 1:
            raise DataError("attribute names do not match the code matrix")
        if len(set(self.object_ids)) != m:
            raise DataError("object ids are not unique")
        if len(set(self.attribute_names)) != n:
            raise DataError("attribute names are not unique")
        if len(self.domains) != n:
            raise DataError("one domain required per attribute")
        for j, dom in enumerate(self.domains):
            if len(dom) < 1:
                raise DataError(f"empty domain for attribute {self.attribute_names[j]!r}")
            if len(set(dom)) != len(dom):
                raise DataError(f"duplicate values in domain of {self.attribute_names[j]!r}")
            col = codes[:, j]
            if m and (col.min() < 0 or col.max() >= len(dom)):
                raise DataError(f"cell code out of range for attribute {self.attribute_names[j]!r}")

    @property
    def num_objects(self) -> int:
        return self.codes.shape[0]

    @property
    def num_attributes(self) -> int:
        return self.codes.shape[1]

    def value(self, obj: int, attr: int) -> str:
        return self.domains[attr][self.codes[obj, attr]]

    def row_values(self, obj: int) -> tuple[str, ...]:
        return tuple(self.domains[j][c] for j, c in enumerate(self.codes[obj]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoricalTable):
            return NotImplemented
        return (
            self.object_ids == other.object_ids
            and self.attribute_names == other.attribute_names
            and self.domains == other.domains
            and np.array_equal(self.codes, other.codes)
        )


@dataclass(frozen=True)
class RatingDataset:
    """Sparse (user, item, rating) triples with a fixed rating range.

    Users and items carry dense indices in ``[0, num_users)`` and
    ``[0, num_items)``; ``user_ids``/``item_ids`` map indices back to the
    source identifiers.
    """

    users: np.ndarray  # int32
    items: np.ndarray  # int32
    ratings: np.ndarray  # float64
    num_users: int
    num_items: int
    rating_range: tuple[float, float]
    user_ids: tuple[str, ...] = ()
    item_ids: tuple[str, ...] = ()
    _user_index: dict = field(default_factory=dict, repr=False, compare=False)
    _item_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        users = np.ascontiguousarray(self.users, dtype=np.int32)
        items = np.ascontiguousarray(self.items, dtype=np.int32)
        ratings = np.ascontiguousarray(self.ratings, dtype=np.float64)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", ratings)
        if not (len(users) == len(items) == len(ratings)):
            raise DataError("triple arrays differ in length")
        r_min, r_max = self.rating_range
        if not r_min < r_max:
            raise DataError(f"invalid rating range [{r_min}, {r_max}]")
        if len(users):
            if users.min() < 0 or users.max() >= self.num_users:
                raise DataError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of range")
            if ratings.min() < r_min or ratings.max() > r_max:
                raise DataError("rating outside the declared range")
            pairs = users.astype(np.int64) * self.num_items + items
            if len(np.unique(pairs)) != len(pairs):
                raise DataError("duplicate (user, item) pair")
        if not self.user_ids:
            object.__setattr__(self, "user_ids", tuple(str(u) for u in range(self.num_users)))
        if not self.item_ids:
            object.__setattr__(self, "item_ids", tuple(str(i) for i in range(self.num_items)))
        if len(self.user_ids) != self.num_users or len(self.item_ids) != self.num_items:
            raise DataError("id maps do not match num_users/num_items")

    def __len__(self) -> int:
        return len(self.ratings)

    @property
    def r_min(self) -> float:
        return self.rating_range[0]

    @property
    def r_max(self) -> float:
        return self.rating_range[1]

    def clamp(self, values):
        """Clamp predictions to the rating range."""
        return np.clip(values, self.r_min, self.r_max)

    def by_user(self) -> list[dict[int, float]]:
        """Per-user {item: rating} maps (built once, then cached)."""
        if not self._user_index:
            maps = [dict() for _ in range(self.num_users)]
            for u, i, r in zip(self.users, self.items, self.ratings):
                maps[u][int(i)] = float(r)
            self._user_index["maps"] = maps
        return self._user_index["maps"]

    def by_item(self) -> list[dict[int, float]]:
        """Per-item {user: rating} maps (built once, then cached)."""
        if not self._item_index:
            maps = [dict() for _ in range(self.num_items)]
            for u, i, r in zip(self.users, self.items, self.ratings):
                maps[i][int(u)] = float(r)
            self._item_index["maps"] = maps
        return self._item_index["maps"]

    def subset(self, mask: np.ndarray) -> "RatingDataset":
        """Dataset restricted to the selected triples; indices unchanged."""
        return RatingDataset(
            users=self.users[mask],
            items=self.items[mask],
            ratings=self.ratings[mask],
            num_users=self.num_users,
            num_items=self.num_items,
            rating_range=self.rating_range,
            user_ids=self.user_ids,
            item_ids=self.item_ids,
        )


@dataclass(frozen=True)
class RelationGraph:
    """Weighted directed edges between dense node indices.

    When ``normalized`` is set, each node's nonempty outgoing weights sum
    to 1.  Self-loops are never stored.
    """

    src: np.ndarray  # int32
    dst: np.ndarray  # int32
    weights: np.ndarray  # float64
    node_count: int
    normalized: bool = False
    dropped_self_loops: int = 0
    _csr: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        src = np.ascontiguousarray(self.src, dtype=np.int32)
        dst = np.ascontiguousarray(self.dst, dtype=np.int32)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weights", weights)
        if not (len(src) == len(dst) == len(weights)):
            raise DataError("edge arrays differ in length")
        if len(src):
            if src.min() < 0 or src.max() >= self.node_count:
                raise DataError("edge source out of range")
            if dst.min() < 0 or dst.max() >= self.node_count:
                raise DataError("edge destination out of range")
            if np.any(src == dst):
                raise DataError("self-loop in relation graph")
            if weights.min() < 0:
                raise DataError("negative edge weight")
        if self.normalized and len(src):
            sums = np.zeros(self.node_count)
            np.add.at(sums, src, weights)
            nonempty = np.zeros(self.node_count, dtype=bool)
            nonempty[src] = True
            if np.any(np.abs(sums[nonempty] - 1.0) > 1e-9):
                raise DataError("normalized graph with out-weights not summing to 1")

    @property
    def num_edges(self) -> int:
        return len(self.src)

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, indices, weights) with edges sorted by source then dest."""
        if not self._csr:
            order = np.lexsort((self.dst, self.src))
            indptr = np.zeros(self.node_count + 1, dtype=np.int32)
            np.add.at(indptr, self.src + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._csr["t"] = (
                indptr.astype(np.int32),
                self.dst[order].astype(np.int32),
                self.weights[order].astype(np.float64),
            )
        return self._csr["t"]

    def matvec(self, M: np.ndarray) -> np.ndarray:
        """Row-aggregated neighbor matrix: out[u] = sum_v w(u,v) * M[v]."""
        indptr, idx, val = self.csr()
        out = np.zeros_like(M)
        for u in range(self.node_count):
            lo, hi = indptr[u], indptr[u + 1]
            if lo != hi:
                out[u] = val[lo:hi] @ M[idx[lo:hi]]
        return out

    @classmethod
    def empty(cls, node_count: int) -> "RelationGraph":
        return cls(
            src=np.empty(0, dtype=np.int32),
            dst=np.empty(0, dtype=np.int32),
            weights=np.empty(0, dtype=np.float64),
            node_count=node_count,
        )


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def load_attribute_table(path) -> CategoricalTable:
    """Load an ``id,attr1,...,attrN`` CSV into a :class:`CategoricalTable`.

    Value domains are built in first-appearance order; empty cells map to
    the reserved :data:`MISSING` category, appended to the domain when
    first needed.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file, expected a header")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: header must name an id column and at least one attribute")
    attr_names = tuple(header[1:])
    n = len(attr_names)

    object_ids: list[str] = []
    seen: set[str] = set()
    domains: list[list[str]] = [[] for _ in range(n)]
    value_codes: list[dict[str, int]] = [{} for _ in range(n)]
    codes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 1:
            raise DataError(f"{path}: ragged row at line {lineno} ({len(row)} fields, expected {n + 1})")
        oid = row[0]
        if oid in seen:
            raise DataError(f"{path}: duplicate object id {oid!r} at line {lineno}")
        seen.add(oid)
        object_ids.append(oid)
        row_codes = []
        for j, raw in enumerate(row[1:]):
            value = raw if raw != "" else MISSING
            code = value_codes[j].get(value)
            if code is None:
                code = len(domains[j])
                domains[j].append(value)
                value_codes[j][value] = code
            row_codes.append(code)
        codes.append(row_codes)
    if not object_ids:
        raise DataError(f"{path}: no data rows")
    return CategoricalTable(
        object_ids=tuple(object_ids),
        attribute_names=attr_names,
        codes=np.asarray(codes, dtype=np.int32),
        domains=tuple(tuple(d) for d in domains),
    )


def save_attribute_table(table: CategoricalTable, path) -> None:
    """Write a table back to CSV; ``load_attribute_table`` round-trips it."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *table.attribute_names])
        for o in range(table.num_objects):
            values = ["" if v == MISSING else v for v in table.row_values(o)]
            writer.writerow([table.object_ids[o], *values])


def load_ratings(path, r_min: float, r_max: float) -> RatingDataset:
    """Load a ``user_id,item_id,rating`` CSV.

    String ids are densely re-indexed in first-appearance order; the
    mapping is kept on the dataset for output.
    """
    rows = _read_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["user_id", "item_id", "rating"]:
        raise DataError(f"{path}: expected header 'user_id,item_id,rating'")
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    users, items, ratings = [], [], []
    seen_pairs: set[tuple[int, int]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}: ragged row at line {lineno}")
        uid, iid, raw = row
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"{path}: unparsable rating {raw!r} at line {lineno}") from None
        if not r_min <= value <= r_max:
            raise DataError(f"{path}: rating {value} outside [{r_min}, {r_max}] at line {lineno}")
        u = user_index.setdefault(uid, len(user_index))
        i = item_index.setdefault(iid, len(item_index))
        if (u, i) in seen_pairs:
            raise DataError(f"{path}: duplicate (user, item) pair ({uid!r}, {iid!r}) at line {lineno}")
        seen_pairs.add((u, i))
        users.append(u)
        items.append(i)
        ratings.append(value)
    if not users:
        raise DataError(f"{path}: no rating rows")
    return RatingDataset(
        users=np.asarray(users, dtype=np.int32),
        items=np.asarray(items, dtype=np.int32),
        ratings=np.asarray(ratings, dtype=np.float64),
        num_users=len(user_index),
        num_items=len(item_index),
        rating_range=(float(r_min), float(r_max)),
        user_ids=tuple(user_index),
        item_ids=tuple(item_index),
    )


def load_graph(path, id_index: dict[str, int], normalize: bool = False) -> RelationGraph:
    """Load a ``src,dst,weight`` edge list over known identifiers.

    ``id_index`` maps identifiers (from the ratings or attribute file) to
    dense node indices.  Self-loops are dropped with a warning count; with
    ``normalize`` each node's outgoing weights are rescaled to sum to 1
    (all-zero neighborhoods are dropped instead).
    """
    rows = _read_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["src", "dst", "weight"]:
        raise DataError(f"{path}: expected header 'src,dst,weight'")
    src, dst, weights = [], [], []
    dropped = 0
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}: ragged row at line {lineno}")
        a, b, raw = row
        for name in (a, b):
            if name not in id_index:
                raise DataError(f"{path}: unknown id {name!r} at line {lineno}")
        try:
            w = float(raw)
        except ValueError:
            raise DataError(f"{path}: unparsable weight {raw!r} at line {lineno}") from None
        if w < 0:
            raise DataError(f"{path}: negative weight {w} at line {lineno}")
        if a == b:
            dropped += 1
            continue
        src.append(id_index[a])
        dst.append(id_index[b])
        weights.append(w)
    if dropped:
        log.warning("%s: dropped %d self-loop(s)", path, dropped)
    src_a = np.asarray(src, dtype=np.int32)
    dst_a = np.asarray(dst, dtype=np.int32)
    w_a = np.asarray(weights, dtype=np.float64)
    if normalize and len(src_a):
        sums = np.zeros(len(id_index))
        np.add.at(sums, src_a, w_a)
        keep = sums[src_a] > 0
        src_a, dst_a, w_a = src_a[keep], dst_a[keep], w_a[keep]
        w_a = w_a / sums[src_a]
    return RelationGraph(
        src=src_a,
        dst=dst_a,
        weights=w_a,
        node_count=len(id_index),
        normalized=bool(normalize),
        dropped_self_loops=dropped,
    )
