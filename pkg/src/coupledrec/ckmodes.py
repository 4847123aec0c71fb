"""K-modes clustering of categorical objects under coupled similarity.

Assignment maximizes the coupled object similarity to each cluster's mode
and the mode update maximizes, per attribute independently, the summed
coupled value similarity over the cluster members (valid because the
object similarity is additive over attributes).  A plain variant with
simple matching similarity and majority-value modes is included as a
baseline.

Value frequencies always come from the whole table, so the similarity is
a fixed function of value pairs while memberships move; together with the
argmax steps this makes the objective non-decreasing, which the loop
checks on every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingParams, FrequencyIndex, cavs_tables
from .data import CategoricalTable

#: Slack allowed when checking that the objective never decreases.
OBJECTIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ClusterModel:
    """Clustering result: assignment, per-cluster modes and the reached
    objective (total similarity of objects to their cluster's mode)."""

    k: int
    assignment: np.ndarray  # (num_objects,) int32
    modes: np.ndarray  # (k, num_attributes) int32 value codes
    objective: float
    iterations: int

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def mode_values(self, table: CategoricalTable, cluster: int) -> tuple[str, ...]:
        return tuple(
            table.domains[j][self.modes[cluster, j]] for j in range(table.num_attributes)
        )


def init_modes(table: CategoricalTable, k: int, seed: int) -> np.ndarray:
    """Modes of ``k`` distinct objects drawn uniformly without replacement."""
    m = table.num_objects
    if not 1 <= k <= m:
        raise ValueError(f"k={k} outside [1, {m}]")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(m, size=k, replace=False)
    return table.codes[chosen].copy()


def _mode_similarities(codes: np.ndarray, tables, modes: np.ndarray) -> np.ndarray:
    """(num_objects, k) coupled similarity of every object to every mode."""
    m = codes.shape[0]
    n = codes.shape[1]
    sims = np.zeros((m, modes.shape[0]), dtype=np.float64)
    for c in range(modes.shape[0]):
        acc = sims[:, c]
        for j in range(n):
            acc += tables[j][codes[:, j], modes[c, j]]
    return sims


def _matching_similarities(codes: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """(num_objects, k) count of attribute values matching each mode."""
    return (codes[:, None, :] == modes[None, :, :]).sum(axis=2).astype(np.float64)


def assign(
    table: CategoricalTable,
    index: FrequencyIndex,
    params: CouplingParams | None,
    modes: np.ndarray,
    tables=None,
) -> np.ndarray:
    """Send every object to the mode of highest coupled similarity; ties
    break toward the lowest cluster index."""
    if tables is None:
        tables = cavs_tables(index, params)
    sims = _mode_similarities(table.codes, tables, modes)
    return np.argmax(sims, axis=1).astype(np.int32)


def update_mode(
    table: CategoricalTable,
    index: FrequencyIndex,
    params: CouplingParams | None,
    members: np.ndarray,
    tables=None,
) -> np.ndarray:
    """Best mode vector for a member set, chosen per attribute.

    Maximizes the summed coupled value similarity to the members over the
    full value domain of each attribute; ties break toward the earlier
    domain value.
    """
    members = np.asarray(members)
    if members.size == 0:
        raise ValueError("cannot compute a mode for an empty member set")
    if tables is None:
        tables = cavs_tables(index, params)
    n = table.num_attributes
    mode = np.zeros(n, dtype=np.int32)
    for j in range(n):
        counts = np.bincount(table.codes[members, j], minlength=len(table.domains[j]))
        scores = np.zeros(len(table.domains[j]), dtype=np.float64)
        for v in np.flatnonzero(counts):
            scores += counts[v] * tables[j][v, :]
        mode[j] = int(np.argmax(scores))
    return mode


def _majority_mode(table: CategoricalTable, members: np.ndarray) -> np.ndarray:
    n = table.num_attributes
    mode = np.zeros(n, dtype=np.int32)
    for j in range(n):
        counts = np.bincount(table.codes[members, j], minlength=len(table.domains[j]))
        mode[j] = int(np.argmax(counts))
    return mode


def _lloyd(table, k, seed, max_iter, sims_fn, update_fn) -> ClusterModel:
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    codes = table.codes
    modes = init_modes(table, k, seed)
    prev_assignment = None
    prev_objective = -np.inf
    iterations = 0
    assignment = np.zeros(codes.shape[0], dtype=np.int32)
    for _ in range(max_iter):
        iterations += 1
        sims = sims_fn(codes, modes)
        assignment = np.argmax(sims, axis=1).astype(np.int32)

        # move the worst-fitting objects into emptied clusters; the update
        # below then gives each a single-member mode, which cannot lower
        # the objective (it maximizes that object's similarity)
        sizes = np.bincount(assignment, minlength=k)
        empties = np.flatnonzero(sizes == 0)
        if empties.size:
            fit = sims[np.arange(codes.shape[0]), assignment]
            worst = iter(np.lexsort((np.arange(codes.shape[0]), fit)))
            for c in empties:
                for o in worst:
                    if sizes[assignment[o]] > 1:
                        sizes[assignment[o]] -= 1
                        assignment[o] = c
                        sizes[c] += 1
                        break
        if prev_assignment is not None and np.array_equal(assignment, prev_assignment):
            break
        prev_assignment = assignment
        for c in range(k):
            members = np.flatnonzero(assignment == c)
            if members.size:
                modes[c] = update_fn(members)

        objective = float(
            sims_fn(codes, modes)[np.arange(codes.shape[0]), assignment].sum()
        )
        if objective < prev_objective - OBJECTIVE_TOLERANCE:
            raise AssertionError(
                f"objective decreased from {prev_objective} to {objective} "
                f"at iteration {iterations}"
            )
        prev_objective = objective

    objective = float(sims_fn(codes, modes)[np.arange(codes.shape[0]), assignment].sum())
    return ClusterModel(
        k=k,
        assignment=assignment,
        modes=modes,
        objective=objective,
        iterations=iterations,
    )


def ck_modes(
    table: CategoricalTable,
    k: int,
    seed: int,
    max_iter: int = 100,
    params: CouplingParams | None = None,
) -> ClusterModel:
    """K-modes under coupled similarity.

    Alternates assignment and per-attribute mode updates until the
    assignment stabilizes or ``max_iter`` is reached.  Emptied clusters
    are reseeded with the vectors of the objects fitting their own cluster
    worst.  Deterministic for a fixed seed.
    """
    index = FrequencyIndex.from_table(table)
    tables = cavs_tables(index, params)

    def sims_fn(codes, modes):
        return _mode_similarities(codes, tables, modes)

    def update_fn(members):
        return update_mode(table, index, params, members, tables=tables)

    return _lloyd(table, k, seed, max_iter, sims_fn, update_fn)


def plain_k_modes(
    table: CategoricalTable,
    k: int,
    seed: int,
    max_iter: int = 100,
) -> ClusterModel:
    """Baseline K-modes: simple matching similarity, majority-value modes."""

    def sims_fn(codes, modes):
        return _matching_similarities(codes, modes)

    def update_fn(members):
        return _majority_mode(table, members)

    return _lloyd(table, k, seed, max_iter, sims_fn, update_fn)


def save_assignments(model: ClusterModel, table: CategoricalTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("object_id,cluster\n")
        for o, oid in enumerate(table.object_ids):
            fh.write(f"{oid},{model.assignment[o]}\n")


def save_modes(model: ClusterModel, table: CategoricalTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("cluster," + ",".join(table.attribute_names) + "\n")
        for c in range(model.k):
            fh.write(f"{c}," + ",".join(model.mode_values(table, c)) + "\n")
