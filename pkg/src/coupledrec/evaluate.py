"""Metrics, cross-validation protocol, synthetic data and the throughput
benchmark.

Cross-validation partitions the known ratings into seeded folds of
near-equal size, trains every algorithm on the complement of each fold
and scores the clamped predictions on the held-out triples with RMSE and
MAE; the aggregate row micro-averages over the union of the test folds.
A leakage check asserts per fold that no evaluated triple was trained on.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cf, mf
from .ckmodes import ClusterModel, ck_modes
from .coupling import SimilarityMatrix, coupling_matrix
from .data import CategoricalTable, RatingDataset, RelationGraph

#: Algorithm labels accepted by the protocol and the CLI.
ALGORITHMS = ("ucf", "icf", "slope1", "ck-cf", "basemf", "cmf")


def _pairs_to_arrays(pairs):
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty prediction set")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a sequence of (actual, predicted) pairs")
    return arr[:, 0], arr[:, 1]


def rmse(pairs) -> float:
    """Root mean squared error over (actual, predicted) pairs."""
    actual, predicted = _pairs_to_arrays(pairs)
    diff = actual - predicted
    return math.sqrt(float(diff @ diff) / len(diff))


def mae(pairs) -> float:
    """Mean absolute error over (actual, predicted) pairs."""
    actual, predicted = _pairs_to_arrays(pairs)
    return float(np.abs(actual - predicted).mean())


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every rating triple to one of ``num_folds`` folds."""

    assignments: np.ndarray  # (num_triples,) int32
    num_folds: int

    def __post_init__(self):
        a = np.ascontiguousarray(self.assignments, dtype=np.int32)
        object.__setattr__(self, "assignments", a)
        sizes = np.bincount(a, minlength=self.num_folds)
        if len(sizes) != self.num_folds or sizes.max() - sizes.min() > 1 or sizes.min() < 1:
            raise ValueError("fold sizes must differ by at most one and be nonempty")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def kfold(ratings: RatingDataset, num_folds: int, seed: int) -> FoldPlan:
    """Seeded partition of the triples into folds of near-equal size."""
    if num_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(ratings) < num_folds:
        raise ValueError(f"{len(ratings)} ratings cannot fill {num_folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ratings))
    assignments = np.zeros(len(ratings), dtype=np.int32)
    base = len(ratings) // num_folds
    extra = len(ratings) % num_folds
    start = 0
    for f in range(num_folds):
        size = base + (1 if f < extra else 0)
        assignments[perm[start : start + size]] = f
        start += size
    return FoldPlan(assignments=assignments, num_folds=num_folds)


def make_predictor(
    algo: str,
    train_ratings: RatingDataset,
    *,
    cap: int = 30,
    clusters: ClusterModel | None = None,
    sim: SimilarityMatrix | None = None,
    graphs=None,
    train_config: mf.TrainConfig | None = None,
):
    """A ``predict(u, y) -> float`` closure for an algorithm label.

    Neighborhood algorithms share one mean cache over the training data;
    factor algorithms are trained here.  All predictions come back
    clamped and finite.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    means = cf.MeanCache(train_ratings)
    if algo == "ucf":
        return lambda u, y: cf.predict_user_based(
            train_ratings, cf.PredictionRequest(u, y, cap=cap), means
        )
    if algo == "icf":
        return lambda u, y: cf.predict_item_based(
            train_ratings, cf.PredictionRequest(u, y, cap=cap), means
        )
    if algo == "slope1":
        return lambda u, y: cf.predict_slope_one(
            train_ratings, cf.PredictionRequest(u, y, cap=cap), means
        )
    if algo == "ck-cf":
        if clusters is None or sim is None:
            raise ValueError("ck-cf needs an item cluster model and a similarity matrix")
        return lambda u, y: cf.predict_coupled(
            train_ratings, clusters, sim, cf.PredictionRequest(u, y, cap=cap), means
        )
    config = train_config or mf.TrainConfig()
    model_graphs = graphs if algo == "cmf" else None
    model = mf.train(train_ratings, model_graphs, config)
    r_min, r_max = train_ratings.rating_range
    P, Q = model.P, model.Q
    if model_graphs is None:
        P_aug, WQ = P, np.zeros_like(Q)
    else:
        user_graph, item_graph = model_graphs
        P_aug = P + (user_graph.matvec(P) if user_graph is not None else 0.0)
        WQ = item_graph.matvec(Q) if item_graph is not None else np.zeros_like(Q)

    def predict(u, y):
        raw = model.offset + float(P_aug[u] @ Q[y]) + float(P[u] @ WQ[y])
        return min(max(raw, r_min), r_max)

    return predict


@dataclass(frozen=True)
class FoldMetrics:
    fold: str
    rmse: float
    mae: float
    n_test: int
    seconds: float


@dataclass(frozen=True)
class EvalReport:
    """Per-fold and micro-averaged error metrics for one algorithm."""

    algo: str
    folds: tuple[FoldMetrics, ...]
    aggregate: FoldMetrics
    config: dict = field(default_factory=dict)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("algo,fold,rmse,mae,n_test,seconds\n")
            for row in (*self.folds, self.aggregate):
                fh.write(
                    f"{self.algo},{row.fold},{row.rmse:.6f},{row.mae:.6f},"
                    f"{row.n_test},{row.seconds:.6f}\n"
                )


def cross_validate(
    ratings: RatingDataset,
    algo: str,
    num_folds: int,
    seed: int,
    *,
    cap: int = 30,
    item_table: CategoricalTable | None = None,
    num_clusters: int = 10,
    graphs=None,
    train_config: mf.TrainConfig | None = None,
    max_iter: int = 100,
) -> EvalReport:
    """K-fold evaluation of one algorithm.

    Item clusters and the coupled similarity matrix for ``ck-cf`` come
    from the item attribute table alone, so they are computed once and
    shared across folds without leaking rating information.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    plan = kfold(ratings, num_folds, seed)
    clusters = sim = None
    if algo == "ck-cf":
        if item_table is None:
            raise ValueError("ck-cf cross-validation needs the item attribute table")
        if item_table.num_objects != ratings.num_items:
            raise ValueError("item attribute table does not cover the rated items")
        clusters = ck_modes(item_table, num_clusters, seed, max_iter)
        sim = coupling_matrix(item_table)

    fold_rows = []
    all_pairs = []
    for f in range(plan.num_folds):
        start = time.perf_counter()
        test_idx = plan.test_indices(f)
        train_idx = plan.train_indices(f)
        assert not np.intersect1d(test_idx, train_idx).size, "train/test leakage"
        train_ds = ratings.subset(plan.assignments != f)
        predict = make_predictor(
            algo,
            train_ds,
            cap=cap,
            clusters=clusters,
            sim=sim,
            graphs=graphs,
            train_config=train_config,
        )
        pairs = [
            (ratings.ratings[t], predict(int(ratings.users[t]), int(ratings.items[t])))
            for t in test_idx
        ]
        seconds = time.perf_counter() - start
        fold_rows.append(
            FoldMetrics(
                fold=str(f),
                rmse=rmse(pairs),
                mae=mae(pairs),
                n_test=len(pairs),
                seconds=seconds,
            )
        )
        all_pairs.extend(pairs)
    aggregate = FoldMetrics(
        fold="all",
        rmse=rmse(all_pairs),
        mae=mae(all_pairs),
        n_test=len(all_pairs),
        seconds=sum(r.seconds for r in fold_rows),
    )
    config = {
        "folds": num_folds,
        "seed": seed,
        "cap": cap,
        "num_clusters": num_clusters if algo == "ck-cf" else None,
        "train_config": train_config,
    }
    return EvalReport(algo=algo, folds=tuple(fold_rows), aggregate=aggregate, config=config)


def _random_graph(rng, n: int, density: float) -> RelationGraph:
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    weights = np.ones(len(src), dtype=np.float64)
    if len(src):
        sums = np.zeros(n)
        np.add.at(sums, src, weights)
        weights = weights / sums[src]
    return RelationGraph(
        src=src.astype(np.int32),
        dst=dst.astype(np.int32),
        weights=weights,
        node_count=n,
        normalized=True,
    )


def synth_coupled(
    seed: int,
    num_users: int,
    num_items: int,
    rank: int,
    friend_density: float,
    noise: float,
    *,
    rating_density: float = 0.1,
    rating_range: tuple[float, float] = (1.0, 5.0),
    quantize: bool = True,
):
    """Synthetic ratings with planted factor and graph structure.

    Plants ground-truth factors and row-normalized user/item graphs, then
    generates ratings from the graph-coupled forward model plus Gaussian
    noise.  With ``quantize`` the ratings are clipped to the range and
    rounded to its integer grid; without it the raw values are kept (and
    the declared range widened to cover them), so at ``noise=0`` the
    forward model reproduces the stored ratings exactly.

    Returns ``(ratings, (user_graph, item_graph), truth_model)``.
    """
    if num_users < 2 or num_items < 2:
        raise ValueError("need at least 2 users and 2 items")
    rng = np.random.default_rng(seed)
    scale = math.sqrt(0.9 / math.sqrt(rank))
    P = rng.normal(0.0, scale, (num_users, rank))
    Q = rng.normal(0.0, scale, (num_items, rank))
    user_graph = _random_graph(rng, num_users, friend_density)
    item_graph = _random_graph(rng, num_items, friend_density)
    offset = 0.5 * (rating_range[0] + rating_range[1])
    truth = mf.FactorModel(P=P, Q=Q, offset=offset)

    total = num_users * num_items
    count = max(1, int(round(rating_density * total)))
    flat = rng.choice(total, size=count, replace=False)
    users = (flat // num_items).astype(np.int32)
    items = (flat % num_items).astype(np.int32)
    raw = mf.mf_predict_batch(truth, (user_graph, item_graph), users, items)
    raw = raw + noise * rng.normal(0.0, 1.0, count)

    if quantize:
        values = np.clip(np.rint(np.clip(raw, *rating_range)), *rating_range)
        declared = rating_range
    else:
        values = raw
        declared = (
            min(rating_range[0], float(raw.min())),
            max(rating_range[1], float(raw.max())),
        )
    ratings = RatingDataset(
        users=users,
        items=items,
        ratings=values,
        num_users=num_users,
        num_items=num_items,
        rating_range=declared,
    )
    return ratings, (user_graph, item_graph), truth


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement of two labelings.

    1 for identical partitions, around 0 for independent ones.  Used to
    score planted-cluster recovery.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be equal-length vectors")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) // 2

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(np.int64(n))
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


@dataclass(frozen=True)
class BenchResult:
    """One benchmark measurement plus structural candidate-set stats."""

    algo: str
    k: int
    requests: int
    seconds: float
    throughput: float
    max_candidates: int


def save_bench_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("algo,k,requests,seconds,throughput,max_candidates\n")
        for r in results:
            fh.write(
                f"{r.algo},{r.k},{r.requests},{r.seconds:.6f},"
                f"{r.throughput:.3f},{r.max_candidates}\n"
            )


def _candidate_count(algo, ratings, clusters, u: int, y: int) -> int:
    """Size of the neighbor pool an algorithm scans for one prediction."""
    rated = ratings.by_user()[u]
    if algo == "ck-cf":
        cluster_y = clusters.assignment[y]
        return sum(1 for x in rated if x != y and clusters.assignment[x] == cluster_y)
    if algo == "ucf":
        return sum(1 for v in ratings.by_item()[y] if v != u)
    if algo in ("icf", "slope1"):
        return sum(1 for x in rated if x != y)
    return 0


def throughput_bench(
    ratings: RatingDataset,
    algo: str,
    *,
    requests: int,
    warmup: int = 5,
    top_count: int = 10,
    cap: int = 30,
    seed: int = 0,
    clusters: ClusterModel | None = None,
    sim: SimilarityMatrix | None = None,
    graphs=None,
    train_config: mf.TrainConfig | None = None,
    k_label: int = 0,
) -> BenchResult:
    """Time ``requests`` top-N recommendation calls after ``warmup``.

    Also tracks the largest candidate set any prediction scanned; for the
    cluster-scoped predictor this is asserted against the largest cluster
    size.  Runs on one thread so throughputs are comparable.
    """
    if requests < 1:
        raise ValueError("need at least one request")
    predict = make_predictor(
        algo,
        ratings,
        cap=cap,
        clusters=clusters,
        sim=sim,
        graphs=graphs,
        train_config=train_config,
    )
    rng = np.random.default_rng(seed)
    targets = rng.integers(0, ratings.num_users, size=warmup + requests)

    max_candidates = 0

    def run(u: int) -> None:
        nonlocal max_candidates
        rated = ratings.by_user()[u]
        for y in range(ratings.num_items):
            if y not in rated:
                c = _candidate_count(algo, ratings, clusters, u, y)
                if c > max_candidates:
                    max_candidates = c
        cf.top_n(ratings, predict, u, top_count)

    for u in targets[:warmup]:
        run(int(u))
    max_candidates = 0  # warmup observations discarded with the timings
    start = time.perf_counter()
    for u in targets[warmup:]:
        run(int(u))
    seconds = time.perf_counter() - start
    if algo == "ck-cf":
        largest = int(clusters.cluster_sizes().max())
        assert max_candidates <= largest, (
            f"candidate set {max_candidates} exceeds largest cluster {largest}"
        )
    return BenchResult(
        algo=algo,
        k=k_label,
        requests=requests,
        seconds=seconds,
        throughput=requests / seconds if seconds > 0 else float("inf"),
        max_candidates=max_candidates,
    )
