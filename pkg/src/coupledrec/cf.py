"""Neighborhood rating prediction.

The main predictor scores an item against a user's co-rated items inside
the item's cluster, weighted by attribute-level coupled similarity.
User-based, item-based (adjusted cosine) and Slope One baselines share
the same fallback chain and clamping:

* no usable neighbors -> the user's mean rating;
* user unrated -> the item's mean rating;
* both absent -> the global mean;
* every prediction is clamped to the rating range.

All predictors are pure functions of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ckmodes import ClusterModel
from .coupling import SimilarityMatrix
from .data import RatingDataset


@dataclass(frozen=True)
class PredictionRequest:
    """A single (user, item) prediction.

    ``source`` selects the neighbor pool of the coupled predictor:
    ``"ck-cluster"`` restricts it to the target item's cluster,
    ``"global"`` uses all co-rated items.  ``cap`` bounds the neighbor
    count.
    """

    user: int
    item: int
    source: str = "ck-cluster"
    cap: int = 30

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("neighbor cap must be at least 1")
        if self.source not in ("ck-cluster", "global"):
            raise ValueError(f"unknown neighbor source {self.source!r}")


class MeanCache:
    """Per-user, per-item and global mean ratings.

    Means are taken over observed ratings only; users/items without any
    rating carry NaN and are treated as absent.
    """

    def __init__(self, ratings: RatingDataset):
        if len(ratings) == 0:
            raise ValueError("cannot build means from an empty dataset")
        user_sum = np.zeros(ratings.num_users)
        user_cnt = np.zeros(ratings.num_users)
        item_sum = np.zeros(ratings.num_items)
        item_cnt = np.zeros(ratings.num_items)
        np.add.at(user_sum, ratings.users, ratings.ratings)
        np.add.at(user_cnt, ratings.users, 1.0)
        np.add.at(item_sum, ratings.items, ratings.ratings)
        np.add.at(item_cnt, ratings.items, 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.user_mean = user_sum / user_cnt
            self.item_mean = item_sum / item_cnt
        self.global_mean = float(ratings.ratings.mean())

    def has_user(self, u: int) -> bool:
        return not math.isnan(self.user_mean[u])

    def has_item(self, i: int) -> bool:
        return not math.isnan(self.item_mean[i])

    def fallback(self, u: int, y: int) -> float:
        """User mean, then item mean, then the global mean."""
        if self.has_user(u):
            return float(self.user_mean[u])
        if self.has_item(y):
            return float(self.item_mean[y])
        return self.global_mean


def _clamp(value: float, ratings: RatingDataset) -> float:
    return min(max(value, ratings.r_min), ratings.r_max)


def _cold_start(means: MeanCache, u: int, y: int) -> float:
    """Fallback when the user has no ratings at all."""
    if means.has_item(y):
        return float(means.item_mean[y])
    return means.global_mean


def predict_coupled(
    ratings: RatingDataset,
    clusters: ClusterModel | None,
    sim: SimilarityMatrix,
    req: PredictionRequest,
    means: MeanCache | None = None,
) -> float:
    """Cluster-scoped prediction weighted by coupled item similarity.

    Neighbors are the items co-rated by the user that share the target
    item's cluster, the ``cap`` most similar first; the predicted rating
    offsets the user's mean by the similarity-weighted, item-centered
    deviations of those neighbors.
    """
    if len(ratings) == 0:
        raise ValueError("empty dataset")
    means = means or MeanCache(ratings)
    u, y = req.user, req.item
    rated = ratings.by_user()[u]
    if not rated:
        return _clamp(_cold_start(means, u, y), ratings)
    if req.source == "ck-cluster":
        if clusters is None:
            raise ValueError("cluster-scoped prediction needs a cluster model")
        cluster_y = clusters.assignment[y]
        candidates = [x for x in rated if x != y and clusters.assignment[x] == cluster_y]
    else:
        candidates = [x for x in rated if x != y]
    candidates.sort(key=lambda x: (-sim.values[x, y], x))
    candidates = candidates[: req.cap]
    denom = sum(sim.values[x, y] for x in candidates)
    if not candidates or denom <= 0.0:
        return _clamp(float(means.user_mean[u]), ratings)
    num = sum(sim.values[x, y] * (rated[x] - means.item_mean[x]) for x in candidates)
    return _clamp(float(means.user_mean[u]) + num / denom, ratings)


def rating_similarity(
    ratings: RatingDataset, a: int, b: int, means: MeanCache | None = None
) -> float:
    """Adjusted cosine between two items over their common raters.

    Ratings are centered by each co-rater's mean; 0 with fewer than two
    co-raters or a zero norm.
    """
    means = means or MeanCache(ratings)
    ra = ratings.by_item()[a]
    rb = ratings.by_item()[b]
    co = sorted(ra.keys() & rb.keys())
    if len(co) < 2:
        return 0.0
    num = na = nb = 0.0
    for u in co:
        da = ra[u] - means.user_mean[u]
        db = rb[u] - means.user_mean[u]
        num += da * db
        na += da * da
        nb += db * db
    if na == 0.0 or nb == 0.0:
        return 0.0
    return num / (math.sqrt(na) * math.sqrt(nb))


def predict_item_based(
    ratings: RatingDataset, req: PredictionRequest, means: MeanCache | None = None
) -> float:
    """Item-based prediction over all co-rated items, ranked by adjusted
    cosine; neighbors with non-positive similarity are discarded."""
    if len(ratings) == 0:
        raise ValueError("empty dataset")
    means = means or MeanCache(ratings)
    u, y = req.user, req.item
    rated = ratings.by_user()[u]
    if not rated:
        return _clamp(_cold_start(means, u, y), ratings)
    scored = []
    for x in rated:
        if x == y:
            continue
        s = rating_similarity(ratings, x, y, means)
        if s > 0.0:
            scored.append((x, s))
    scored.sort(key=lambda t: (-t[1], t[0]))
    scored = scored[: req.cap]
    denom = sum(s for _, s in scored)
    if not scored or denom <= 0.0:
        return _clamp(float(means.user_mean[u]), ratings)
    num = sum(s * (rated[x] - means.item_mean[x]) for x, s in scored)
    return _clamp(float(means.user_mean[u]) + num / denom, ratings)


def _pearson(xs, ys) -> float:
    """Pearson correlation of two equal-length vectors; 0 when degenerate."""
    n = len(xs)
    if n < 2:
        return 0.0
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sx = sy = 0.0
    for x, y in zip(xs, ys):
        dx = x - mx
        dy = y - my
        num += dx * dy
        sx += dx * dx
        sy += dy * dy
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return num / (math.sqrt(sx) * math.sqrt(sy))


def predict_user_based(
    ratings: RatingDataset, req: PredictionRequest, means: MeanCache | None = None
) -> float:
    """User-based prediction: neighbors who rated the item, weighted by
    the Pearson correlation of their co-rated items with the user;
    non-positive correlations are discarded."""
    if len(ratings) == 0:
        raise ValueError("empty dataset")
    means = means or MeanCache(ratings)
    u, y = req.user, req.item
    rated = ratings.by_user()[u]
    if not rated:
        return _clamp(_cold_start(means, u, y), ratings)
    scored = []
    for v, rvy in ratings.by_item()[y].items():
        if v == u:
            continue
        rated_v = ratings.by_user()[v]
        co = sorted(rated.keys() & rated_v.keys())
        w = _pearson([rated[i] for i in co], [rated_v[i] for i in co])
        if w > 0.0:
            scored.append((v, w, rvy))
    scored.sort(key=lambda t: (-t[1], t[0]))
    scored = scored[: req.cap]
    denom = sum(w for _, w, _ in scored)
    if not scored or denom <= 0.0:
        return _clamp(float(means.user_mean[u]), ratings)
    num = sum(w * (rvy - means.user_mean[v]) for v, w, rvy in scored)
    return _clamp(float(means.user_mean[u]) + num / denom, ratings)


def predict_slope_one(
    ratings: RatingDataset, req: PredictionRequest, means: MeanCache | None = None
) -> float:
    """Slope One: co-rater-weighted average of per-item-pair rating
    deviations added to the user's own ratings."""
    if len(ratings) == 0:
        raise ValueError("empty dataset")
    means = means or MeanCache(ratings)
    u, y = req.user, req.item
    rated = ratings.by_user()[u]
    if not rated:
        return _clamp(_cold_start(means, u, y), ratings)
    raters_y = ratings.by_item()[y]
    num = denom = 0.0
    for j, ruj in rated.items():
        if j == y:
            continue
        raters_j = ratings.by_item()[j]
        co = raters_y.keys() & raters_j.keys()
        c = len(co)
        if c == 0:
            continue
        dev = sum(raters_y[v] - raters_j[v] for v in sorted(co)) / c
        num += c * (dev + ruj)
        denom += c
    if denom == 0.0:
        return _clamp(float(means.user_mean[u]), ratings)
    return _clamp(num / denom, ratings)


def top_n(ratings: RatingDataset, predict, u: int, n: int) -> list[int]:
    """The user's ``n`` best unrated items under a ``predict(u, y)``
    scorer; ties break toward the lower item index."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rated = ratings.by_user()[u]
    scored = [(-predict(u, y), y) for y in range(ratings.num_items) if y not in rated]
    scored.sort()
    return [y for _, y in scored[:n]]
