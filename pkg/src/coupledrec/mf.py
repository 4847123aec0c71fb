"""Latent-factor rating models trained by stochastic gradient descent.

The base model predicts ``offset + P_u . Q_i``.  The graph-coupled
variant adds two propagation terms: the user's graph neighbors applied to
the item factors and the item's graph neighbors applied to the user
factors,

    offset + P_u.Q_i + sum_v S_uv P_v.Q_i + sum_j W_ij P_u.Q_j

With empty graphs the coupled model reduces to the base model exactly,
bit for bit, because both run the same update code over empty neighbor
ranges.  Analytic gradients of the regularized squared-error loss are
exposed separately so they can be verified against finite differences.

Training is single-threaded and fully determined by the seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import RatingDataset, RelationGraph

_MAGIC = b"CRECMF1\n"


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite training loss {value!r} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class FactorModel:
    """User factors, item factors and a global offset."""

    P: np.ndarray  # (num_users, rank)
    Q: np.ndarray  # (num_items, rank)
    offset: float
    offset_trained: bool = False
    loss_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        P = np.ascontiguousarray(self.P, dtype=np.float64)
        Q = np.ascontiguousarray(self.Q, dtype=np.float64)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        if P.ndim != 2 or Q.ndim != 2 or P.shape[1] != Q.shape[1]:
            raise ValueError("P and Q must be matrices of equal rank")
        if P.shape[1] > min(P.shape[0], Q.shape[0]):
            raise ValueError("rank must not exceed min(num_users, num_items)")
        if not (np.isfinite(P).all() and np.isfinite(Q).all() and np.isfinite(self.offset)):
            raise ValueError("factor model contains non-finite entries")

    @property
    def num_users(self) -> int:
        return self.P.shape[0]

    @property
    def num_items(self) -> int:
        return self.Q.shape[0]

    @property
    def rank(self) -> int:
        return self.P.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters; the seed drives initialization and shuffling."""

    rank: int = 8
    regularization: float = 0.02
    learning_rate: float = 0.01
    epochs: int = 20
    init_scale: float = 0.1
    seed: int = 0
    shuffle: bool = True
    train_offset: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.init_scale <= 0:
            raise ValueError("init scale must be positive")


def _empty_csr(n: int):
    return (
        np.zeros(n + 1, dtype=np.int32),
        np.empty(0, dtype=np.int32),
        np.empty(0, dtype=np.float64),
    )


def _graph_csr(graph: RelationGraph | None, n: int):
    if graph is None:
        return _empty_csr(n)
    if graph.node_count != n:
        raise ValueError(f"graph over {graph.node_count} nodes, expected {n}")
    return graph.csr()


def _split_graphs(graphs, num_users: int, num_items: int):
    user_graph = item_graph = None
    if graphs is not None:
        user_graph, item_graph = graphs
    s = _graph_csr(user_graph, num_users)
    w = _graph_csr(item_graph, num_items)
    return s, w


def base_predict(model: FactorModel, u: int, i: int) -> float:
    """Plain factor prediction ``offset + P_u . Q_i``."""
    return float(model.offset + model.P[u] @ model.Q[i])


def cmf_predict(model: FactorModel, graphs, u: int, i: int) -> float:
    """Graph-coupled prediction adding neighbor-propagated factor terms."""
    (sp, si, sv), (wp, wi, wv) = _split_graphs(graphs, model.num_users, model.num_items)
    total = base_predict(model, u, i)
    for e in range(sp[u], sp[u + 1]):
        total += sv[e] * float(model.P[si[e]] @ model.Q[i])
    for e in range(wp[i], wp[i + 1]):
        total += wv[e] * float(model.P[u] @ model.Q[wi[e]])
    return total


def _raw_predictions(P, Q, offset, graphs, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Vectorized (graph-coupled) predictions for index arrays."""
    if graphs is None or all(g is None for g in graphs):
        return offset + np.einsum("ij,ij->i", P[users], Q[items])
    user_graph, item_graph = graphs
    SP = user_graph.matvec(P) if user_graph is not None else np.zeros_like(P)
    WQ = item_graph.matvec(Q) if item_graph is not None else np.zeros_like(Q)
    return (
        offset
        + np.einsum("ij,ij->i", (P + SP)[users], Q[items])
        + np.einsum("ij,ij->i", P[users], WQ[items])
    )


def _predictions(model: FactorModel, graphs, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    return _raw_predictions(model.P, model.Q, model.offset, graphs, users, items)


def _raw_loss(P, Q, offset, graphs, ratings: RatingDataset, regularization: float) -> float:
    with np.errstate(over="ignore", invalid="ignore"):  # inf/nan flag divergence
        err = _raw_predictions(P, Q, offset, graphs, ratings.users, ratings.items) - ratings.ratings
        penalty = regularization / 2.0 * (float(np.sum(P**2)) + float(np.sum(Q**2)))
        return 0.5 * float(err @ err) + penalty


def loss(model: FactorModel, graphs, ratings: RatingDataset, regularization: float) -> float:
    """Half the squared prediction error over the known ratings plus the
    factor-norm penalty."""
    return _raw_loss(model.P, model.Q, model.offset, graphs, ratings, regularization)


def gradients(model: FactorModel, graphs, ratings: RatingDataset, regularization: float):
    """Analytic partials of :func:`loss` w.r.t. P, Q and the offset.

    Each residual propagates to the rated user and item rows and, in the
    coupled variant, to every graph neighbor of either.
    """
    P, Q = model.P, model.Q
    users, items = ratings.users, ratings.items
    err = _predictions(model, graphs, users, items) - ratings.ratings

    user_graph = item_graph = None
    if graphs is not None:
        user_graph, item_graph = graphs
    SP = user_graph.matvec(P) if user_graph is not None else np.zeros_like(P)
    WQ = item_graph.matvec(Q) if item_graph is not None else np.zeros_like(Q)

    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    np.add.at(gP, users, err[:, None] * (Q[items] + WQ[items]))
    np.add.at(gQ, items, err[:, None] * (P[users] + SP[users]))

    # residual mass per user/item row, then scattered through the graphs
    U = np.zeros_like(P)
    V = np.zeros_like(Q)
    np.add.at(U, users, err[:, None] * Q[items])
    np.add.at(V, items, err[:, None] * P[users])
    if user_graph is not None:
        sp, si, sv = user_graph.csr()
        for u in range(user_graph.node_count):
            for e in range(sp[u], sp[u + 1]):
                gP[si[e]] += sv[e] * U[u]
    if item_graph is not None:
        wp, wi, wv = item_graph.csr()
        for i in range(item_graph.node_count):
            for e in range(wp[i], wp[i + 1]):
                gQ[wi[e]] += wv[e] * V[i]

    gP += regularization * P
    gQ += regularization * Q
    g_offset = float(err.sum())
    return gP, gQ, g_offset


def train(ratings: RatingDataset, graphs, config: TrainConfig) -> FactorModel:
    """Fit a factor model by per-rating SGD.

    Factors start i.i.d. uniform in ``[-init_scale, init_scale]`` under
    the seed; the offset starts at the global mean rating (updated only
    when ``train_offset`` is set).  Each epoch visits every known rating
    once, in seeded shuffled order when ``shuffle`` is on.  Raises
    :class:`TrainingDiverged` as soon as an epoch ends with a non-finite
    loss.
    """
    if len(ratings) == 0:
        raise ValueError("cannot train on an empty dataset")
    if config.rank > min(ratings.num_users, ratings.num_items):
        raise ValueError("rank must not exceed min(num_users, num_items)")
    rng = np.random.default_rng(config.seed)
    P = rng.uniform(-config.init_scale, config.init_scale, (ratings.num_users, config.rank))
    Q = rng.uniform(-config.init_scale, config.init_scale, (ratings.num_items, config.rank))
    offset = float(ratings.ratings.mean())

    (sp, si, sv), (wp, wi, wv) = _split_graphs(graphs, ratings.num_users, ratings.num_items)
    history = []
    for epoch in range(config.epochs):
        if config.shuffle:
            order = rng.permutation(len(ratings)).astype(np.int64)
        else:
            order = np.arange(len(ratings), dtype=np.int64)
        try:
            offset = kernels.sgd_epoch(
                P,
                Q,
                offset,
                ratings.users,
                ratings.items,
                ratings.ratings,
                order,
                config.learning_rate,
                config.regularization,
                sp,
                si,
                sv,
                wp,
                wi,
                wv,
                config.train_offset,
            )
        except OverflowError as exc:  # the pure-Python kernel overflows loudly
            raise TrainingDiverged(epoch + 1, float("inf")) from exc
        epoch_loss = _raw_loss(P, Q, offset, graphs, ratings, config.regularization)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(epoch + 1, epoch_loss)
        history.append(epoch_loss)
    return FactorModel(
        P=P,
        Q=Q,
        offset=offset,
        offset_trained=config.train_offset,
        loss_history=tuple(history),
    )


def mf_predict_batch(
    model: FactorModel,
    graphs,
    users,
    items,
    rating_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """Predictions for parallel index arrays, clamped when a range is
    given (training itself never clamps)."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    preds = _predictions(model, graphs, users, items)
    if rating_range is not None:
        preds = np.clip(preds, rating_range[0], rating_range[1])
    return preds


def save_model(model: FactorModel, path) -> None:
    """Serialize a model losslessly.

    Layout: 8-byte magic ``CRECMF1\\n``; little-endian header
    ``<qqqdq`` = (num_users, num_items, rank, offset, flags; flag bit 0 =
    offset trained); then P and Q as row-major little-endian float64.
    """
    flags = 1 if model.offset_trained else 0
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<qqqdq", model.num_users, model.num_items, model.rank, model.offset, flags
            )
        )
        fh.write(model.P.astype("<f8").tobytes())
        fh.write(model.Q.astype("<f8").tobytes())


def load_model(path) -> FactorModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a factor-model file")
        header = fh.read(struct.calcsize("<qqqdq"))
        u0, i0, d, offset, flags = struct.unpack("<qqqdq", header)
        P = np.frombuffer(fh.read(u0 * d * 8), dtype="<f8").reshape(u0, d)
        Q = np.frombuffer(fh.read(i0 * d * 8), dtype="<f8").reshape(i0, d)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after factor matrices")
    return FactorModel(
        P=P.astype(np.float64),
        Q=Q.astype(np.float64),
        offset=offset,
        offset_trained=bool(flags & 1),
    )
