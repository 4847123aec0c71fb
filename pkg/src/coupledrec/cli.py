"""Command-line entry point for reproducible batch runs.

Subcommands: ``sim``, ``cluster``, ``predict``, ``train-mf``, ``eval``,
``bench``.  Every command writes exactly one declared output file; all
randomness flows through ``--seed``, so identical flags reproduce
identical outputs (timing columns aside).

Exit codes: 0 success, 2 validation error (bad flags, malformed or
inconsistent inputs), 1 runtime error.

A plain-text config file of ``key = value`` lines (keys are flag names,
dashes or underscores) may supply defaults via ``--config``; explicit
flags win.
"""

from __future__ import annotations

import csv
import functools

import click
import numpy as np

from . import evaluate, mf
from .ckmodes import ck_modes, plain_k_modes, save_assignments, save_modes
from .coupling import coupling_matrix
from .data import DataError, load_attribute_table, load_graph, load_ratings

_COMMANDS = ("sim", "cluster", "predict", "train-mf", "eval", "bench")


def _parse_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Plain-text 'key = value' file supplying flag defaults.",
)
@click.pass_context
def main(ctx, config):
    """Coupling-aware similarity, clustering and recommendation runs."""
    if config:
        defaults = _parse_config(config)
        ctx.default_map = {name: dict(defaults) for name in _COMMANDS}


def _data_errors(fn):
    """Map input rejections to exit code 2."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as exc:
            raise click.UsageError(str(exc)) from exc

    return wrapper


_in_path = click.Path(exists=True, dir_okay=False)


def _ratings_options(fn):
    for opt in reversed(
        [
            click.option("--ratings", type=_in_path, required=True, help="ratings CSV"),
            click.option("--r-min", type=float, default=1.0, show_default=True),
            click.option("--r-max", type=float, default=5.0, show_default=True),
        ]
    ):
        fn = opt(fn)
    return fn


def _mf_options(fn):
    for opt in reversed(
        [
            click.option("--rank", type=int, default=8, show_default=True),
            click.option("--reg", type=float, default=0.02, show_default=True, help="L2 strength"),
            click.option("--lr", type=float, default=0.01, show_default=True),
            click.option("--epochs", type=int, default=20, show_default=True),
            click.option("--init-scale", type=float, default=0.1, show_default=True),
            click.option("--shuffle/--no-shuffle", default=True, show_default=True),
            click.option("--train-offset", is_flag=True, default=False),
        ]
    ):
        fn = opt(fn)
    return fn


def _graph_options(fn):
    for opt in reversed(
        [
            click.option("--social", type=_in_path, default=None, help="user-user edges CSV"),
            click.option("--item-links", type=_in_path, default=None, help="item-item edges CSV"),
            click.option(
                "--normalize-graphs/--no-normalize-graphs", default=True, show_default=True
            ),
        ]
    ):
        fn = opt(fn)
    return fn


def _train_config(rank, reg, lr, epochs, init_scale, seed, shuffle, train_offset):
    try:
        return mf.TrainConfig(
            rank=rank,
            regularization=reg,
            learning_rate=lr,
            epochs=epochs,
            init_scale=init_scale,
            seed=seed,
            shuffle=shuffle,
            train_offset=train_offset,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _load_graphs(ratings, social, item_links, normalize):
    user_graph = item_graph = None
    if social:
        user_index = {uid: u for u, uid in enumerate(ratings.user_ids)}
        user_graph = load_graph(social, user_index, normalize=normalize)
    if item_links:
        item_index = {iid: i for i, iid in enumerate(ratings.item_ids)}
        item_graph = load_graph(item_links, item_index, normalize=normalize)
    if user_graph is None and item_graph is None:
        return None
    return (user_graph, item_graph)


def _cluster_items(item_attrs, ratings, k, seed, max_iter):
    table = load_attribute_table(item_attrs)
    if table.num_objects != ratings.num_items:
        raise click.UsageError(
            f"{item_attrs}: {table.num_objects} objects for {ratings.num_items} rated items"
        )
    clusters = ck_modes(table, k, seed, max_iter)
    return table, clusters, coupling_matrix(table)


@main.command()
@click.option("--attrs", type=_in_path, required=True, help="attribute table CSV")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_data_errors
def sim(attrs, threads, output):
    """All-pairs coupled object similarity of an attribute table."""
    table = load_attribute_table(attrs)
    coupling_matrix(table, threads=threads).save_csv(output)
    click.echo(f"wrote {output}")


@main.command()
@click.option("--attrs", type=_in_path, required=True, help="attribute table CSV")
@click.option("--k", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@click.option(
    "--method",
    type=click.Choice(["coupled", "plain"]),
    default="coupled",
    show_default=True,
)
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="assignments CSV")
@click.option("--modes-output", type=click.Path(dir_okay=False), default=None)
@_data_errors
def cluster(attrs, k, seed, max_iter, method, output, modes_output):
    """Cluster the objects of an attribute table."""
    table = load_attribute_table(attrs)
    if k > table.num_objects:
        raise click.UsageError(f"k={k} exceeds the {table.num_objects} objects")
    if method == "coupled":
        model = ck_modes(table, k, seed, max_iter)
    else:
        model = plain_k_modes(table, k, seed, max_iter)
    save_assignments(model, table, output)
    if modes_output:
        save_modes(model, table, modes_output)
    click.echo(f"objective {model.objective:.6f} after {model.iterations} iteration(s)")


@main.command()
@_ratings_options
@click.option("--pairs", type=_in_path, required=True, help="user_id,item_id CSV")
@click.option("--algo", type=click.Choice(evaluate.ALGORITHMS), required=True)
@click.option("--cap", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--item-attrs", type=_in_path, default=None, help="for ck-cf")
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True, help="for ck-cf")
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model", type=_in_path, default=None, help="trained factor model (basemf/cmf)")
@_graph_options
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_data_errors
def predict(
    ratings,
    r_min,
    r_max,
    pairs,
    algo,
    cap,
    item_attrs,
    k,
    max_iter,
    seed,
    model,
    social,
    item_links,
    normalize_graphs,
    output,
):
    """Batch rating prediction for (user, item) pairs."""
    dataset = load_ratings(ratings, r_min, r_max)
    rows = _read_pairs(pairs, dataset)

    if algo in ("basemf", "cmf"):
        if model is None:
            raise click.UsageError(f"{algo} prediction needs --model")
        factor_model = mf.load_model(model)
        if (
            factor_model.num_users != dataset.num_users
            or factor_model.num_items != dataset.num_items
        ):
            raise click.UsageError("model dimensions do not match the ratings file")
        graphs = _load_graphs(dataset, social, item_links, normalize_graphs)
        if algo == "basemf":
            graphs = None
        users = np.array([u for u, _ in rows], dtype=np.int64)
        items = np.array([i for _, i in rows], dtype=np.int64)
        preds = mf.mf_predict_batch(
            factor_model, graphs, users, items, rating_range=dataset.rating_range
        )
        predict_fn = None
    else:
        clusters = sim_matrix = None
        if algo == "ck-cf":
            if item_attrs is None:
                raise click.UsageError("ck-cf prediction needs --item-attrs")
            _, clusters, sim_matrix = _cluster_items(item_attrs, dataset, k, seed, max_iter)
        predict_fn = evaluate.make_predictor(
            algo, dataset, cap=cap, clusters=clusters, sim=sim_matrix
        )
        preds = [predict_fn(u, i) for u, i in rows]

    with open(output, "w", newline="", encoding="utf-8") as fh:
        fh.write("user_id,item_id,prediction\n")
        for (u, i), p in zip(rows, preds):
            fh.write(f"{dataset.user_ids[u]},{dataset.item_ids[i]},{p:.6f}\n")
    click.echo(f"wrote {len(rows)} predictions to {output}")


def _read_pairs(path, dataset):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["user_id", "item_id"]:
        raise DataError(f"{path}: expected header 'user_id,item_id'")
    user_index = {uid: u for u, uid in enumerate(dataset.user_ids)}
    item_index = {iid: i for i, iid in enumerate(dataset.item_ids)}
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{path}: ragged row at line {lineno}")
        uid, iid = row
        if uid not in user_index:
            raise DataError(f"{path}: unknown user id {uid!r} at line {lineno}")
        if iid not in item_index:
            raise DataError(f"{path}: unknown item id {iid!r} at line {lineno}")
        pairs.append((user_index[uid], item_index[iid]))
    return pairs


@main.command("train-mf")
@_ratings_options
@_mf_options
@_graph_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="model file")
@_data_errors
def train_mf(
    ratings,
    r_min,
    r_max,
    rank,
    reg,
    lr,
    epochs,
    init_scale,
    shuffle,
    train_offset,
    social,
    item_links,
    normalize_graphs,
    seed,
    output,
):
    """Train a (graph-coupled) factor model and save it."""
    dataset = load_ratings(ratings, r_min, r_max)
    graphs = _load_graphs(dataset, social, item_links, normalize_graphs)
    config = _train_config(rank, reg, lr, epochs, init_scale, seed, shuffle, train_offset)
    if config.rank > min(dataset.num_users, dataset.num_items):
        raise click.UsageError("rank exceeds min(num_users, num_items)")
    model = mf.train(dataset, graphs, config)
    mf.save_model(model, output)
    click.echo(f"final training loss {model.loss_history[-1]:.6f}; wrote {output}")


@main.command("eval")
@_ratings_options
@click.option("--algo", type=click.Choice(evaluate.ALGORITHMS), required=True)
@click.option("--folds", type=click.IntRange(min=2), default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cap", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--item-attrs", type=_in_path, default=None, help="for ck-cf")
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True, help="for ck-cf")
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@_mf_options
@_graph_options
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_data_errors
def eval_cmd(
    ratings,
    r_min,
    r_max,
    algo,
    folds,
    seed,
    cap,
    item_attrs,
    k,
    max_iter,
    rank,
    reg,
    lr,
    epochs,
    init_scale,
    shuffle,
    train_offset,
    social,
    item_links,
    normalize_graphs,
    output,
):
    """Cross-validated RMSE/MAE for one algorithm."""
    dataset = load_ratings(ratings, r_min, r_max)
    if len(dataset) < folds:
        raise click.UsageError(f"{len(dataset)} ratings cannot fill {folds} folds")
    item_table = None
    if algo == "ck-cf":
        if item_attrs is None:
            raise click.UsageError("ck-cf evaluation needs --item-attrs")
        item_table = load_attribute_table(item_attrs)
    graphs = _load_graphs(dataset, social, item_links, normalize_graphs)
    config = _train_config(rank, reg, lr, epochs, init_scale, seed, shuffle, train_offset)
    try:
        report = evaluate.cross_validate(
            dataset,
            algo,
            folds,
            seed,
            cap=cap,
            item_table=item_table,
            num_clusters=k,
            graphs=graphs,
            train_config=config,
            max_iter=max_iter,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    report.save_csv(output)
    click.echo(
        f"{algo}: rmse {report.aggregate.rmse:.6f}, mae {report.aggregate.mae:.6f} "
        f"over {report.aggregate.n_test} held-out ratings"
    )


@main.command()
@_ratings_options
@click.option(
    "--algos",
    default="ck-cf,icf,ucf,slope1",
    show_default=True,
    help="comma-separated algorithm labels",
)
@click.option(
    "--k-values", default="10", show_default=True, help="comma-separated cluster counts"
)
@click.option("--requests", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--warmup", type=click.IntRange(min=0), default=5, show_default=True)
@click.option("--top-count", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--cap", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--item-attrs", type=_in_path, default=None, help="for ck-cf")
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@_mf_options
@_graph_options
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_data_errors
def bench(
    ratings,
    r_min,
    r_max,
    algos,
    k_values,
    requests,
    warmup,
    top_count,
    cap,
    seed,
    item_attrs,
    max_iter,
    rank,
    reg,
    lr,
    epochs,
    init_scale,
    shuffle,
    train_offset,
    social,
    item_links,
    normalize_graphs,
    output,
):
    """Top-N throughput, one row per algorithm/cluster-count pair."""
    dataset = load_ratings(ratings, r_min, r_max)
    labels = [a.strip() for a in algos.split(",") if a.strip()]
    for label in labels:
        if label not in evaluate.ALGORITHMS:
            raise click.UsageError(
                f"unknown algorithm {label!r}; expected one of {evaluate.ALGORITHMS}"
            )
    try:
        ks = [int(v) for v in k_values.split(",") if v.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad --k-values: {exc}") from exc
    if not ks or min(ks) < 1:
        raise click.UsageError("--k-values must list positive integers")
    graphs = _load_graphs(dataset, social, item_links, normalize_graphs)
    config = _train_config(rank, reg, lr, epochs, init_scale, seed, shuffle, train_offset)

    results = []
    for k in ks:
        clusters = sim_matrix = None
        if "ck-cf" in labels:
            if item_attrs is None:
                raise click.UsageError("ck-cf benchmarking needs --item-attrs")
            _, clusters, sim_matrix = _cluster_items(item_attrs, dataset, k, seed, max_iter)
        for label in labels:
            results.append(
                evaluate.throughput_bench(
                    dataset,
                    label,
                    requests=requests,
                    warmup=warmup,
                    top_count=top_count,
                    cap=cap,
                    seed=seed,
                    clusters=clusters,
                    sim=sim_matrix,
                    graphs=graphs,
                    train_config=config,
                    k_label=k,
                )
            )
    evaluate.save_bench_csv(results, output)
    click.echo(f"wrote {len(results)} benchmark rows to {output}")


if __name__ == "__main__":
    main()
