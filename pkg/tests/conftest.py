import numpy as np
import pytest

from coupledrec import CategoricalTable, CouplingParams, RatingDataset, build_frequency_index


@pytest.fixture
def t1_table():
    """Four objects over two attributes: values [x,x,y,y] and [a,b,a,a]."""
    return CategoricalTable(
        object_ids=("o0", "o1", "o2", "o3"),
        attribute_names=("j", "k"),
        codes=np.array([[0, 0], [0, 1], [1, 0], [1, 0]], dtype=np.int32),
        domains=(("x", "y"), ("a", "b")),
    )


@pytest.fixture
def t1_index(t1_table):
    return build_frequency_index(t1_table)


@pytest.fixture
def t1_params():
    return CouplingParams.uniform(2)


def make_ratings(triples, num_users, num_items, rating_range=(1.0, 5.0)):
    users, items, values = zip(*triples)
    return RatingDataset(
        users=np.array(users, dtype=np.int32),
        items=np.array(items, dtype=np.int32),
        ratings=np.array(values, dtype=np.float64),
        num_users=num_users,
        num_items=num_items,
        rating_range=rating_range,
    )


def random_table(rng, max_objects=30, max_attrs=5, max_domain=10, min_objects=2, min_attrs=1):
    """Random table in loader-canonical form: domains hold exactly the
    observed values, ordered by first appearance."""
    m = int(rng.integers(min_objects, max_objects + 1))
    n = int(rng.integers(min_attrs, max_attrs + 1))
    raw = rng.integers(0, max_domain, size=(m, n))
    codes = np.zeros((m, n), dtype=np.int32)
    domains = []
    for j in range(n):
        mapping = {}
        for o, v in enumerate(raw[:, j]):
            codes[o, j] = mapping.setdefault(int(v), len(mapping))
        domains.append(tuple(f"v{v}" for v in mapping))
    return CategoricalTable(
        object_ids=tuple(f"o{i}" for i in range(m)),
        attribute_names=tuple(f"attr{j}" for j in range(n)),
        codes=codes,
        domains=tuple(domains),
    )


def planted_table(seed, clusters=3, per_cluster=20, attrs=6, noise=0.1, values_per_attr=3):
    """Table with planted cluster structure plus uniform value noise.

    Returns (table, true_labels).  Every domain value is forced to occur
    at least once so the frequency index stays valid.
    """
    rng = np.random.default_rng(seed)
    m = clusters * per_cluster
    labels = np.repeat(np.arange(clusters), per_cluster)
    codes = np.zeros((m, attrs), dtype=np.int32)
    for j in range(attrs):
        col = (labels % values_per_attr).astype(np.int64)
        flip = rng.random(m) < noise
        col = np.where(flip, rng.integers(0, values_per_attr, m), col)
        codes[:, j] = col
        counts = np.bincount(codes[:, j], minlength=values_per_attr)
        row = 0
        for v in np.flatnonzero(counts == 0):
            while counts[codes[row, j]] <= 1:  # keep every present value present
                row += 1
            counts[codes[row, j]] -= 1
            codes[row, j] = v
            counts[v] += 1
            row += 1
    table = CategoricalTable(
        object_ids=tuple(f"o{i}" for i in range(m)),
        attribute_names=tuple(f"attr{j}" for j in range(attrs)),
        codes=codes,
        domains=tuple(
            tuple(f"a{j}v{v}" for v in range(values_per_attr)) for j in range(attrs)
        ),
    )
    return table, labels
