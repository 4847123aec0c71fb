import math

import numpy as np
import pytest

from coupledrec import (
    MeanCache,
    PredictionRequest,
    SimilarityMatrix,
    predict_coupled,
    predict_item_based,
    predict_slope_one,
    predict_user_based,
    rating_similarity,
    top_n,
)
from coupledrec.ckmodes import ClusterModel

from conftest import make_ratings


def ones_sim(n):
    return SimilarityMatrix(ids=tuple(str(i) for i in range(n)), values=np.ones((n, n)))


def cluster_model(assignment, k=None):
    assignment = np.asarray(assignment, dtype=np.int32)
    k = k or int(assignment.max()) + 1
    return ClusterModel(
        k=k,
        assignment=assignment,
        modes=np.zeros((k, 1), dtype=np.int32),
        objective=0.0,
        iterations=1,
    )


class TestMeanCache:
    def test_means(self):
        ds = make_ratings([(0, 0, 4.0), (0, 2, 2.0), (1, 0, 3.0)], 3, 3)
        means = MeanCache(ds)
        assert means.user_mean[0] == 3.0
        assert means.item_mean[0] == 3.5
        assert means.global_mean == pytest.approx(3.0)
        assert not means.has_user(2)
        assert not means.has_item(1)

    def test_fallback_chain(self):
        ds = make_ratings([(0, 0, 4.0)], 2, 2)
        means = MeanCache(ds)
        assert means.fallback(0, 1) == 4.0  # user mean
        assert means.fallback(1, 0) == 4.0  # item mean
        assert means.fallback(1, 1) == 4.0  # global mean

    def test_empty_rejected(self):
        ds = make_ratings([(0, 0, 3.0)], 1, 1).subset(np.array([False]))
        with pytest.raises(ValueError):
            MeanCache(ds)


class TestPredictCoupled:
    def fixture(self):
        # user 0: mean 3 (ratings 4 and 2); item 0 mean 3.5 (4 and 3)
        ds = make_ratings([(0, 0, 4.0), (0, 2, 2.0), (1, 0, 3.0)], 2, 3)
        clusters = cluster_model([0, 0, 1])  # item 2 outside item 1's cluster
        return ds, clusters

    def test_single_neighbor_hand_value(self):
        ds, clusters = self.fixture()
        req = PredictionRequest(user=0, item=1)
        got = predict_coupled(ds, clusters, ones_sim(3), req)
        assert got == pytest.approx(3.5, abs=1e-12)

    def test_empty_neighborhood_falls_back_to_user_mean(self):
        ds = make_ratings([(0, 0, 4.0), (0, 2, 2.0), (1, 1, 3.0)], 2, 3)
        clusters = cluster_model([0, 1, 0])
        req = PredictionRequest(user=0, item=1)
        assert predict_coupled(ds, clusters, ones_sim(3), req) == 3.0

    def test_zero_similarity_falls_back(self):
        ds, clusters = self.fixture()
        sim = SimilarityMatrix(ids=("0", "1", "2"), values=np.zeros((3, 3)))
        req = PredictionRequest(user=0, item=1)
        assert predict_coupled(ds, clusters, sim, req) == 3.0

    def test_clamping(self):
        # raw value 5.7 clamps to the range top
        ds = make_ratings([(0, 0, 5.0), (0, 2, 5.0), (1, 0, 3.9), (2, 0, 4.0)], 3, 3)
        clusters = cluster_model([0, 0, 1])
        req = PredictionRequest(user=0, item=1)
        means = MeanCache(ds)
        raw = means.user_mean[0] + (5.0 - means.item_mean[0])
        assert raw == pytest.approx(5.7)
        assert predict_coupled(ds, clusters, ones_sim(3), req) == 5.0

    def test_cold_user_gets_item_mean(self):
        ds = make_ratings([(0, 0, 4.0), (0, 1, 2.0)], 2, 2)
        req = PredictionRequest(user=1, item=0)
        assert predict_coupled(ds, cluster_model([0, 0]), ones_sim(2), req) == 4.0

    def test_cold_user_cold_item_gets_global_mean(self):
        ds = make_ratings([(0, 0, 4.0), (0, 1, 2.0)], 2, 3)
        req = PredictionRequest(user=1, item=2)
        assert predict_coupled(ds, cluster_model([0, 0, 0]), ones_sim(3), req) == 3.0

    def test_global_source_with_uniform_sim_closed_form(self):
        ds = make_ratings(
            [(0, 0, 4.0), (0, 1, 2.0), (0, 2, 5.0), (1, 0, 2.0), (1, 3, 1.0)], 2, 4
        )
        means = MeanCache(ds)
        req = PredictionRequest(user=0, item=3, source="global", cap=100)
        got = predict_coupled(ds, None, ones_sim(4), req)
        devs = [4.0 - means.item_mean[0], 2.0 - means.item_mean[1], 5.0 - means.item_mean[2]]
        want = means.user_mean[0] + np.mean(devs)
        assert got == pytest.approx(want, abs=1e-12)

    def test_single_cluster_with_uniform_sim_matches_closed_form(self):
        # one cluster holding every item behaves like the unscoped variant
        ds = make_ratings(
            [(0, 0, 4.0), (0, 1, 2.0), (0, 2, 5.0), (1, 0, 2.0), (1, 3, 1.0)], 2, 4
        )
        means = MeanCache(ds)
        req = PredictionRequest(user=0, item=3, cap=100)
        got = predict_coupled(ds, cluster_model([0, 0, 0, 0], k=1), ones_sim(4), req)
        devs = [ds.by_user()[0][x] - means.item_mean[x] for x in (0, 1, 2)]
        want = means.user_mean[0] + np.mean(devs)
        assert got == pytest.approx(want, abs=1e-12)

    def test_cap_limits_neighbors(self):
        # similarity picks item 2 (sim 0.9) over item 0 (sim 0.1)
        ds = make_ratings([(0, 0, 5.0), (0, 2, 1.0), (1, 1, 3.0), (1, 0, 3.0), (1, 2, 3.0)], 2, 3)
        values = np.ones((3, 3))
        values[0, 1] = values[1, 0] = 0.1
        values[2, 1] = values[1, 2] = 0.9
        sim = SimilarityMatrix(ids=("0", "1", "2"), values=values)
        means = MeanCache(ds)
        req = PredictionRequest(user=0, item=1, source="global", cap=1)
        got = predict_coupled(ds, None, sim, req)
        want = means.user_mean[0] + (1.0 - means.item_mean[2])
        assert got == pytest.approx(max(want, 1.0), abs=1e-12)

    def test_empty_dataset_rejected(self):
        ds = make_ratings([(0, 0, 3.0)], 1, 1).subset(np.array([False]))
        with pytest.raises(ValueError):
            predict_coupled(ds, cluster_model([0]), ones_sim(1), PredictionRequest(0, 0))

    def test_bad_request_rejected(self):
        with pytest.raises(ValueError):
            PredictionRequest(0, 0, cap=0)
        with pytest.raises(ValueError):
            PredictionRequest(0, 0, source="nope")


class TestRatingSimilarity:
    def make(self):
        # users 0,1 co-rate items 0,1 with proportional deviations; user 2
        # is the prediction target
        return make_ratings(
            [
                (0, 0, 5.0), (0, 1, 5.0), (0, 2, 1.0),
                (1, 0, 1.0), (1, 1, 1.0), (1, 2, 4.0),
                (2, 0, 4.0), (2, 2, 2.0),
            ],
            3,
            3,
        )

    def test_identical_deviations_give_one(self):
        ds = self.make()
        assert rating_similarity(ds, 0, 1) == pytest.approx(1.0, abs=1e-12)

    def test_opposite_deviations_give_minus_one(self):
        ds = make_ratings(
            [
                (0, 0, 5.0), (0, 1, 1.0), (0, 2, 3.0),
                (1, 0, 1.0), (1, 1, 5.0), (1, 2, 3.0),
            ],
            2,
            3,
        )
        assert rating_similarity(ds, 0, 1) == pytest.approx(-1.0, abs=1e-12)

    def test_single_co_rater_gives_zero(self):
        ds = make_ratings([(0, 0, 5.0), (0, 1, 3.0), (1, 0, 2.0)], 2, 2)
        assert rating_similarity(ds, 0, 1) == 0.0

    def test_zero_norm_gives_zero(self):
        ds = make_ratings(
            [(0, 0, 3.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 3.0)], 2, 2
        )
        assert rating_similarity(ds, 0, 1) == 0.0


class TestPredictItemBased:
    def test_single_positive_neighbor_hand_value(self):
        ds = TestRatingSimilarity().make()
        means = MeanCache(ds)
        req = PredictionRequest(user=2, item=1)
        got = predict_item_based(ds, req)
        # only item 0 survives (sim 1); item 2 correlates negatively
        assert rating_similarity(ds, 2, 1) < 0
        want = means.user_mean[2] + (4.0 - means.item_mean[0])
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(3.0 + (4.0 - 10.0 / 3.0), abs=1e-12)

    def test_all_zero_similarities_fall_back(self):
        ds = make_ratings([(0, 0, 4.0), (0, 1, 2.0), (1, 2, 3.0)], 2, 3)
        req = PredictionRequest(user=0, item=2)
        means = MeanCache(ds)
        assert predict_item_based(ds, req) == means.user_mean[0]

    def test_cap_one_uses_top_neighbor(self):
        ds = TestRatingSimilarity().make()
        got_all = predict_item_based(ds, PredictionRequest(user=2, item=1, cap=30))
        got_one = predict_item_based(ds, PredictionRequest(user=2, item=1, cap=1))
        assert got_one == got_all  # only one positive neighbor exists anyway


class TestPredictUserBased:
    def test_single_neighbor_hand_value(self):
        # neighbor 1 correlates perfectly with user 0 and rated the target
        # item at 4 with an overall mean of 3
        ds = make_ratings(
            [
                (0, 0, 2.0), (0, 1, 4.0),
                (1, 0, 2.0), (1, 1, 4.0), (1, 2, 4.0), (1, 3, 2.0),
            ],
            2,
            4,
        )
        got = predict_user_based(ds, PredictionRequest(user=0, item=2))
        assert got == pytest.approx(4.0, abs=1e-12)

    def test_no_rater_falls_back_to_user_mean(self):
        ds = make_ratings([(0, 0, 2.0), (0, 1, 4.0), (1, 0, 3.0)], 2, 3)
        assert predict_user_based(ds, PredictionRequest(user=0, item=2)) == 3.0

    def test_clamps(self):
        ds = make_ratings(
            [
                (0, 0, 4.0), (0, 1, 5.0),
                (1, 0, 4.0), (1, 1, 5.0), (1, 2, 5.0), (1, 3, 1.0),
            ],
            2,
            4,
        )
        got = predict_user_based(ds, PredictionRequest(user=0, item=2))
        assert got <= 5.0


class TestPredictSlopeOne:
    def test_two_user_toy(self):
        ds = make_ratings(
            [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0), (2, 0, 3.0)], 3, 2
        )
        got = predict_slope_one(ds, PredictionRequest(user=2, item=1))
        assert got == pytest.approx(4.0, abs=1e-12)

    def test_no_co_rated_pairs_falls_back(self):
        ds = make_ratings([(0, 0, 2.0), (1, 1, 4.0)], 2, 3)
        assert predict_slope_one(ds, PredictionRequest(user=0, item=1)) == 2.0

    def test_self_pair_excluded(self):
        ds = make_ratings([(0, 0, 2.0), (1, 0, 4.0)], 2, 2)
        # the only candidate pair is (0, 0); it must not contribute
        assert predict_slope_one(ds, PredictionRequest(user=0, item=1)) == 2.0


class TestTopN:
    def predictor(self, ds):
        means = MeanCache(ds)
        return lambda u, y: predict_slope_one(ds, PredictionRequest(u, y), means)

    def test_all_items_rated_gives_empty(self):
        ds = make_ratings([(0, 0, 3.0), (0, 1, 4.0)], 1, 2)
        assert top_n(ds, self.predictor(ds), 0, 5) == []

    def test_n_larger_than_catalog(self):
        ds = make_ratings([(0, 0, 3.0), (1, 1, 4.0), (1, 2, 2.0)], 2, 3)
        got = top_n(ds, self.predictor(ds), 0, 10)
        assert sorted(got) == [1, 2]

    def test_deterministic_and_tie_broken_by_index(self):
        ds = make_ratings([(0, 0, 3.0), (1, 1, 4.0), (1, 2, 4.0)], 2, 3)
        first = top_n(ds, self.predictor(ds), 0, 2)
        second = top_n(ds, self.predictor(ds), 0, 2)
        assert first == second
        # both unrated items predict the same value; lower index wins
        assert first == [1, 2]

    def test_ranked_by_prediction(self):
        ds = make_ratings(
            [(0, 0, 5.0), (1, 0, 5.0), (1, 1, 1.0), (1, 2, 5.0)], 2, 3
        )
        predict = self.predictor(ds)
        got = top_n(ds, predict, 0, 2)
        assert predict(0, got[0]) >= predict(0, got[1])


class TestTotality:
    def test_every_pair_finite_and_in_range(self):
        # includes a cold user (2) and a cold item (3)
        ds = make_ratings(
            [(0, 0, 5.0), (0, 1, 1.0), (1, 0, 2.0), (1, 2, 4.0)], 3, 4
        )
        clusters = cluster_model([0, 0, 1, 1])
        sim = ones_sim(4)
        for u in range(3):
            for y in range(4):
                req = PredictionRequest(u, y)
                for value in (
                    predict_coupled(ds, clusters, sim, req),
                    predict_item_based(ds, req),
                    predict_user_based(ds, req),
                    predict_slope_one(ds, req),
                ):
                    assert math.isfinite(value)
                    assert 1.0 <= value <= 5.0
