"""Tests for Hungarian matching, semi-supervised k-means and cluster naming."""

import itertools

import numpy as np
import pytest

from ctxcat.backbone import EmbeddingBatch, Lexicon
from ctxcat.discovery import (
    assign_pseudo_labels,
    hungarian_match,
    load_cluster_model,
    name_clusters,
    save_cluster_model,
    ss_kmeans,
    zero_shot_classify,
)
from ctxcat.exceptions import AssignmentError, DegenerateDataError


def _unit(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _blobs(centers, per_cluster=10, noise=0.05, seed=0):
    rng = np.random.default_rng(seed)
    rows, ids, truth = [], [], []
    for k, center in enumerate(centers):
        for j in range(per_cluster):
            rows.append(np.asarray(center) + noise * rng.normal(size=len(center)))
            ids.append(f"c{k}-{j}")
            truth.append(k)
    return EmbeddingBatch(_unit(rows), tuple(ids)), truth


class TestHungarian:
    def test_worked_example(self):
        match = hungarian_match(np.array([[4, 1, 3], [2, 0, 5], [3, 2, 2]]))

        assert match.mapping == {0: 1, 1: 0, 2: 2}
        assert match.cost == 5

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 8))
            cost = rng.integers(0, 20, size=(n, n)).astype(float)

            best = min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))

            assert hungarian_match(cost).cost == best

    def test_rectangular(self):
        match = hungarian_match(np.array([[5.0, 1.0, 9.0], [1.0, 5.0, 9.0]]))

        assert match.mapping == {0: 1, 1: 0}

    def test_more_rows_than_columns(self):
        with pytest.raises(AssignmentError):
            hungarian_match(np.ones((3, 2)))

    def test_non_finite(self):
        with pytest.raises(AssignmentError):
            hungarian_match(np.array([[np.inf, 1.0], [1.0, 0.0]]))


class TestSsKMeans:
    CENTERS = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]

    def test_recovers_separated_clusters(self):
        emb, truth = _blobs(self.CENTERS)
        pins = {"c0-0": "red", "c0-1": "red", "c1-0": "blue"}

        model = ss_kmeans(emb, pins, 4, seed=0, class_order=["red", "blue"])

        labels = model.labels()
        for k in range(4):
            members = {labels[i] for i, t in enumerate(truth) if t == k}
            assert len(members) == 1
        assert model.assignment["c0-5"] == 0
        assert model.assignment["c1-5"] == 1
        assert model.cluster_classes == {0: "red", 1: "blue"}

    def test_pins_hold_even_when_far(self):
        emb, _ = _blobs(self.CENTERS)
        pins = {"c3-0": "red", "c0-0": "red"}

        model = ss_kmeans(emb, pins, 4, seed=0, class_order=["red"])

        assert model.assignment["c3-0"] == 0
        assert model.pinned == {"c3-0": 0, "c0-0": 0}

    def test_deterministic_for_a_seed(self):
        emb, _ = _blobs(self.CENTERS, noise=0.4)

        first = ss_kmeans(emb, {}, 4, seed=[3, 1])
        second = ss_kmeans(emb, {}, 4, seed=[3, 1])

        assert first.assignment == second.assignment
        assert np.array_equal(first.centroids, second.centroids)

    def test_objective_does_not_increase(self):
        emb, _ = _blobs(self.CENTERS, noise=0.5, seed=2)

        model = ss_kmeans(emb, {"c0-0": "a"}, 4, seed=0, n_init=1, class_order=["a"])

        trace = np.asarray(model.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9)

    def test_no_empty_clusters(self):
        emb, _ = _blobs(self.CENTERS, per_cluster=3, noise=0.3, seed=4)

        model = ss_kmeans(emb, {}, 6, seed=0)

        assert (model.cluster_sizes() > 0).all()

    def test_array_input(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1]])

        model = ss_kmeans(x, {}, 2, seed=0, item_ids=["a", "b", "c", "d"])

        assert model.assignment["a"] == model.assignment["b"] != model.assignment["c"]

    @pytest.mark.parametrize(
        "k, pins, order",
        [
            (50, {}, None),
            (1, {"c0-0": "a", "c1-0": "b"}, ["a", "b"]),
            (4, {"c0-0": "z"}, ["a"]),
        ],
    )
    def test_degenerate_inputs(self, k, pins, order):
        emb, _ = _blobs(self.CENTERS, per_cluster=2)

        with pytest.raises(DegenerateDataError):
            ss_kmeans(emb, pins, k, class_order=order)

    def test_identical_points(self):
        emb = EmbeddingBatch(np.tile([[1.0, 0.0]], (5, 1)), tuple("abcde"))

        with pytest.raises(DegenerateDataError, match="identical"):
            ss_kmeans(emb, {}, 2)

    def test_save_and_load(self, tmp_path):
        emb, _ = _blobs(self.CENTERS)
        model = ss_kmeans(emb, {"c0-0": "red"}, 4, seed=0, class_order=["red"])
        model.names = {0: "red", 1: "blue", 2: "green", 3: "pink"}

        save_cluster_model(model, tmp_path)
        loaded = load_cluster_model(tmp_path)

        assert loaded.assignment == model.assignment
        assert loaded.pinned == model.pinned
        assert loaded.names == model.names
        assert loaded.cluster_classes == {0: "red"}
        assert np.allclose(loaded.centroids, model.centroids, atol=1e-6)


class TestNaming:
    def test_known_clusters_keep_their_class(self):
        emb, _ = _blobs(TestSsKMeans.CENTERS)
        model = ss_kmeans(emb, {"c0-0": "a", "c1-0": "b"}, 4, seed=0, class_order=["a", "b"])
        lexicon = Lexicon(("a", "b", "x", "y"), np.eye(4))

        names = name_clusters(model, lexicon)

        assert names[0] == "a" and names[1] == "b"
        assert {names[2], names[3]} == {"x", "y"}

    def test_unpinned_known_cluster_is_matched(self):
        emb, _ = _blobs(TestSsKMeans.CENTERS)
        model = ss_kmeans(emb, {"c0-0": "a"}, 4, seed=0, class_order=["a", "b"])
        # "b" has no pinned items and points at the third blob
        lexicon = Lexicon(("a", "b", "x", "y"), np.eye(4)[[0, 2, 1, 3]])

        names = name_clusters(model, lexicon)

        assert names[0] == "a"
        assert names[model.assignment["c2-0"]] == "b"
        assert names[model.assignment["c1-0"]] == "x"

    def test_crossing_assignment(self):
        emb, _ = _blobs([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        model = ss_kmeans(emb, {"c0-0": "k"}, 3, seed=0, class_order=["k"])
        novel_b = model.assignment["c1-0"]
        novel_c = model.assignment["c2-0"]
        # "first" points at the third blob, "second" at the second
        lexicon = Lexicon(("k", "first", "second"), np.eye(3)[[0, 2, 1]])

        names = name_clusters(model, lexicon)

        assert names[novel_b] == "second"
        assert names[novel_c] == "first"

    def test_too_few_names(self):
        emb, _ = _blobs(TestSsKMeans.CENTERS)
        model = ss_kmeans(emb, {}, 4, seed=0)

        with pytest.raises(AssignmentError):
            name_clusters(model, Lexicon(("a", "b"), np.eye(2, 4)))

    def test_pseudo_labels_follow_clusters(self):
        emb, truth = _blobs(TestSsKMeans.CENTERS)
        model = ss_kmeans(emb, {"c0-0": "a"}, 4, seed=0, class_order=["a"])
        lexicon = Lexicon(("a", "b", "c", "d"), np.eye(4))

        labels = assign_pseudo_labels(model, lexicon)

        assert labels["c0-3"] == "a"
        assert labels["c2-1"] == "c"
        assert len(set(labels.values())) == 4


class TestZeroShot:
    def test_matches_argmax(self):
        emb = EmbeddingBatch(_unit([[1.0, 0.2], [0.1, 1.0], [1.0, 1.0]]), ("p", "q", "r"))
        lexicon = Lexicon(("x", "y"), np.eye(2))

        names = zero_shot_classify(emb, lexicon)

        scores = emb.matrix @ lexicon.matrix.T
        assert names == {item: lexicon.names[int(np.argmax(row))] for item, row in zip(emb.item_ids, scores)}
        assert names["r"] == "x"

    def test_empty_lexicon(self):
        emb = EmbeddingBatch(_unit([[1.0, 0.0]]), ("p",))

        with pytest.raises(AssignmentError):
            zero_shot_classify(emb, Lexicon((), np.zeros((0, 2))))
