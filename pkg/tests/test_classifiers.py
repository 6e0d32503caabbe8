from __future__ import annotations

import math

import numpy as np
import pytest

from dropsplit.classifiers import (
    ClassifierSpec,
    accuracy,
    confusion,
    fit,
    predict,
    predict_proba,
)
from dropsplit.splits import LabeledDataset

ALL_KINDS = ["decision_tree", "extra_trees", "knn", "gaussian_nb"]


def dataset(X, y):
    return LabeledDataset.from_arrays(np.asarray(X, dtype=float), np.asarray(y, dtype=int))


def blobs(n=200, separation=4.0, seed=0, std=1.0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X0 = rng.normal(loc=(0.0, 0.0), scale=std, size=(half, 2))
    X1 = rng.normal(loc=(separation, separation), scale=std, size=(n - half, 2))
    X = np.vstack([X0, X1])
    y = np.array([0] * half + [1] * (n - half))
    order = rng.permutation(n)
    return X[order], y[order]


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown classifier kind"):
            ClassifierSpec(kind="svm")

    def test_bad_hyperparameters(self):
        with pytest.raises(ValueError):
            ClassifierSpec(kind="knn", k=0)
        with pytest.raises(ValueError):
            ClassifierSpec(kind="extra_trees", n_trees=0)
        with pytest.raises(ValueError):
            ClassifierSpec(kind="gaussian_nb", variance_floor=0.0)
        with pytest.raises(ValueError):
            ClassifierSpec(kind="decision_tree", max_depth=0)

    def test_label_defaults_to_kind(self):
        assert ClassifierSpec(kind="knn").label == "knn"
        assert ClassifierSpec(kind="knn", label="knn5").label == "knn5"


class TestDecisionTree:
    def test_solves_xor_at_depth_two(self):
        X = [[0, 0], [0, 1], [1, 0], [1, 1]]
        y = [0, 1, 1, 0]
        model = fit(ClassifierSpec(kind="decision_tree", max_depth=2), dataset(X, y))
        assert list(predict(model, np.asarray(X, float))) == y

    def test_memorizes_unique_rows(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 4))
        y = rng.integers(0, 2, size=60)
        model = fit(ClassifierSpec(kind="decision_tree"), dataset(X, y))
        assert np.array_equal(predict(model, X), y)

    def test_depth_limit_is_respected(self):
        X = [[0, 0], [0, 1], [1, 0], [1, 1]]
        y = [0, 1, 1, 0]
        model = fit(ClassifierSpec(kind="decision_tree", max_depth=1), dataset(X, y))
        # One split cannot separate XOR; at least one point must be wrong.
        assert (predict(model, np.asarray(X, float)) != np.array(y)).sum() > 0


class TestKNN:
    def test_k1_returns_matching_train_label(self):
        X = [[0.0, 0.0], [10.0, 10.0], [20.0, 0.0]]
        y = [1, 0, 1]
        model = fit(ClassifierSpec(kind="knn", k=1), dataset(X, y))
        assert list(predict(model, np.asarray(X, float))) == y

    def test_vote_tie_resolves_to_dropout(self):
        X = [[0.0], [2.0]]
        y = [0, 1]
        model = fit(ClassifierSpec(kind="knn", k=2), dataset(X, y))
        assert predict(model, np.array([[1.0]]))[0] == 0

    def test_k_larger_than_train_is_clamped(self):
        X = [[0.0], [1.0], [2.0]]
        y = [1, 1, 0]
        model = fit(ClassifierSpec(kind="knn", k=50), dataset(X, y))
        assert list(predict(model, np.array([[0.5]]))) == [1]


class TestGaussianNB:
    def test_hand_computed_posterior_1d(self):
        # Four 1-D points, two per class. The oracle below redoes the whole
        # chain by hand: standardization, per-class moments with the variance
        # floor, Gaussian log densities, and posterior normalization.
        X = np.array([[1.0], [2.0], [6.0], [7.0]])
        y = np.array([0, 0, 1, 1])
        floor = 1e-9
        spec = ClassifierSpec(kind="gaussian_nb", variance_floor=floor)
        model = fit(spec, dataset(X, y))

        mu = X.mean()
        sd = X.std()
        z = (X[:, 0] - mu) / sd
        mean0, var0 = z[:2].mean(), max(z[:2].var(), floor)
        mean1, var1 = z[2:].mean(), max(z[2:].var(), floor)

        def posterior1(zq: float) -> float:
            def log_norm(v, mean, var):
                return -0.5 * (math.log(2 * math.pi * var) + (v - mean) ** 2 / var)

            l0 = math.log(0.5) + log_norm(zq, mean0, var0)
            l1 = math.log(0.5) + log_norm(zq, mean1, var1)
            m = max(l0, l1)
            e0, e1 = math.exp(l0 - m), math.exp(l1 - m)
            return e1 / (e0 + e1)

        queries = np.array([[1.5], [3.9], [4.1], [6.5]])
        got = predict_proba(model, queries)
        for q, p in zip(queries[:, 0], got):
            expected = posterior1((q - mu) / sd)
            assert p == pytest.approx(expected, abs=1e-9)
        assert list(predict(model, queries)) == [0, 0, 1, 1]

    def test_zero_variance_feature_survives(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [6.0, 5.0], [7.0, 5.0]])
        y = np.array([0, 0, 1, 1])
        model = fit(ClassifierSpec(kind="gaussian_nb"), dataset(X, y))
        out = predict(model, X)
        assert np.array_equal(out, y)


class TestDegenerateAndErrors:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_single_label_training_predicts_that_label(self, kind):
        X = np.array([[0.0, 1.0], [1.0, 2.0], [2.0, 0.5]])
        y = np.array([1, 1, 1])
        model = fit(ClassifierSpec(kind=kind), dataset(X, y))
        queries = np.array([[5.0, 5.0], [-3.0, 0.0]])
        assert list(predict(model, queries)) == [1, 1]

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_column_mismatch_is_shape_error(self, kind):
        X, y = blobs(40)
        model = fit(ClassifierSpec(kind=kind), dataset(X, y))
        with pytest.raises(ValueError, match="columns"):
            predict(model, np.zeros((3, 5)))

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            fit(ClassifierSpec(kind="knn"), dataset(np.zeros((0, 2)), np.zeros(0)))


class TestSeparableBlobs:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_well_separated_blobs(self, kind):
        X, y = blobs(200, separation=4.0, seed=1)
        model = fit(ClassifierSpec(kind=kind, seed=7), dataset(X, y))
        assert accuracy(y, predict(model, X)) >= 0.95


class TestDeterminismAndLeakage:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_refit_is_bit_identical(self, kind):
        X, y = blobs(120, seed=5)
        Xq, _ = blobs(40, seed=6)
        spec = ClassifierSpec(kind=kind, seed=11)
        p1 = predict_proba(fit(spec, dataset(X, y)), Xq)
        p2 = predict_proba(fit(spec, dataset(X, y)), Xq)
        assert np.array_equal(p1, p2)

    def test_standardization_comes_from_train_only(self):
        X, y = blobs(100, seed=2)
        model = fit(ClassifierSpec(kind="knn"), dataset(X, y))
        means_before = model.feature_means.copy()
        stds_before = model.feature_stds.copy()
        outliers = np.full((10, 2), 1e9)
        predict(model, outliers)
        assert np.array_equal(model.feature_means, means_before)
        assert np.array_equal(model.feature_stds, stds_before)
        expected_means = X.mean(axis=0)
        assert np.allclose(means_before, expected_means)

    def test_extra_trees_more_trees_not_worse(self):
        # Statistical check: averaged over seeds, a bigger forest should test
        # at least as well (within two points) as a single tree.
        deltas = []
        for seed in range(8):
            X, y = blobs(240, separation=2.0, std=1.6, seed=seed)
            Xq, yq = blobs(240, separation=2.0, std=1.6, seed=seed + 100)
            small = fit(ClassifierSpec(kind="extra_trees", n_trees=1, seed=seed), dataset(X, y))
            big = fit(ClassifierSpec(kind="extra_trees", n_trees=25, seed=seed), dataset(X, y))
            deltas.append(
                accuracy(yq, predict(big, Xq)) - accuracy(yq, predict(small, Xq))
            )
        assert sum(deltas) / len(deltas) >= -0.02


class TestMetrics:
    def test_perfect_and_inverted(self):
        y = np.array([0, 1, 1, 0, 1])
        assert accuracy(y, y) == 1.0
        assert accuracy(y, 1 - y) == 0.0
        assert np.array_equal(confusion(y, y), np.array([[2, 0], [0, 3]]))

    def test_hand_counted_case(self):
        y_true = [0, 0, 1, 1]
        y_pred = [0, 1, 1, 1]
        assert accuracy(y_true, y_pred) == 0.75
        assert np.array_equal(confusion(y_true, y_pred), np.array([[1, 1], [0, 2]]))

    def test_trace_counts_everything(self):
        rng = np.random.default_rng(9)
        y_true = rng.integers(0, 2, 50)
        y_pred = rng.integers(0, 2, 50)
        assert confusion(y_true, y_pred).sum() == 50

    def test_errors(self):
        with pytest.raises(ValueError, match="mismatch"):
            accuracy([0, 1], [0])
        with pytest.raises(ValueError, match="empty"):
            accuracy([], [])
        with pytest.raises(ValueError, match="empty"):
            confusion([], [])
