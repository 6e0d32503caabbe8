"""Four deterministic binary classifiers behind one train/predict surface.

Decision tree and extra trees are grown from scratch (Gini impurity), KNN
votes over euclidean distance on standardized features, and Gaussian naive
Bayes uses per-class floored variances. Feature standardization is fitted on
training rows only and frozen into the model; prediction can never touch it.

All fits are deterministic functions of (spec, training rows): tree tie-breaks
are first-best by (feature index, threshold), forest randomness comes from a
per-tree seed derived from the spec seed, and KNN breaks distance ties by
training-row index. Vote ties resolve to label 0, the intervention-safe
default for dropout screening (configurable ties are a non-goal here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import Xoshiro256StarStar, derive_seed
from .splits import LabeledDataset

KINDS = ("decision_tree", "extra_trees", "knn", "gaussian_nb")


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind plus the hyperparameters that kind understands."""

    kind: str
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    n_trees: int = 50
    feature_subsample: int | str | None = "sqrt"
    seed: int = 0
    k: int = 5
    variance_floor: float = 1e-9
    label: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}, expected one of {KINDS}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.kind == "extra_trees":
            if self.n_trees < 1:
                raise ValueError("n_trees must be >= 1")
            if isinstance(self.feature_subsample, int) and self.feature_subsample < 1:
                raise ValueError("feature_subsample must be >= 1")
            if isinstance(self.feature_subsample, str) and self.feature_subsample not in ("sqrt", "log2"):
                raise ValueError("feature_subsample must be 'sqrt', 'log2', an int, or None")
        if self.kind == "knn" and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "gaussian_nb" and self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")
        if not self.label:
            object.__setattr__(self, "label", self.kind)


@dataclass
class TrainedModel:
    spec: ClassifierSpec
    n_features: int
    feature_means: np.ndarray
    feature_stds: np.ndarray
    state: object


# --- decision trees -------------------------------------------------------

_LEAF = -1


@dataclass
class _Node:
    feature: int = _LEAF
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    prob1: float = 0.0


def _gini_cost(n_left, n1_left, n_right, n1_right):
    """Size-weighted Gini impurity of a candidate partition (vectorized)."""
    n = n_left + n_right
    p1l = n1_left / n_left
    p1r = n1_right / n_right
    gini_l = 1.0 - p1l * p1l - (1.0 - p1l) * (1.0 - p1l)
    gini_r = 1.0 - p1r * p1r - (1.0 - p1r) * (1.0 - p1r)
    return (n_left * gini_l + n_right * gini_r) / n


def _best_exact_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray):
    """Best (feature, midpoint threshold) over all distinct-value boundaries.

    Ties keep the lowest feature index, then the lowest threshold.
    """
    n = idx.size
    best_cost = math.inf
    best = None
    for f in range(X.shape[1]):
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        ys = y[idx][order]
        boundary = np.nonzero(xs_s[1:] != xs_s[:-1])[0] + 1
        if boundary.size == 0:
            continue
        ones = np.cumsum(ys)
        n_left = boundary.astype(np.float64)
        n1_left = ones[boundary - 1].astype(np.float64)
        cost = _gini_cost(n_left, n1_left, n - n_left, ones[-1] - n1_left)
        j = int(np.argmin(cost))
        if cost[j] < best_cost:
            best_cost = float(cost[j])
            b = boundary[j]
            best = (f, float((xs_s[b - 1] + xs_s[b]) / 2.0))
    return best


def _grow_tree(X, y, max_depth, min_samples_split, choose_split) -> list[_Node]:
    """Iterative tree growth; rows with value <= threshold go left."""
    nodes = [_Node()]
    stack = [(0, np.arange(len(y)), 0)]
    while stack:
        nid, idx, depth = stack.pop()
        node = nodes[nid]
        ys = y[idx]
        ones = int(ys.sum())
        node.prob1 = ones / idx.size
        if ones == 0 or ones == idx.size:
            continue
        if idx.size < min_samples_split or (max_depth is not None and depth >= max_depth):
            continue
        split = choose_split(X, y, idx)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        left_idx, right_idx = idx[mask], idx[~mask]
        if left_idx.size == 0 or right_idx.size == 0:
            continue
        node.feature, node.threshold = f, thr
        node.left, node.right = len(nodes), len(nodes) + 1
        nodes.append(_Node())
        nodes.append(_Node())
        stack.append((node.left, left_idx, depth + 1))
        stack.append((node.right, right_idx, depth + 1))
    return nodes


def _tree_prob1(nodes: list[_Node], X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.float64)
    stack = [(0, np.arange(len(X)))]
    while stack:
        nid, rows = stack.pop()
        if rows.size == 0:
            continue
        node = nodes[nid]
        if node.feature == _LEAF:
            out[rows] = node.prob1
            continue
        mask = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


def _subsample_count(feature_subsample, m: int) -> int:
    if feature_subsample is None:
        return m
    if feature_subsample == "sqrt":
        return max(1, int(math.sqrt(m)))
    if feature_subsample == "log2":
        return max(1, int(math.log2(m))) if m > 1 else 1
    return min(m, int(feature_subsample))


def _random_split_chooser(gen: Xoshiro256StarStar, k_features: int):
    """Extra-trees node splitter: one uniform threshold per sampled feature."""

    def choose(X, y, idx):
        sub = X[idx]
        mins = sub.min(axis=0)
        maxs = sub.max(axis=0)
        candidates = [f for f in range(X.shape[1]) if mins[f] < maxs[f]]
        if not candidates:
            return None
        k = min(k_features, len(candidates))
        chosen = [candidates[p] for p in gen.sample_indices(len(candidates), k)]
        ys = y[idx].astype(np.float64)
        n = idx.size
        best_cost = math.inf
        best = None
        for f in chosen:
            thr = mins[f] + gen.random() * (maxs[f] - mins[f])
            mask = sub[:, f] <= thr
            n_left = int(mask.sum())
            if n_left == 0 or n_left == n:
                continue
            n1_left = float(ys[mask].sum())
            cost = _gini_cost(float(n_left), n1_left, float(n - n_left), float(ys.sum()) - n1_left)
            if cost < best_cost:
                best_cost = cost
                best = (f, float(thr))
        return best

    return choose


# --- fitting ---------------------------------------------------------------


def _standardize_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds < 1e-12, 1.0, stds)
    return means, stds


def fit(spec: ClassifierSpec, train: LabeledDataset) -> TrainedModel:
    """Fit a model; deterministic given the spec (including seed) and rows."""
    X = np.asarray(train.X, dtype=np.float64)
    y = np.asarray(train.y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training set must be a nonempty 2-D matrix")
    if len(X) != len(y):
        raise ValueError(f"{len(X)} rows but {len(y)} labels")
    means, stds = _standardize_params(X)
    Z = (X - means) / stds

    if spec.kind == "decision_tree":
        state = _grow_tree(Z, y, spec.max_depth, spec.min_samples_split, _best_exact_split)
    elif spec.kind == "extra_trees":
        k = _subsample_count(spec.feature_subsample, X.shape[1])
        forest = []
        for t in range(spec.n_trees):
            gen = Xoshiro256StarStar(derive_seed(spec.seed, t))
            chooser = _random_split_chooser(gen, k)
            forest.append(_grow_tree(Z, y, spec.max_depth, spec.min_samples_split, chooser))
        state = forest
    elif spec.kind == "knn":
        state = (Z.copy(), y.copy())
    else:  # gaussian_nb
        classes = np.unique(y)
        priors = {}
        params = {}
        for cls in classes:
            rows = Z[y == cls]
            priors[int(cls)] = math.log(len(rows) / len(y))
            var = rows.var(axis=0)
            params[int(cls)] = (rows.mean(axis=0), np.maximum(var, spec.variance_floor))
        state = (priors, params)
    return TrainedModel(
        spec=spec,
        n_features=X.shape[1],
        feature_means=means,
        feature_stds=stds,
        state=state,
    )


def _check_matrix(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected matrix with {model.n_features} columns, got shape {X.shape}"
        )
    return X


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """Class-1 score per row, in [0, 1]."""
    X = _check_matrix(model, X)
    Z = (X - model.feature_means) / model.feature_stds
    spec = model.spec
    if spec.kind == "decision_tree":
        return _tree_prob1(model.state, Z)
    if spec.kind == "extra_trees":
        total = np.zeros(len(Z), dtype=np.float64)
        for nodes in model.state:
            total += _tree_prob1(nodes, Z)
        return total / len(model.state)
    if spec.kind == "knn":
        Ztrain, ytrain = model.state
        k = min(spec.k, len(ytrain))
        ones = np.empty(len(Z), dtype=np.float64)
        chunk = max(1, 2_000_000 // max(1, len(ytrain)))
        for start in range(0, len(Z), chunk):
            block = Z[start : start + chunk]
            d2 = ((block[:, None, :] - Ztrain[None, :, :]) ** 2).sum(axis=2)
            nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
            ones[start : start + len(block)] = ytrain[nn].sum(axis=1) / k
        return ones
    priors, params = model.state
    log_post = np.full((len(Z), 2), -np.inf, dtype=np.float64)
    for cls, (mu, var) in params.items():
        ll = -0.5 * (np.log(2.0 * math.pi * var) + (Z - mu) ** 2 / var).sum(axis=1)
        log_post[:, cls] = priors[cls] + ll
    # Normalize in log space; a class absent from training keeps probability 0.
    mx = log_post.max(axis=1, keepdims=True)
    p = np.exp(log_post - mx)
    p /= p.sum(axis=1, keepdims=True)
    return p[:, 1]


def predict(model: TrainedModel, X) -> np.ndarray:
    """One 0/1 label per row; score ties resolve to 0."""
    scores = predict_proba(model, X)
    return (scores > 0.5).astype(np.int64)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) == 0:
        raise ValueError("accuracy of empty vectors is undefined")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    return float((y_true == y_pred).mean())


def confusion(y_true, y_pred) -> np.ndarray:
    """2x2 counts; rows are true (dropout first), columns are predicted."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) == 0:
        raise ValueError("confusion of empty vectors is undefined")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    out = np.zeros((2, 2), dtype=np.int64)
    for i in (0, 1):
        for j in (0, 1):
            out[i, j] = int(((y_true == i) & (y_pred == j)).sum())
    return out
