"""Gradient-boosted regression trees on logistic loss, built from scratch.

Each boosting round fits a depth-limited regression tree to the negative
gradient of the logistic loss and takes a shrunken Newton step per leaf.
Split finding is exact greedy: every boundary between adjacent distinct
sorted feature values is scored by the variance reduction of the gradient
residuals; on equal gain the lower threshold (and lower feature index) wins.
The split predicate is ``x <= threshold`` with the threshold equal to the
lower adjacent value, so thresholds are exact float comparisons.

Training is deterministic given the data, hyperparameters and seed; the
random state is consumed only when ``subsample < 1``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import as_float_matrix, as_label_vector, check_same_length

__all__ = [
    "sigmoid",
    "logistic_loss",
    "logistic_gradient",
    "Tree",
    "GradientBoostedBinaryClassifier",
    "OneVsRestBoostedForest",
]

_MIN_GAIN = 1e-12
_HESSIAN_EPS = 1e-12
_BIAS_CLIP = 1e-7


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(score, label):
    """Binomial deviance of a raw score against a {0,1} label.

    loss = -label*score + log(1 + exp(score)), computed stably.
    """
    score = np.asarray(score, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    # log(1 + e^s) = max(s, 0) + log(1 + e^-|s|)
    softplus = np.maximum(score, 0.0) + np.log1p(np.exp(-np.abs(score)))
    return -label * score + softplus


def logistic_gradient(score, label):
    """d(loss)/d(score) = sigmoid(score) - label."""
    return sigmoid(score) - np.asarray(label, dtype=np.float64)


@dataclass
class Tree:
    """Flat-array regression tree. feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf payload (already includes shrinkage)
    gain: np.ndarray   # split gain, 0 at leaves

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            x = X[rows, np.maximum(feat, 0)]
            go_left = x <= self.threshold[node]
            child = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, child, node)
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
            "gain": [float(v) for v in self.gain],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Tree":
        return cls(
            feature=np.asarray(obj["feature"], dtype=np.int32),
            threshold=np.asarray(obj["threshold"], dtype=np.float64),
            left=np.asarray(obj["left"], dtype=np.int32),
            right=np.asarray(obj["right"], dtype=np.int32),
            value=np.asarray(obj["value"], dtype=np.float64),
            gain=np.asarray(obj["gain"], dtype=np.float64),
        )


@dataclass
class _NodeData:
    """Per-node training state, everything already in per-feature sort order.

    ``idx``/``values``/``grads`` are (A, m) matrices over the node's m
    samples; row a holds sample indices / feature values / gradient targets
    ordered by feature ``feat_ids[a]``. Only features still varying inside
    the node are kept: constant ones can never split below this point.
    Children are produced by a stable partition of each row, so nothing is
    ever re-sorted or re-gathered after the root.
    """

    samples: np.ndarray   # (m,) sample ids, used for leaf sums
    feat_ids: np.ndarray  # (A,) original feature numbers of the rows
    idx: np.ndarray       # (A, m) int32
    values: np.ndarray    # (A, m) float64
    grads: np.ndarray     # (A, m) float64

    @property
    def size(self) -> int:
        return len(self.samples)

    def prune_constant(self) -> "_NodeData":
        if self.idx.shape[1] == 0 or len(self.feat_ids) == 0:
            return self
        keep = self.values[:, 0] != self.values[:, -1]
        if keep.all():
            return self
        return _NodeData(self.samples, self.feat_ids[keep], self.idx[keep],
                         self.values[keep], self.grads[keep])


class _TreeGrower:
    def __init__(self, grad, hess, max_depth, min_leaf, learning_rate):
        self.grad = grad
        self.hess = hess
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.learning_rate = learning_rate
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self._membership = np.zeros(len(grad), dtype=bool)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def _best_split(self, node: _NodeData):
        m = node.size
        cum = np.cumsum(node.grads, axis=1)
        total = cum[:, -1:]
        left_sum = cum[:, :-1]
        left_cnt = np.arange(1, m, dtype=np.float64)
        right_cnt = m - left_cnt
        count_ok = (left_cnt >= self.min_leaf) & (right_cnt >= self.min_leaf)
        valid = (node.values[:, :-1] != node.values[:, 1:]) & count_ok[None, :]
        # score boundaries by the variance reduction of the gradient
        # residuals; the constant parent term is added back only for the
        # winner, it cannot change the argmax
        partial = left_sum * left_sum
        partial /= left_cnt
        rest = total - left_sum
        rest *= rest
        rest /= right_cnt
        partial += rest
        partial[~valid] = -np.inf
        # first max along each axis: ties go to the lower threshold, then
        # the lower feature row
        pos = np.argmax(partial, axis=1)
        per_feature = partial[np.arange(len(pos)), pos]
        a = int(np.argmax(per_feature))
        i = int(pos[a])
        gain = float(per_feature[a]) - float(total[a, 0]) ** 2 / m
        if not np.isfinite(per_feature[a]) or gain <= _MIN_GAIN:
            return None
        return a, i, gain

    def _leaf_value(self, samples) -> float:
        # shrunken Newton step on the leaf; grad holds the negative gradient
        g = float(self.grad[samples].sum())
        h = float(self.hess[samples].sum())
        return self.learning_rate * g / (h + _HESSIAN_EPS)

    def grow(self, node: _NodeData, depth: int = 0) -> int:
        node_id = self._new_node()
        if depth >= self.max_depth or node.size < 2 * self.min_leaf or not len(node.feat_ids):
            self.value[node_id] = self._leaf_value(node.samples)
            return node_id
        best = self._best_split(node)
        if best is None:
            self.value[node_id] = self._leaf_value(node.samples)
            return node_id
        a, i, gain = best

        membership = self._membership
        left_ids = node.idx[a, : i + 1]
        membership[left_ids] = True
        mask = membership[node.idx]
        rows = len(node.feat_ids)
        # every row holds the same sample set, so the flattened picks
        # reshape back into aligned (A, child size) matrices
        left = _NodeData(
            samples=left_ids,
            feat_ids=node.feat_ids,
            idx=node.idx[mask].reshape(rows, i + 1),
            values=node.values[mask].reshape(rows, i + 1),
            grads=node.grads[mask].reshape(rows, i + 1),
        )
        inv = ~mask
        right = _NodeData(
            samples=node.idx[a, i + 1:],
            feat_ids=node.feat_ids,
            idx=node.idx[inv].reshape(rows, node.size - i - 1),
            values=node.values[inv].reshape(rows, node.size - i - 1),
            grads=node.grads[inv].reshape(rows, node.size - i - 1),
        )
        membership[left_ids] = False

        self.feature[node_id] = int(node.feat_ids[a])
        self.threshold[node_id] = float(node.values[a, i])
        self.gain[node_id] = gain
        self.left[node_id] = self.grow(left.prune_constant(), depth + 1)
        self.right[node_id] = self.grow(right.prune_constant(), depth + 1)
        return node_id

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            gain=np.asarray(self.gain, dtype=np.float64),
        )


def _presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample indices and values per feature in sorted order.

    Returns (feat_ids, idx, values): idx[a] are the sample indices ordered
    by feature feat_ids[a]; values[a] the feature values in that order.
    Features that are constant over the whole set are dropped up front.
    """
    idx = np.argsort(X, axis=0, kind="stable").T.astype(np.int32)
    values = np.take_along_axis(X.T, idx, axis=1)
    feat_ids = np.arange(X.shape[1], dtype=np.int32)
    keep = values[:, 0] != values[:, -1]
    return feat_ids[keep], np.ascontiguousarray(idx[keep]), np.ascontiguousarray(values[keep])


class GradientBoostedBinaryClassifier(BaseEstimator):
    """Boosted regression trees scoring a single binary task.

    ``decision_function`` returns the raw additive score (log-odds scale);
    larger means more likely positive.
    """

    def __init__(self, tree_count=100, max_depth=4, learning_rate=0.1,
                 min_leaf=20, subsample=1.0, rng_seed=0):
        self.tree_count = tree_count
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.subsample = subsample
        self.rng_seed = rng_seed

    def fit(self, X, y, _presorted=None):
        X = as_float_matrix(X)
        y = as_label_vector(y)
        check_same_length(X, y)
        if len(y) == 0:
            raise ValueError("empty training set")
        if not set(np.unique(y)) <= {0, 1}:
            raise ValueError("labels must be 0 or 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")
        y = y.astype(np.float64)

        p = float(np.clip(y.mean(), _BIAS_CLIP, 1.0 - _BIAS_CLIP))
        self.bias_ = float(np.log(p / (1.0 - p)))
        self.trees_ = []
        self.train_losses_ = []
        self.n_features_in_ = X.shape[1]

        if y.min() == y.max():
            # single-label task: the bias already predicts it everywhere
            warnings.warn("training labels are constant; model reduces to its bias",
                          stacklevel=2)
            self.train_losses_.append(float(logistic_loss(self.bias_, y).mean()))
            return self

        feat_ids, idx, values = _presorted if _presorted is not None else _presort(X)
        all_samples = np.arange(len(y), dtype=np.int32)
        rng = np.random.default_rng(self.rng_seed)
        scores = np.full(len(y), self.bias_, dtype=np.float64)
        for _ in range(self.tree_count):
            prob = sigmoid(scores)
            grad = y - prob           # negative gradient of the loss
            hess = prob * (1.0 - prob)
            if self.subsample < 1.0:
                keep = rng.random(len(y)) < self.subsample
                if not keep.any():
                    keep[int(rng.integers(len(y)))] = True
                samples = np.flatnonzero(keep).astype(np.int32)
                mask = keep[idx]
                sub_idx = idx[mask].reshape(len(feat_ids), len(samples))
                sub_values = values[mask].reshape(len(feat_ids), len(samples))
                root = _NodeData(samples=samples, feat_ids=feat_ids,
                                 idx=sub_idx, values=sub_values,
                                 grads=grad[sub_idx]).prune_constant()
            else:
                root = _NodeData(samples=all_samples, feat_ids=feat_ids,
                                 idx=idx, values=values, grads=grad[idx])
            grower = _TreeGrower(grad, hess, self.max_depth,
                                 self.min_leaf, self.learning_rate)
            grower.grow(root)
            tree = grower.build()
            self.trees_.append(tree)
            scores += tree.predict(X)
            self.train_losses_.append(float(logistic_loss(scores, y).mean()))
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        scores = np.full(len(X), self.bias_, dtype=np.float64)
        for tree in self.trees_:
            scores += tree.predict(X)
        return scores

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(np.int64)


class OneVsRestBoostedForest(BaseEstimator, ClassifierMixin):
    """One boosted binary scorer per class; prediction is the argmax score.

    Exact ties go to the earliest class in ``classes`` (the lower stage).
    """

    def __init__(self, tree_count=100, max_depth=4, learning_rate=0.1,
                 min_leaf=20, subsample=1.0, rng_seed=0, classes=(1, 2, 3, 4)):
        self.tree_count = tree_count
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.subsample = subsample
        self.rng_seed = rng_seed
        self.classes = classes

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_label_vector(y)
        check_same_length(X, y)
        self.classes_ = np.asarray(self.classes, dtype=np.int64)
        unknown = set(np.unique(y)) - set(self.classes_.tolist())
        if unknown:
            raise ValueError(f"labels outside configured classes: {sorted(unknown)}")
        if len(np.unique(y)) == 1:
            warnings.warn(f"training set contains a single label ({int(y[0])}); "
                          "the model will predict it everywhere", stacklevel=2)
        presorted = _presort(X)
        self.estimators_ = []
        with warnings.catch_warnings():
            # constant binary tasks are expected when a class is absent
            warnings.simplefilter("ignore")
            for offset, cls in enumerate(self.classes_):
                booster = GradientBoostedBinaryClassifier(
                    tree_count=self.tree_count,
                    max_depth=self.max_depth,
                    learning_rate=self.learning_rate,
                    min_leaf=self.min_leaf,
                    subsample=self.subsample,
                    rng_seed=self.rng_seed + offset,
                )
                booster.fit(X, (y == cls).astype(np.int64), _presorted=presorted)
                self.estimators_.append(booster)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_float_matrix(X)
        return np.column_stack([est.decision_function(X) for est in self.estimators_])

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    @property
    def feature_importances_(self) -> np.ndarray:
        """Total split gain per feature, summed over all trees and classes."""
        gains = np.zeros(self.n_features_in_, dtype=np.float64)
        for est in self.estimators_:
            for tree in est.trees_:
                split = tree.feature >= 0
                np.add.at(gains, tree.feature[split], tree.gain[split])
        return gains
