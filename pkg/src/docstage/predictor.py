"""Stage models: layout-aware wrappers around the boosted forests.

A model remembers which columns of the tagged feature layout it consumes, so
the full-feature model and the elapsed-time-only baseline share one pipeline
and one file format (versioned JSON that round-trips bit-exactly).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Optional, Sequence

import numpy as np

from .features import Dataset
from .gbdt import GradientBoostedBinaryClassifier, OneVsRestBoostedForest, Tree
from .validation import as_float_matrix

__all__ = [
    "DEFAULT_HYPERPARAMS",
    "LayoutMismatchError",
    "StageModel",
    "train_model",
    "train_baseline",
    "save_model",
    "load_model",
    "feature_importance",
]

DEFAULT_HYPERPARAMS = {
    "tree_count": 100,
    "max_depth": 4,
    "learning_rate": 0.1,
    "min_leaf": 20,
    "subsample": 1.0,
    "rng_seed": 0,
}

_MODEL_FORMAT_VERSION = 1


class LayoutMismatchError(ValueError):
    """Feature layout of the input does not match the model's."""


@dataclass
class StageModel:
    forest: OneVsRestBoostedForest
    layout_tag: str
    feature_names: tuple[str, ...]  # names of the columns the forest consumes
    columns: tuple[int, ...]        # their indices in the full layout vector

    def check_tag(self, layout_tag: str) -> None:
        if layout_tag != self.layout_tag:
            raise LayoutMismatchError(
                f"model was trained on layout {self.layout_tag}, got {layout_tag}")

    def decision_function(self, X, layout_tag: Optional[str] = None) -> np.ndarray:
        if layout_tag is not None:
            self.check_tag(layout_tag)
        X = as_float_matrix(X)
        return self.forest.decision_function(X[:, self.columns])

    def predict(self, X, layout_tag: Optional[str] = None) -> tuple[np.ndarray, np.ndarray]:
        """(labels, per-class raw scores) for each row."""
        scores = self.decision_function(X, layout_tag)
        labels = self.forest.classes_[np.argmax(scores, axis=1)]
        return labels, scores

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.forest.classes_)


def _fit(train: Dataset, hyperparams: Optional[dict], columns: Sequence[int]) -> StageModel:
    params = dict(DEFAULT_HYPERPARAMS)
    params.update(hyperparams or {})
    unknown = set(params) - set(DEFAULT_HYPERPARAMS)
    if unknown:
        raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
    if len(train) == 0:
        raise ValueError("empty training set")
    classes = tuple(range(1, len(train.boundaries)))
    forest = OneVsRestBoostedForest(classes=classes, **params)
    columns = tuple(int(c) for c in columns)
    forest.fit(train.X[:, columns], train.y)
    return StageModel(
        forest=forest,
        layout_tag=train.layout.tag,
        feature_names=tuple(train.layout.names[c] for c in columns),
        columns=columns,
    )


def train_model(train: Dataset, hyperparams: Optional[dict] = None) -> StageModel:
    """Train the full-feature one-vs-all forest."""
    return _fit(train, hyperparams, range(train.layout.size))


def train_baseline(train: Dataset, hyperparams: Optional[dict] = None) -> StageModel:
    """Train the elapsed-time-only comparison model (same pipeline,
    restricted to the lifetime feature class)."""
    return _fit(train, hyperparams, train.layout.class_indices("lifetime"))


def save_model(model: StageModel, stream: IO[str]) -> None:
    forest = model.forest
    doc = {
        "format_version": _MODEL_FORMAT_VERSION,
        "kind": "ova_boosted_forest",
        "layout_tag": model.layout_tag,
        "feature_names": list(model.feature_names),
        "columns": list(model.columns),
        "classes": [int(c) for c in forest.classes_],
        "hyperparams": {
            "tree_count": forest.tree_count,
            "max_depth": forest.max_depth,
            "learning_rate": forest.learning_rate,
            "min_leaf": forest.min_leaf,
            "subsample": forest.subsample,
            "rng_seed": forest.rng_seed,
        },
        "ensembles": [
            {
                "bias": float(est.bias_),
                "trees": [tree.to_dict() for tree in est.trees_],
            }
            for est in forest.estimators_
        ],
    }
    json.dump(doc, stream, sort_keys=True, separators=(",", ":"))
    stream.write("\n")


def load_model(stream: IO[str]) -> StageModel:
    doc = json.load(stream)
    if doc.get("format_version") != _MODEL_FORMAT_VERSION:
        raise ValueError("unsupported model file version")
    if doc.get("kind") != "ova_boosted_forest":
        raise ValueError(f"unsupported model kind {doc.get('kind')!r}")
    params = doc["hyperparams"]
    classes = tuple(doc["classes"])
    forest = OneVsRestBoostedForest(classes=classes, **params)
    forest.classes_ = np.asarray(classes, dtype=np.int64)
    forest.n_features_in_ = len(doc["columns"])
    forest.estimators_ = []
    for ensemble in doc["ensembles"]:
        booster = GradientBoostedBinaryClassifier(**params)
        booster.bias_ = float(ensemble["bias"])
        booster.trees_ = [Tree.from_dict(t) for t in ensemble["trees"]]
        booster.train_losses_ = []
        booster.n_features_in_ = forest.n_features_in_
        forest.estimators_.append(booster)
    return StageModel(
        forest=forest,
        layout_tag=doc["layout_tag"],
        feature_names=tuple(doc["feature_names"]),
        columns=tuple(doc["columns"]),
    )


def feature_importance(model: StageModel) -> list[tuple[str, float]]:
    """Features ranked by total split gain, descending; zero-gain features
    are omitted (a degenerate model yields an empty ranking)."""
    gains = model.forest.feature_importances_
    ranked = [(model.feature_names[i], float(g)) for i, g in enumerate(gains) if g > 0]
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked
