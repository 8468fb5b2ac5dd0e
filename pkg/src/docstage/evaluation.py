"""Model evaluation: macro accuracy, PR curves, and the paired
randomization significance test.

Macro-averaged accuracy here is the unweighted mean of per-class recall over
the classes present in the test labels; with balanced labels it coincides
with plain accuracy of a per-class-fair classifier, and a constant predictor
on a balanced 4-class set scores 0.25.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import Dataset, quartile_name
from .predictor import StageModel
from .validation import as_label_vector, check_same_length

__all__ = [
    "macro_accuracy",
    "confusion_matrix",
    "pr_curve",
    "approx_randomization_test",
    "EvalReport",
    "evaluate",
]


def macro_accuracy(y_true, y_pred, classes: Optional[Sequence[int]] = None) -> float:
    """Unweighted mean of per-class recall.

    ``classes`` defaults to the classes present in ``y_true``; classes with
    no true instances are skipped (their recall is undefined).
    """
    y_true = as_label_vector(y_true)
    y_pred = as_label_vector(y_pred)
    check_same_length(y_true, y_pred)
    if classes is None:
        classes = np.unique(y_true).tolist()
    recalls = []
    for cls in classes:
        mask = y_true == cls
        count = int(mask.sum())
        if count == 0:
            continue
        recalls.append(float((y_pred[mask] == cls).sum()) / count)
    if not recalls:
        raise ValueError("no class has any true instances")
    return sum(recalls) / len(recalls)


def confusion_matrix(y_true, y_pred, classes: Sequence[int]) -> np.ndarray:
    """Counts[i, j] = instances of classes[i] predicted as classes[j]."""
    y_true = as_label_vector(y_true)
    y_pred = as_label_vector(y_pred)
    check_same_length(y_true, y_pred)
    index = {cls: i for i, cls in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        matrix[index[int(t)], index[int(p)]] += 1
    return matrix


def pr_curve(scores, positives) -> list[tuple[float, float, float]]:
    """Threshold-swept (threshold, precision, recall) points from raw scores.

    One point per distinct score value, thresholds descending; a row is
    predicted positive when its score >= threshold, so recall reaches 1 at
    the minimal threshold. Returns [] when there are no positive instances.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    check_same_length(scores, positives)
    total_pos = int(positives.sum())
    if total_pos == 0:
        return []
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(positives[order])
    ranks = np.arange(1, len(scores) + 1)
    # last index of each distinct score = the full set predicted positive
    last = np.nonzero(np.append(sorted_scores[:-1] != sorted_scores[1:], True))[0]
    points = []
    for i in last:
        threshold = float(sorted_scores[i])
        precision = float(tp[i]) / float(ranks[i])
        recall = float(tp[i]) / total_pos
        points.append((threshold, precision, recall))
    return points


def _per_class_sums(correct: np.ndarray, class_masks: list[np.ndarray]) -> np.ndarray:
    return np.array([correct[mask].sum() for mask in class_masks], dtype=np.float64)


def approx_randomization_test(
    preds_a,
    preds_b,
    labels,
    iterations: int = 10_000,
    rng_seed: int = 0,
) -> float:
    """Two-sided paired randomization p-value on the macro-accuracy delta.

    Each iteration swaps the two systems' predictions per example with
    probability 0.5 and recomputes |delta|; the p-value is
    (count(|delta'| >= |delta|) + 1) / (iterations + 1), so it is always in
    (0, 1] and identical predictions give exactly 1.0.
    """
    preds_a = as_label_vector(preds_a)
    preds_b = as_label_vector(preds_b)
    labels = as_label_vector(labels)
    check_same_length(preds_a, preds_b, labels)
    if len(labels) == 0:
        raise ValueError("empty prediction vectors")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    classes = np.unique(labels)
    class_masks = [labels == cls for cls in classes]
    counts = np.array([mask.sum() for mask in class_masks], dtype=np.float64)
    correct_a = (preds_a == labels).astype(np.float64)
    correct_b = (preds_b == labels).astype(np.float64)

    base_a = _per_class_sums(correct_a, class_masks)
    base_b = _per_class_sums(correct_b, class_masks)
    # per-class effect of swapping each example, precomputed once
    diffs = [(correct_b - correct_a)[mask] for mask in class_masks]

    def macro_delta(swap_rows: np.ndarray) -> np.ndarray:
        moved = np.stack([swap_rows[:, mask] @ diff
                          for mask, diff in zip(class_masks, diffs)], axis=1)
        macro_a = ((base_a + moved) / counts).mean(axis=1)
        macro_b = ((base_b - moved) / counts).mean(axis=1)
        return macro_a - macro_b

    observed = abs(float(macro_delta(np.zeros((1, len(labels)), dtype=bool))[0]))

    rng = np.random.default_rng(rng_seed)
    hits = 0
    chunk = max(1, min(iterations, 4_000_000 // max(1, len(labels))))
    remaining = iterations
    while remaining > 0:
        m = min(chunk, remaining)
        swaps = rng.random((m, len(labels))) < 0.5
        deltas = macro_delta(swaps)
        hits += int((np.abs(deltas) >= observed).sum())
        remaining -= m
    return (hits + 1) / (iterations + 1)


@dataclass
class EvalReport:
    """Side-by-side evaluation of the full model and the elapsed-time baseline."""

    classes: tuple[int, ...]
    test_size: int
    class_counts: dict[int, int]
    model_macro_accuracy: float
    baseline_macro_accuracy: float
    accuracy_delta: float
    p_value: float
    model_recall: dict[int, float]
    baseline_recall: dict[int, float]
    model_confusion: np.ndarray
    baseline_confusion: np.ndarray
    model_pr_curves: dict[int, list[tuple[float, float, float]]] = field(repr=False)
    baseline_pr_curves: dict[int, list[tuple[float, float, float]]] = field(repr=False)

    def to_json_dict(self) -> dict:
        def curves(by_class):
            return {
                quartile_name(cls): [
                    {"threshold": t, "precision": p, "recall": r}
                    for t, p, r in points
                ]
                for cls, points in by_class.items()
            }

        return {
            "format_version": 1,
            "classes": [quartile_name(c) for c in self.classes],
            "test_size": self.test_size,
            "class_counts": {quartile_name(c): n for c, n in self.class_counts.items()},
            "model": {
                "macro_accuracy": self.model_macro_accuracy,
                "per_class_recall": {quartile_name(c): r for c, r in self.model_recall.items()},
                "confusion_matrix": self.model_confusion.tolist(),
                "pr_curves": curves(self.model_pr_curves),
            },
            "baseline": {
                "macro_accuracy": self.baseline_macro_accuracy,
                "per_class_recall": {quartile_name(c): r for c, r in self.baseline_recall.items()},
                "confusion_matrix": self.baseline_confusion.tolist(),
                "pr_curves": curves(self.baseline_pr_curves),
            },
            "comparison": {
                "accuracy_delta": self.accuracy_delta,
                "p_value": self.p_value,
            },
        }

    def pr_rows(self) -> list[tuple[str, str, float, float, float]]:
        """(system, class, threshold, precision, recall) rows for CSV export."""
        rows = []
        for system, curves in (("model", self.model_pr_curves),
                               ("baseline", self.baseline_pr_curves)):
            for cls in self.classes:
                for threshold, precision, recall in curves.get(cls, []):
                    rows.append((system, quartile_name(cls), threshold, precision, recall))
        return rows


def evaluate(
    model: StageModel,
    baseline: StageModel,
    test: Dataset,
    iterations: int = 10_000,
    rng_seed: int = 0,
) -> EvalReport:
    """Evaluate both models on a held-out dataset."""
    if len(test) == 0:
        raise ValueError("empty test set")
    classes = model.classes
    model_labels, model_scores = model.predict(test.X, test.layout.tag)
    base_labels, base_scores = baseline.predict(test.X, test.layout.tag)

    def per_class_recall(preds):
        out = {}
        for cls in classes:
            mask = test.y == cls
            if mask.sum() > 0:
                out[cls] = float((preds[mask] == cls).mean())
        return out

    def curves(scores):
        return {
            cls: pr_curve(scores[:, i], test.y == cls)
            for i, cls in enumerate(classes)
        }

    return EvalReport(
        classes=classes,
        test_size=len(test),
        class_counts={cls: int((test.y == cls).sum()) for cls in classes},
        model_macro_accuracy=macro_accuracy(test.y, model_labels),
        baseline_macro_accuracy=macro_accuracy(test.y, base_labels),
        accuracy_delta=macro_accuracy(test.y, model_labels) - macro_accuracy(test.y, base_labels),
        p_value=approx_randomization_test(model_labels, base_labels, test.y,
                                          iterations=iterations, rng_seed=rng_seed),
        model_recall=per_class_recall(model_labels),
        baseline_recall=per_class_recall(base_labels),
        model_confusion=confusion_matrix(test.y, model_labels, classes),
        baseline_confusion=confusion_matrix(test.y, base_labels, classes),
        model_pr_curves=curves(model_scores),
        baseline_pr_curves=curves(base_scores),
    )
