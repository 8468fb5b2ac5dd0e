"""Snapshot sampling and feature extraction for stage prediction.

A snapshot aggregates everything observed about a document from its creation
up to a cutoff at relative position ``t`` in [0, 1] of its lifetime; nothing
after the cutoff may influence the feature vector. Snapshots are labeled with
the lifetime bucket (quartile by default) containing ``t``.

The vector is partitioned into feature classes: per-command shares,
per-category shares, high-level category shares, advanced-functionality
counts/flags, collaboration balance, content counters, and elapsed time.
The share classes are normalized within the snapshot, each summing to 1
(or all zero when empty).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from . import balance
from .events import DocumentTimeline
from .taxonomy import CommandTaxonomy

__all__ = [
    "DEFAULT_BOUNDARIES",
    "quartile_of",
    "quartile_name",
    "sample_snapshots",
    "FeatureLayout",
    "SnapshotFeaturizer",
    "Dataset",
    "build_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_layout_sidecar",
    "read_layout_sidecar",
]

DEFAULT_BOUNDARIES = (0.0, 0.25, 0.5, 0.75, 1.0)

UNMAPPED_FEATURE = "(unmapped)"

_RBS_KEYS = {
    "Adding Content": "rbs_adding",
    "Editing": "rbs_editing",
    "Communicating": "rbs_communicating",
    "Finalizing": "rbs_finalizing",
}

# time_elapsed_bucket codes, coarse and ordinal: hours < 1 day <= days <
# 1 week <= weeks < 30 days <= months
_DAY_MS = 24 * 3_600_000
_WEEK_MS = 7 * _DAY_MS
_MONTH_MS = 30 * _DAY_MS


def validate_boundaries(boundaries: Sequence[float]) -> tuple[float, ...]:
    bounds = tuple(float(b) for b in boundaries)
    if len(bounds) < 2 or bounds[0] != 0.0 or bounds[-1] != 1.0:
        raise ValueError("boundaries must start at 0.0 and end at 1.0")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("boundaries must be strictly increasing")
    return bounds


def quartile_of(t_rel: float, boundaries: Sequence[float] = DEFAULT_BOUNDARIES) -> int:
    """1-based label bucket of a relative position.

    Buckets are half-open (a boundary belongs to the upper bucket) except
    t = 1.0, which belongs to the last bucket.
    """
    bounds = validate_boundaries(boundaries)
    if not 0.0 <= t_rel <= 1.0:
        raise ValueError(f"t_rel must be in [0, 1], got {t_rel!r}")
    return min(bisect_right(bounds, t_rel), len(bounds) - 1)


def quartile_name(label: int) -> str:
    return f"Q{label}"


def _draw_distinct(rng: np.random.Generator, k: int) -> tuple[float, ...]:
    values: list[float] = []
    seen: set[float] = set()
    while len(values) < k:
        t = float(rng.random())
        if t not in seen:
            seen.add(t)
            values.append(t)
    return tuple(values)


def sample_snapshots(timeline: DocumentTimeline, k: int = 5, rng_seed: int = 0) -> tuple[float, ...]:
    """Draw k distinct snapshot positions uniformly from [0, 1]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if timeline.lifetime == 0:
        raise ValueError(f"document {timeline.doc_id} has zero lifetime")
    return _draw_distinct(np.random.default_rng(rng_seed), k)


@dataclass(frozen=True)
class FeatureLayout:
    """Fixed, versioned ordering of the feature vector.

    ``classes`` maps each feature class to its [start, stop) index range.
    The tag fingerprints the names so models refuse mismatched inputs.
    """

    names: tuple[str, ...]
    classes: dict[str, tuple[int, int]]
    tag: str

    @property
    def size(self) -> int:
        return len(self.names)

    def class_names(self, feature_class: str) -> tuple[str, ...]:
        start, stop = self.classes[feature_class]
        return self.names[start:stop]

    def class_indices(self, feature_class: str) -> tuple[int, ...]:
        start, stop = self.classes[feature_class]
        return tuple(range(start, stop))


def _layout_tag(names: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()
    return f"v1-{digest[:12]}"


class SnapshotFeaturizer:
    """Turns (timeline, t) pairs into feature vectors under a fixed layout."""

    def __init__(self, taxonomy: CommandTaxonomy,
                 activity_sets: Mapping[str, frozenset[str]]):
        self.taxonomy = taxonomy
        self.activity_sets = {name: activity_sets[name] for name in sorted(activity_sets)}
        self._command_to_activities: dict[str, list[str]] = {}
        for activity, commands in self.activity_sets.items():
            for command in commands:
                self._command_to_activities.setdefault(command, []).append(activity)

        names: list[str] = []
        classes: dict[str, tuple[int, int]] = {}

        def add_class(class_name, feature_names):
            start = len(names)
            names.extend(feature_names)
            classes[class_name] = (start, len(names))

        commands = sorted(taxonomy.commands) + [UNMAPPED_FEATURE]
        add_class("commands", [f"cmd:{c}" for c in commands])
        categories = sorted(taxonomy.categories) + ["Unknown"]
        add_class("command_categories", [f"category:{c}" for c in categories])
        high_levels = sorted(taxonomy.high_levels) + ["Unknown"]
        add_class("high_level_categories", [f"high_level:{h}" for h in high_levels])
        advanced = []
        for activity in self.activity_sets:
            advanced.append(f"advanced:{activity}:count")
            advanced.append(f"advanced:{activity}:present")
        add_class("advanced_functionality", advanced)
        add_class("collaboration", [
            "collaborator_count", "cbs", "cbs_missing",
            "rbs_adding", "rbs_adding_missing",
            "rbs_editing", "rbs_editing_missing",
            "rbs_communicating", "rbs_communicating_missing",
            "rbs_finalizing", "rbs_finalizing_missing",
        ])
        add_class("content", [
            "content_pages", "content_sections", "content_paragraphs",
            "content_lines", "content_words", "content_chars", "content_missing",
        ])
        add_class("lifetime", ["time_elapsed_ms", "time_elapsed_bucket"])

        self.layout = FeatureLayout(names=tuple(names), classes=classes,
                                    tag=_layout_tag(names))
        self._index = {name: i for i, name in enumerate(names)}
        self._command_idx = {c: self._index[f"cmd:{c}"] for c in taxonomy.commands}
        self._unmapped_idx = self._index[f"cmd:{UNMAPPED_FEATURE}"]
        self._category_idx = {c: self._index[f"category:{c}"] for c in categories}
        self._high_idx = {h: self._index[f"high_level:{h}"] for h in high_levels}

    def _normalize(self, vec: np.ndarray, feature_class: str) -> None:
        start, stop = self.layout.classes[feature_class]
        total = vec[start:stop].sum()
        if total > 0:
            vec[start:stop] /= total

    def featurize(self, timeline: DocumentTimeline, t_rel: float) -> np.ndarray:
        """Feature vector of the document's history up to relative time t.

        The cutoff is creation + floor(t * lifetime) milliseconds; events and
        content snapshots strictly after it contribute nothing.
        """
        if not 0.0 <= t_rel <= 1.0:
            raise ValueError(f"t_rel must be in [0, 1], got {t_rel!r}")
        if timeline.lifetime == 0:
            raise ValueError(f"document {timeline.doc_id} has zero lifetime")
        cutoff = timeline.creation_time + math.floor(t_rel * timeline.lifetime)
        events = list(timeline.events_until(cutoff))

        vec = np.zeros(self.layout.size, dtype=np.float64)
        idx = self._index
        for event in events:
            vec[self._command_idx.get(event.command, self._unmapped_idx)] += 1.0
            category, high_level = self.taxonomy.classify(event.command)
            vec[self._category_idx[category]] += 1.0
            vec[self._high_idx[high_level]] += 1.0
            for activity in self._command_to_activities.get(event.command, ()):
                vec[idx[f"advanced:{activity}:count"]] += 1.0
        for activity in self.activity_sets:
            if vec[idx[f"advanced:{activity}:count"]] > 0:
                vec[idx[f"advanced:{activity}:present"]] = 1.0
        self._normalize(vec, "commands")
        self._normalize(vec, "command_categories")
        self._normalize(vec, "high_level_categories")

        overall = balance.contribution_vector(events, self.taxonomy)
        if overall is None:
            vec[idx["cbs_missing"]] = 1.0
        else:
            vec[idx["collaborator_count"]] = overall.author_count
            vec[idx["cbs"]] = balance.balance_score(overall)
            if overall.author_count < 2:
                vec[idx["cbs_missing"]] = 1.0
        for dimension, key in _RBS_KEYS.items():
            per_role = balance.contribution_vector(events, self.taxonomy, dimension)
            if per_role is None or per_role.author_count < 2:
                vec[idx[f"{key}_missing"]] = 1.0
            if per_role is not None:
                vec[idx[key]] = balance.balance_score(per_role)

        latest = None
        for snap in timeline.content_snapshots:
            if snap.timestamp > cutoff:
                break
            latest = snap
        if latest is None:
            vec[idx["content_missing"]] = 1.0
        else:
            vec[idx["content_pages"]] = latest.page_count
            vec[idx["content_sections"]] = latest.section_count
            vec[idx["content_paragraphs"]] = latest.paragraph_count
            vec[idx["content_lines"]] = latest.line_count
            vec[idx["content_words"]] = latest.word_count
            vec[idx["content_chars"]] = latest.character_count

        elapsed = cutoff - timeline.creation_time
        vec[idx["time_elapsed_ms"]] = elapsed
        if elapsed < _DAY_MS:
            bucket = 0
        elif elapsed < _WEEK_MS:
            bucket = 1
        elif elapsed < _MONTH_MS:
            bucket = 2
        else:
            bucket = 3
        vec[idx["time_elapsed_bucket"]] = bucket
        return vec


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (n, features) float64
    y: np.ndarray  # (n,) int labels, 1-based bucket index
    t_rel: np.ndarray
    doc_ids: tuple[str, ...]
    layout: FeatureLayout
    boundaries: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.y)


def build_dataset(
    corpus: Mapping[str, DocumentTimeline],
    featurizer: SnapshotFeaturizer,
    k_per_doc: int = 5,
    rng_seed: int = 0,
    split_ratio: float = 0.8,
    boundaries: Sequence[float] = DEFAULT_BOUNDARIES,
) -> tuple[Dataset, Dataset]:
    """Sample k snapshots per document and split train/test by document.

    The split assigns every snapshot of one document to the same side, so no
    document leaks across the boundary. Deterministic given the seed.
    """
    bounds = validate_boundaries(boundaries)
    if not 0.0 < split_ratio < 1.0:
        raise ValueError("split_ratio must be in (0, 1)")
    doc_ids = sorted(corpus)
    if len(doc_ids) < 2:
        raise ValueError("need at least 2 documents to populate both splits")
    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(len(doc_ids))
    n_train = int(round(split_ratio * len(doc_ids)))
    n_train = min(max(n_train, 1), len(doc_ids) - 1)
    train_docs = {doc_ids[i] for i in perm[:n_train]}

    sides = {True: ([], [], [], []), False: ([], [], [], [])}
    for doc_id in doc_ids:
        timeline = corpus[doc_id]
        rows, labels, ts, ids = sides[doc_id in train_docs]
        for t in _draw_distinct(rng, k_per_doc):
            rows.append(featurizer.featurize(timeline, t))
            labels.append(quartile_of(t, bounds))
            ts.append(t)
            ids.append(doc_id)

    def pack(side):
        rows, labels, ts, ids = side
        return Dataset(
            X=np.vstack(rows),
            y=np.asarray(labels, dtype=np.int64),
            t_rel=np.asarray(ts, dtype=np.float64),
            doc_ids=tuple(ids),
            layout=featurizer.layout,
            boundaries=bounds,
        )

    return pack(sides[True]), pack(sides[False])


def write_dataset_csv(dataset: Dataset, stream: IO[str]) -> None:
    """CSV with one header row (feature names + label) and one row per snapshot."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(dataset.layout.names) + ["label"])
    for row, label in zip(dataset.X, dataset.y):
        writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_dataset_csv(stream: IO[str]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Returns (X, y, feature_names) from a dataset CSV."""
    reader = csv.reader(stream)
    header = next(reader)
    if not header or header[-1] != "label":
        raise ValueError("dataset CSV must end with a 'label' column")
    names = tuple(header[:-1])
    rows, labels = [], []
    for row in reader:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, expected {len(header)}")
        rows.append([float(v) for v in row[:-1]])
        labels.append(int(row[-1]))
    X = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    return X, np.asarray(labels, dtype=np.int64), names


def write_layout_sidecar(dataset: Dataset, stream: IO[str]) -> None:
    """JSON sidecar describing the feature layout and labeling of a dataset."""
    doc = {
        "format_version": 1,
        "layout_tag": dataset.layout.tag,
        "feature_names": list(dataset.layout.names),
        "feature_classes": {
            name: list(dataset.layout.class_names(name))
            for name in dataset.layout.classes
        },
        "label_boundaries": list(dataset.boundaries),
        "labels": [quartile_name(i) for i in range(1, len(dataset.boundaries))],
    }
    json.dump(doc, stream, sort_keys=True, indent=2)
    stream.write("\n")


def read_layout_sidecar(stream: IO[str]) -> dict:
    doc = json.load(stream)
    if doc.get("format_version") != 1:
        raise ValueError("unsupported layout sidecar version")
    return doc
