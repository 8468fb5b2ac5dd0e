"""Corpus-level descriptive statistics over document lifetimes.

A document's lifetime is cut into 10 equal stages. The statistics here
summarize how activity is distributed across those stages: the pooled
activity distribution (with zero-valued pre/post flanks, 12 points total),
per-activity stage profiles, the first-activity mix of authors by the order
in which they joined a document, and the lifetime-vs-collaborators trend.

Counting is deliberately plain Python over integers so results are exactly
reproducible by naive recomputation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .events import DocumentTimeline
from .taxonomy import CommandTaxonomy

__all__ = [
    "STAGE_COUNT",
    "stage_bucket",
    "CatDistribution",
    "cat_distribution",
    "ActivityStageRow",
    "ActivityStageMatrix",
    "activity_stage_matrix",
    "RankActivityProfile",
    "FirstActivityProfile",
    "first_activity_profile",
    "CorrelationResult",
    "lifetime_collaborator_correlation",
]

STAGE_COUNT = 10
_SUM_TOLERANCE = 1e-9


def stage_bucket(timeline: DocumentTimeline, timestamp: int) -> int:
    """Stage (1..10) of a timestamp within a document's lifetime.

    Stages are half-open tenths of the lifetime, except the last one which
    is closed so the final event lands in stage 10. Exact for integer
    timestamps.
    """
    lifetime = timeline.lifetime
    if lifetime == 0:
        raise ValueError(f"document {timeline.doc_id} has zero lifetime")
    offset = timestamp - timeline.creation_time
    if offset < 0 or offset > lifetime:
        raise ValueError(
            f"timestamp {timestamp} outside lifetime of document {timeline.doc_id}")
    return min(STAGE_COUNT, (STAGE_COUNT * offset) // lifetime + 1)


@dataclass(frozen=True)
class CatDistribution:
    """Share of all events per lifetime stage, flanked by zero pre/post buckets.

    ``buckets`` has 12 entries: pre, stage 1..10, post. The flanks are always
    zero (no interactions exist before creation or after the last event);
    they are kept so exported curves plot with explicit zero endpoints.
    """

    buckets: tuple[float, ...]
    total_events: int

    def __post_init__(self):
        if len(self.buckets) != STAGE_COUNT + 2:
            raise ValueError(f"expected {STAGE_COUNT + 2} buckets")
        if self.buckets[0] != 0.0 or self.buckets[-1] != 0.0:
            raise ValueError("pre/post buckets must be zero")
        total = sum(self.buckets)
        if self.total_events > 0 and abs(total - 1.0) > _SUM_TOLERANCE:
            raise ValueError(f"buckets must sum to 1, got {total!r}")

    @property
    def stage_shares(self) -> tuple[float, ...]:
        return self.buckets[1:-1]


def _stage_counts(timeline: DocumentTimeline) -> list[int]:
    counts = [0] * STAGE_COUNT
    for event in timeline.events:
        counts[stage_bucket(timeline, event.timestamp) - 1] += 1
    return counts


def cat_distribution(
    timelines: Mapping[str, DocumentTimeline] | list[DocumentTimeline],
    per_document: bool = False,
) -> CatDistribution:
    """Distribution of event counts over the 10 lifetime stages.

    Default pools raw event counts across all documents and normalizes by
    the grand total. With ``per_document=True`` each document is normalized
    by its own event count first and the per-document distributions are
    averaged with equal weight (documents are visited in doc_id order so the
    result does not depend on input ordering).
    """
    if isinstance(timelines, Mapping):
        docs = [timelines[doc_id] for doc_id in sorted(timelines)]
    else:
        docs = sorted(timelines, key=lambda tl: tl.doc_id)
    if not docs:
        return CatDistribution(buckets=(0.0,) * (STAGE_COUNT + 2), total_events=0)

    total_events = sum(len(tl.events) for tl in docs)
    if per_document:
        sums = [0.0] * STAGE_COUNT
        for tl in docs:
            counts = _stage_counts(tl)
            doc_total = len(tl.events)
            for i in range(STAGE_COUNT):
                sums[i] += counts[i] / doc_total
        shares = [s / len(docs) for s in sums]
    else:
        pooled = [0] * STAGE_COUNT
        for tl in docs:
            counts = _stage_counts(tl)
            for i in range(STAGE_COUNT):
                pooled[i] += counts[i]
        shares = [c / total_events for c in pooled]
    return CatDistribution(buckets=(0.0, *shares, 0.0), total_events=total_events)


@dataclass(frozen=True)
class ActivityStageRow:
    activity: str
    shares: tuple[float, ...]  # per stage 1..10, sums to 1
    total_events: int

    @property
    def early_late_difference(self) -> float:
        return self.shares[0] - self.shares[-1]


@dataclass(frozen=True)
class ActivityStageMatrix:
    """Per-activity stage profiles, earliest-leaning activities first.

    Rows are ordered by (stage-1 share minus stage-10 share) descending with
    the activity name as tiebreak; activities that never occur are omitted.
    """

    rows: tuple[ActivityStageRow, ...]

    def row(self, activity: str) -> Optional[ActivityStageRow]:
        for r in self.rows:
            if r.activity == activity:
                return r
        return None


def activity_stage_matrix(
    timelines: Mapping[str, DocumentTimeline] | list[DocumentTimeline],
    activity_sets: Mapping[str, frozenset[str]],
) -> ActivityStageMatrix:
    """Per-activity distribution over the 10 stages, normalized per activity."""
    if not activity_sets:
        raise ValueError("activity_sets must be non-empty")
    docs = timelines.values() if isinstance(timelines, Mapping) else timelines

    activities = sorted(activity_sets)
    command_to_activities: dict[str, list[str]] = {}
    for activity in activities:
        for command in activity_sets[activity]:
            command_to_activities.setdefault(command, []).append(activity)

    counts = {activity: [0] * STAGE_COUNT for activity in activities}
    for tl in docs:
        for event in tl.events:
            members = command_to_activities.get(event.command)
            if not members:
                continue
            stage = stage_bucket(tl, event.timestamp)
            for activity in members:
                counts[activity][stage - 1] += 1

    rows = []
    for activity in activities:
        total = sum(counts[activity])
        if total == 0:
            continue
        shares = tuple(c / total for c in counts[activity])
        rows.append(ActivityStageRow(activity=activity, shares=shares, total_events=total))
    rows.sort(key=lambda r: (-r.early_late_difference, r.activity))
    return ActivityStageMatrix(rows=tuple(rows))


def _share_map(counts: dict[str, int]) -> dict[str, float]:
    total = sum(counts.values())
    return {name: counts[name] / total for name in sorted(counts)}


@dataclass(frozen=True)
class RankActivityProfile:
    """Activity mix of the rank-th author to join a document (1-based rank).

    ``first_*`` distributions cover only each author's first event;
    ``overall_*`` cover all their events. Both are reported at the category
    and the high-level taxonomy granularity (the interesting contrasts, such
    as starting with typing, live at the category level).
    """

    rank: int
    author_count: int
    first_by_category: dict[str, float]
    first_by_high_level: dict[str, float]
    overall_by_category: dict[str, float]
    overall_by_high_level: dict[str, float]


@dataclass(frozen=True)
class FirstActivityProfile:
    ranks: tuple[RankActivityProfile, ...]

    def rank(self, rank: int) -> Optional[RankActivityProfile]:
        for profile in self.ranks:
            if profile.rank == rank:
                return profile
        return None


def first_activity_profile(
    timelines: Mapping[str, DocumentTimeline] | list[DocumentTimeline],
    taxonomy: CommandTaxonomy,
) -> FirstActivityProfile:
    """Pool first-event and all-event activity mixes by author join order.

    Within each document, authors are ranked by the timestamp of their first
    event (ties broken by author_id). Rank r's distributions pool the rank-r
    authors of every document.
    """
    docs = timelines.values() if isinstance(timelines, Mapping) else timelines

    first_cat: dict[int, dict[str, int]] = {}
    first_high: dict[int, dict[str, int]] = {}
    overall_cat: dict[int, dict[str, int]] = {}
    overall_high: dict[int, dict[str, int]] = {}
    author_counts: dict[int, int] = {}

    for tl in docs:
        first_events = {}
        for event in tl.events:  # stable time order; first occurrence wins
            if event.author_id not in first_events:
                first_events[event.author_id] = event
        ranked = sorted(first_events, key=lambda a: (first_events[a].timestamp, a))
        rank_of = {author: rank for rank, author in enumerate(ranked, start=1)}

        for author, rank in rank_of.items():
            author_counts[rank] = author_counts.get(rank, 0) + 1
            category, high_level = taxonomy.classify(first_events[author].command)
            bucket = first_cat.setdefault(rank, {})
            bucket[category] = bucket.get(category, 0) + 1
            bucket = first_high.setdefault(rank, {})
            bucket[high_level] = bucket.get(high_level, 0) + 1
        for event in tl.events:
            rank = rank_of[event.author_id]
            category, high_level = taxonomy.classify(event.command)
            bucket = overall_cat.setdefault(rank, {})
            bucket[category] = bucket.get(category, 0) + 1
            bucket = overall_high.setdefault(rank, {})
            bucket[high_level] = bucket.get(high_level, 0) + 1

    profiles = tuple(
        RankActivityProfile(
            rank=rank,
            author_count=author_counts[rank],
            first_by_category=_share_map(first_cat[rank]),
            first_by_high_level=_share_map(first_high[rank]),
            overall_by_category=_share_map(overall_cat[rank]),
            overall_by_high_level=_share_map(overall_high[rank]),
        )
        for rank in sorted(author_counts)
    )
    return FirstActivityProfile(ranks=profiles)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    group_count: int
    degenerate: bool  # True when group means have zero variance (r defined as 0)


def lifetime_collaborator_correlation(
    timelines: Mapping[str, DocumentTimeline] | list[DocumentTimeline],
    max_collaborators: int = 10,
) -> CorrelationResult:
    """Pearson correlation between collaborator count and mean lifetime.

    Documents are grouped by their author count (1..max_collaborators,
    larger groups ignored); the correlation is computed between the group
    index and the group's mean lifetime, over populated groups only.
    """
    if max_collaborators < 2:
        raise ValueError("max_collaborators must be >= 2")
    docs = timelines.values() if isinstance(timelines, Mapping) else timelines

    sums = [0] * (max_collaborators + 1)
    counts = [0] * (max_collaborators + 1)
    for tl in docs:
        k = len(tl.authors)
        if 1 <= k <= max_collaborators:
            sums[k] += tl.lifetime
            counts[k] += 1

    xs = [k for k in range(1, max_collaborators + 1) if counts[k] > 0]
    if len(xs) < 2:
        raise ValueError("need at least 2 populated collaborator groups")
    ys = [sums[k] / counts[k] for k in xs]

    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_y == 0.0:
        return CorrelationResult(r=0.0, group_count=n, degenerate=True)
    r = cov / (var_x * var_y) ** 0.5
    return CorrelationResult(r=r, group_count=n, degenerate=False)
