"""Entropy-normalized collaboration balance scores.

The balance of a snapshot's contributions is the Shannon entropy of the
per-author contribution shares, normalized by the maximum entropy ``log(u)``
for ``u`` contributing authors: 1.0 means perfectly even contributions,
0.0 means a single contributor did everything. The overall score counts any
content-contributing activity; the per-role variant restricts counting to one
activity dimension so dedicated roles (writer, editor, ...) show up as low
balance in that dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .events import TelemetryEvent
from .taxonomy import CommandTaxonomy

__all__ = [
    "CONTENT_DIMENSIONS",
    "ContributionVector",
    "balance_score",
    "contribution_vector",
]

#: High-level categories that count as content contribution.
CONTENT_DIMENSIONS = ("Adding Content", "Editing", "Communicating", "Finalizing")

_SHARE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ContributionVector:
    """Per-author contribution shares (non-negative, summing to 1)."""

    shares: tuple[float, ...]
    dimension: Optional[str] = None  # None = all content dimensions pooled

    def __post_init__(self):
        if not self.shares:
            raise ValueError("shares must be non-empty")
        if any(s < 0 for s in self.shares):
            raise ValueError("shares must be non-negative")
        total = math.fsum(self.shares)
        if abs(total - 1.0) > _SHARE_TOLERANCE:
            raise ValueError(f"shares must sum to 1, got {total!r}")

    @property
    def author_count(self) -> int:
        return len(self.shares)


def balance_score(vector: ContributionVector) -> float:
    """Normalized Shannon entropy of the shares, in [0, 1].

    A single author (``u == 1``) is degenerate and scores 0; callers that
    need to distinguish "solo so far" from "unbalanced pair" should carry a
    separate flag (the featurizer does).
    """
    u = vector.author_count
    if u == 1:
        return 0.0
    entropy = -math.fsum(s * math.log(s) for s in vector.shares if s > 0.0)
    score = entropy / math.log(u)
    return min(1.0, max(0.0, score))


def contribution_vector(
    events: Iterable[TelemetryEvent],
    taxonomy: CommandTaxonomy,
    dimension: Optional[str] = None,
    include_zero_authors: bool = False,
) -> Optional[ContributionVector]:
    """Build the contribution-share vector from a snapshot's events.

    With ``dimension=None``, counts each author's events whose high-level
    category is one of :data:`CONTENT_DIMENSIONS`; with a dimension given,
    counts only that one. Authors with no counted events are excluded from
    the vector unless ``include_zero_authors`` is set, in which case any
    author with at least one content-contributing event is kept with
    share 0. Returns ``None`` when no event counts at all (score undefined).
    """
    if dimension is not None and dimension not in CONTENT_DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    counts: dict[str, int] = {}
    contributors: set[str] = set()
    for event in events:
        _, high_level = taxonomy.classify(event.command)
        if high_level not in CONTENT_DIMENSIONS:
            continue
        contributors.add(event.author_id)
        if dimension is not None and high_level != dimension:
            continue
        counts[event.author_id] = counts.get(event.author_id, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return None
    if include_zero_authors:
        authors = sorted(contributors)
    else:
        authors = sorted(counts)
    shares = tuple(counts.get(a, 0) / total for a in authors)
    return ContributionVector(shares=shares, dimension=dimension)
