"""Three-level command taxonomy (command -> category -> high-level category).

The shipped default file covers a representative subset of the commands a
modern word processor logs; real logs will always contain commands that are
not listed, so lookups never fail — unknown commands classify as
:data:`UNMAPPED` and are counted separately downstream.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Mapping

__all__ = [
    "HIGH_LEVEL_CATEGORIES",
    "UNKNOWN",
    "UNMAPPED",
    "TaxonomyError",
    "CommandTaxonomy",
    "load_taxonomy",
    "default_taxonomy",
    "load_activity_sets",
    "default_activity_sets",
]

# The ten coarse activity groups commands roll up into.
HIGH_LEVEL_CATEGORIES = frozenset({
    "Adding Content",
    "Editing",
    "Viewing",
    "Selecting",
    "Sharing",
    "Communicating",
    "Finalizing",
    "Start/New/Open/Close",
    "Save/Print/Copy",
    "Meta",
})

UNKNOWN = "Unknown"
#: Classification returned for commands absent from the taxonomy.
UNMAPPED = (UNKNOWN, UNKNOWN)


class TaxonomyError(ValueError):
    """Raised for an inconsistent or malformed taxonomy definition."""


@dataclass(frozen=True)
class CommandTaxonomy:
    """Validated, immutable command classification table."""

    entries: Mapping[str, tuple[str, str]]
    categories: frozenset[str] = field(init=False)
    high_levels: frozenset[str] = field(init=False)

    def __post_init__(self):
        category_to_high: dict[str, str] = {}
        for command, (category, high_level) in self.entries.items():
            if high_level not in HIGH_LEVEL_CATEGORIES:
                raise TaxonomyError(
                    f"command {command!r}: unknown high-level category {high_level!r}")
            seen = category_to_high.setdefault(category, high_level)
            if seen != high_level:
                raise TaxonomyError(
                    f"category {category!r} mapped to both {seen!r} and {high_level!r}")
        object.__setattr__(self, "categories", frozenset(category_to_high))
        object.__setattr__(self, "high_levels", frozenset(category_to_high.values()))

    def classify(self, command: str) -> tuple[str, str]:
        """Exact-match lookup; unmapped commands return :data:`UNMAPPED`."""
        return self.entries.get(command, UNMAPPED)

    def stats(self) -> tuple[int, int, int]:
        """(command_count, category_count, high_level_count)."""
        return len(self.entries), len(self.categories), len(self.high_levels)

    @property
    def commands(self) -> frozenset[str]:
        return frozenset(self.entries)


def _tsv_rows(stream: IO[str] | Iterable[str]) -> Iterable[list[str]]:
    reader = csv.reader(stream, delimiter="\t")
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        yield [cell.strip() for cell in row]


def load_taxonomy(stream: IO[str] | Iterable[str]) -> CommandTaxonomy:
    """Load a taxonomy from TSV with header ``command  category  high_level``.

    Raises :class:`TaxonomyError` on duplicate commands, a category mapped to
    two high-level names, or an unknown high-level name.
    """
    rows = iter(_tsv_rows(stream))
    try:
        header = next(rows)
    except StopIteration:
        raise TaxonomyError("missing header row") from None
    if header != ["command", "category", "high_level"]:
        raise TaxonomyError(f"unexpected header {header!r}")
    entries: dict[str, tuple[str, str]] = {}
    for row in rows:
        if len(row) != 3:
            raise TaxonomyError(f"expected 3 columns, got {len(row)}: {row!r}")
        command, category, high_level = row
        if command in entries:
            raise TaxonomyError(f"duplicate command {command!r}")
        entries[command] = (category, high_level)
    return CommandTaxonomy(entries=entries)


def load_activity_sets(stream: IO[str] | Iterable[str]) -> dict[str, frozenset[str]]:
    """Load activity groupings from TSV with header ``activity  command``.

    Activities are UI-functionality groupings (HeaderFooter, Styles, ...);
    they cut across the taxonomy and one command may belong to several.
    """
    rows = iter(_tsv_rows(stream))
    try:
        header = next(rows)
    except StopIteration:
        raise TaxonomyError("missing header row") from None
    if header != ["activity", "command"]:
        raise TaxonomyError(f"unexpected header {header!r}")
    sets: dict[str, set[str]] = {}
    for row in rows:
        if len(row) != 2:
            raise TaxonomyError(f"expected 2 columns, got {len(row)}: {row!r}")
        activity, command = row
        members = sets.setdefault(activity, set())
        if command in members:
            raise TaxonomyError(f"duplicate command {command!r} in activity {activity!r}")
        members.add(command)
    return {name: frozenset(members) for name, members in sets.items()}


def _read_data(filename: str) -> list[str]:
    text = resources.files("docstage.data").joinpath(filename).read_text("utf-8")
    return text.splitlines()


def default_taxonomy() -> CommandTaxonomy:
    """The taxonomy file shipped with the package."""
    return load_taxonomy(_read_data("command_taxonomy.tsv"))


def default_activity_sets() -> dict[str, frozenset[str]]:
    """The activity-set file shipped with the package."""
    return load_activity_sets(_read_data("activity_sets.tsv"))
