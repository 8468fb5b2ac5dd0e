"""Core telemetry data model and the JSONL interchange format.

Log records come in two kinds: ``event`` (one timestamped command issued by
one author on one document) and ``content`` (a point-in-time reading of
document size counters). Timestamps are integer milliseconds since epoch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Union

__all__ = [
    "TelemetryEvent",
    "ContentSnapshot",
    "ParseDiagnostic",
    "DocumentTimeline",
    "Record",
    "parse_log_stream",
    "record_to_json_line",
    "write_jsonl",
    "build_timelines",
    "filter_corpus",
]

HOUR_MS = 3_600_000


@dataclass(frozen=True, slots=True)
class TelemetryEvent:
    doc_id: str
    author_id: str
    timestamp: int  # ms since epoch
    command: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.author_id:
            raise ValueError("author_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass(frozen=True, slots=True)
class ContentSnapshot:
    doc_id: str
    timestamp: int
    page_count: int
    section_count: int
    paragraph_count: int
    line_count: int
    word_count: int
    character_count: int

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")
        for name in ("page_count", "section_count", "paragraph_count",
                     "line_count", "word_count", "character_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True, slots=True)
class ParseDiagnostic:
    """Non-fatal problem with one input line (1-based line number)."""

    line_number: int
    reason: str


Record = Union[TelemetryEvent, ContentSnapshot]

_EVENT_FIELDS = {"doc": str, "author": str, "ts": int, "cmd": str}
_CONTENT_FIELDS = {"doc": str, "ts": int, "pages": int, "sections": int,
                   "paragraphs": int, "lines": int, "words": int, "chars": int}


def _typed(obj: dict, key: str, want: type):
    value = obj.get(key)
    if want is int:
        # bool is an int subclass; reject it explicitly
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"field {key!r} must be an integer")
    elif not isinstance(value, want):
        raise ValueError(f"field {key!r} must be a {want.__name__}")
    return value


def _parse_line(obj: dict) -> Record:
    kind = obj.get("kind")
    if kind == "event":
        return TelemetryEvent(
            doc_id=_typed(obj, "doc", str),
            author_id=_typed(obj, "author", str),
            timestamp=_typed(obj, "ts", int),
            command=_typed(obj, "cmd", str),
        )
    if kind == "content":
        return ContentSnapshot(
            doc_id=_typed(obj, "doc", str),
            timestamp=_typed(obj, "ts", int),
            page_count=_typed(obj, "pages", int),
            section_count=_typed(obj, "sections", int),
            paragraph_count=_typed(obj, "paragraphs", int),
            line_count=_typed(obj, "lines", int),
            word_count=_typed(obj, "words", int),
            character_count=_typed(obj, "chars", int),
        )
    raise ValueError(f"unknown kind {kind!r}")


def parse_log_stream(
    stream: Union[IO[bytes], IO[str], Iterable[Union[bytes, str]]],
) -> tuple[list[TelemetryEvent], list[ContentSnapshot], list[ParseDiagnostic]]:
    """Parse a JSONL stream into events, content snapshots and diagnostics.

    Every well-formed line yields exactly one record; malformed lines are
    skipped and reported as a :class:`ParseDiagnostic`. Output order follows
    input order. Blank lines are ignored.
    """
    events: list[TelemetryEvent] = []
    snapshots: list[ContentSnapshot] = []
    diagnostics: list[ParseDiagnostic] = []
    for line_number, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                diagnostics.append(ParseDiagnostic(line_number, f"invalid UTF-8: {exc}"))
                continue
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(ParseDiagnostic(line_number, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            diagnostics.append(ParseDiagnostic(line_number, "line is not a JSON object"))
            continue
        try:
            record = _parse_line(obj)
        except ValueError as exc:
            diagnostics.append(ParseDiagnostic(line_number, str(exc)))
            continue
        if isinstance(record, TelemetryEvent):
            events.append(record)
        else:
            snapshots.append(record)
    return events, snapshots, diagnostics


def record_to_json_line(record: Record) -> str:
    """Serialize one record to its JSONL line (no trailing newline)."""
    if isinstance(record, TelemetryEvent):
        obj = {"kind": "event", "doc": record.doc_id, "author": record.author_id,
               "ts": record.timestamp, "cmd": record.command}
    elif isinstance(record, ContentSnapshot):
        obj = {"kind": "content", "doc": record.doc_id, "ts": record.timestamp,
               "pages": record.page_count, "sections": record.section_count,
               "paragraphs": record.paragraph_count, "lines": record.line_count,
               "words": record.word_count, "chars": record.character_count}
    else:
        raise TypeError(f"not a telemetry record: {type(record).__name__}")
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(records: Iterable[Record], stream: IO[str]) -> int:
    """Write records as UTF-8 JSONL with LF line endings. Returns line count."""
    count = 0
    for record in records:
        stream.write(record_to_json_line(record))
        stream.write("\n")
        count += 1
    return count


@dataclass(frozen=True, slots=True)
class DocumentTimeline:
    """All observed activity of one document, in time order.

    ``events`` is stably sorted by timestamp (equal timestamps keep input
    order); ``lifetime`` is the span from the first to the last event.
    """

    doc_id: str
    events: tuple[TelemetryEvent, ...]
    content_snapshots: tuple[ContentSnapshot, ...]
    creation_time: int = field(init=False)
    last_activity_time: int = field(init=False)

    def __post_init__(self):
        if not self.events:
            raise ValueError("a timeline needs at least one event")
        object.__setattr__(self, "creation_time", self.events[0].timestamp)
        object.__setattr__(self, "last_activity_time", self.events[-1].timestamp)

    @property
    def lifetime(self) -> int:
        return self.last_activity_time - self.creation_time

    @property
    def authors(self) -> frozenset[str]:
        return frozenset(e.author_id for e in self.events)

    def events_until(self, cutoff: int) -> Iterator[TelemetryEvent]:
        for event in self.events:
            if event.timestamp > cutoff:
                break
            yield event


def build_timelines(
    events: Iterable[TelemetryEvent],
    snapshots: Iterable[ContentSnapshot] = (),
) -> dict[str, DocumentTimeline]:
    """Group records by document into timelines.

    Documents with zero events are absent (content snapshots alone do not
    establish a lifetime).
    """
    events_by_doc: dict[str, list[TelemetryEvent]] = {}
    for event in events:
        events_by_doc.setdefault(event.doc_id, []).append(event)
    snaps_by_doc: dict[str, list[ContentSnapshot]] = {}
    for snap in snapshots:
        snaps_by_doc.setdefault(snap.doc_id, []).append(snap)

    timelines: dict[str, DocumentTimeline] = {}
    for doc_id, doc_events in events_by_doc.items():
        doc_events.sort(key=lambda e: e.timestamp)  # stable: ties keep input order
        doc_snaps = sorted(snaps_by_doc.get(doc_id, []), key=lambda s: s.timestamp)
        timelines[doc_id] = DocumentTimeline(
            doc_id=doc_id,
            events=tuple(doc_events),
            content_snapshots=tuple(doc_snaps),
        )
    return timelines


def filter_corpus(
    timelines: dict[str, DocumentTimeline],
    min_lifetime_ms: int = HOUR_MS,
    min_authors: int = 2,
    max_authors: int = 10,
) -> dict[str, DocumentTimeline]:
    """Keep documents with lifetime >= ``min_lifetime_ms`` and an author count
    in ``[min_authors, max_authors]``."""
    if min_authors < 1:
        raise ValueError("min_authors must be >= 1")
    if max_authors < min_authors:
        raise ValueError("max_authors must be >= min_authors")
    return {
        doc_id: tl
        for doc_id, tl in timelines.items()
        if tl.lifetime >= min_lifetime_ms and min_authors <= len(tl.authors) <= max_authors
    }
