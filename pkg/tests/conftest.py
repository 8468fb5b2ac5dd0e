import pytest

from docstage.events import TelemetryEvent, build_timelines
from docstage.taxonomy import default_activity_sets, default_taxonomy


def ev(doc, author, ts, cmd="Typing"):
    return TelemetryEvent(doc_id=doc, author_id=author, timestamp=ts, command=cmd)


def timeline_of(*events):
    """Build a single-document timeline from events (all same doc_id)."""
    timelines = build_timelines(list(events))
    assert len(timelines) == 1
    return next(iter(timelines.values()))


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


@pytest.fixture(scope="session")
def activity_sets():
    return default_activity_sets()
