"""Deterministic synthetic collaborative-writing telemetry generator.

Documents are generated from configured marginals: a collaborator-count
distribution, a log-uniform lifetime with a per-author trend, a stage-weight
vector controlling when events happen, per-stage command mixes controlling
what happens at each stage, and per-author-rank first-command tables
controlling how joining authors start. The defaults are calibrated so the
analytics recover known targets (e.g. header/footer work concentrated early,
second authors starting with typing far more often than first authors).

Every event's stage is drawn i.i.d. from the stage weights; the document's
first and last events are realized by pinning one drawn stage-1 event to
offset 0 and one drawn stage-10 event to the full lifetime, so recomputing
stages from the emitted timestamps reproduces the drawn stages exactly and
the pooled stage distribution matches the configured weights in expectation.

All randomness flows through splitmix64 (documented below), an integer-only
64-bit PRNG, so byte-identical output does not depend on platform or numpy
version.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import IO, Mapping, Optional

from .analytics import (STAGE_COUNT, activity_stage_matrix, cat_distribution,
                        first_activity_profile, lifetime_collaborator_correlation,
                        stage_bucket)
from .events import ContentSnapshot, DocumentTimeline, Record, TelemetryEvent, write_jsonl
from .taxonomy import CommandTaxonomy, default_activity_sets, default_taxonomy

__all__ = [
    "SplitMix64",
    "GeneratorConfig",
    "default_config",
    "generate",
    "write_corpus",
    "calibration_report",
]

_MASK64 = (1 << 64) - 1
_EPOCH_2019_MS = 1_546_300_800_000  # 2019-01-01T00:00:00Z
_DOC_SPACING_MS = 7_200_000
_SUM_TOLERANCE = 1e-9
HOUR_MS = 3_600_000


class SplitMix64:
    """splitmix64 PRNG (Steele, Lea & Flood 2014), bit-exact by construction.

    state' = state + 0x9E3779B97F4A7C15 (mod 2^64)
    z = state'; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB (mod 2^64); output z ^ (z >> 31)

    Floats come from the top 53 bits: (u64 >> 11) * 2^-53.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.randrange(hi - lo + 1)


class _WeightedChoice:
    """Cumulative-weight sampler with a fixed item order."""

    def __init__(self, items, weights):
        self.items = list(items)
        self.cumulative = []
        total = 0.0
        for w in weights:
            if w < 0:
                raise ValueError("weights must be non-negative")
            total += w
        running = 0.0
        for w in weights:
            running += w / total
            self.cumulative.append(running)

    def draw(self, rng: SplitMix64):
        i = bisect_right(self.cumulative, rng.random())
        return self.items[min(i, len(self.items) - 1)]


def _check_distribution(name: str, values) -> None:
    total = math.fsum(values)
    if abs(total - 1.0) > _SUM_TOLERANCE:
        raise ValueError(f"{name} must sum to 1, got {total!r}")
    if any(v < 0 for v in values):
        raise ValueError(f"{name} has negative weights")


@dataclass
class GeneratorConfig:
    doc_count: int
    rng_seed: int
    collaborator_weights: dict[int, float]           # author count -> probability
    cat_weights: tuple[float, ...]                    # 12 entries, pre/post zero
    stage_command_mix: tuple[dict[str, float], ...]   # one mix per stage 1..10
    first_command_by_rank: dict[int, dict[str, float]]
    lifetime_min_hours: float = 1.0
    lifetime_max_hours: float = 2160.0  # 90-day observation window
    lifetime_author_slope: float = 0.35
    lifetime_cap_hours: float = 2160.0
    events_min: int = 60
    events_max: int = 140
    snapshot_every: int = 10

    def validate(self) -> None:
        if self.doc_count < 1:
            raise ValueError("doc_count must be >= 1")
        if not self.collaborator_weights:
            raise ValueError("collaborator_weights is empty")
        if any(k < 1 for k in self.collaborator_weights):
            raise ValueError("collaborator counts must be >= 1")
        _check_distribution("collaborator_weights", self.collaborator_weights.values())
        if len(self.cat_weights) != STAGE_COUNT + 2:
            raise ValueError(f"cat_weights must have {STAGE_COUNT + 2} entries")
        if self.cat_weights[0] != 0.0 or self.cat_weights[-1] != 0.0:
            raise ValueError("pre/post stage weights must be zero")
        _check_distribution("cat_weights", self.cat_weights)
        if len(self.stage_command_mix) != STAGE_COUNT:
            raise ValueError(f"stage_command_mix must have {STAGE_COUNT} mixes")
        for stage, mix in enumerate(self.stage_command_mix, start=1):
            if not mix:
                raise ValueError(f"stage {stage} command mix is empty")
            _check_distribution(f"stage {stage} command mix", mix.values())
        if sorted(self.first_command_by_rank) != list(
                range(1, len(self.first_command_by_rank) + 1)):
            raise ValueError("first_command_by_rank must cover ranks 1..R")
        for rank, mix in self.first_command_by_rank.items():
            _check_distribution(f"rank {rank} first-command mix", mix.values())
        if not 0 < self.lifetime_min_hours <= self.lifetime_max_hours:
            raise ValueError("need 0 < lifetime_min_hours <= lifetime_max_hours")
        if self.lifetime_author_slope < 0:
            raise ValueError("lifetime_author_slope must be >= 0")
        if self.events_min < 2 or self.events_max < self.events_min:
            raise ValueError("need 2 <= events_min <= events_max")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "rng_seed": self.rng_seed,
            "collaborator_weights": {str(k): v for k, v in sorted(self.collaborator_weights.items())},
            "cat_weights": list(self.cat_weights),
            "stage_command_mix": [dict(sorted(mix.items())) for mix in self.stage_command_mix],
            "first_command_by_rank": {str(k): dict(sorted(v.items()))
                                      for k, v in sorted(self.first_command_by_rank.items())},
            "lifetime_min_hours": self.lifetime_min_hours,
            "lifetime_max_hours": self.lifetime_max_hours,
            "lifetime_author_slope": self.lifetime_author_slope,
            "lifetime_cap_hours": self.lifetime_cap_hours,
            "events_min": self.events_min,
            "events_max": self.events_max,
            "snapshot_every": self.snapshot_every,
        }


# Stage profiles (share of a command's occurrences per stage 1..10) used to
# build the default per-stage mixes. The early/late contrasts encode the
# calibration targets: header/footer work 37% vs 24% at the first/last stage,
# style and paragraph work 34% vs 23%, synonym lookups 20% vs 26%, proofing
# 11 points more likely at the end, and so on.
_PROFILES: dict[str, tuple[float, ...]] = {
    "base_u": (.28, .08, .05, .04, .03, .03, .04, .05, .09, .31),
    "start": (.55, .12, .06, .04, .03, .03, .03, .04, .04, .06),
    "final": (.04, .03, .03, .04, .05, .06, .08, .12, .20, .35),
    "early_hf": (.37, .06, .05, .04, .04, .04, .04, .05, .07, .24),
    "early_style": (.34, .07, .06, .05, .04, .04, .05, .06, .06, .23),
    "early_lists": (.33, .07, .06, .05, .05, .04, .05, .06, .07, .22),
    "mid_early": (.18, .10, .11, .12, .11, .10, .09, .08, .06, .05),
    "mid_late": (.05, .06, .08, .09, .10, .11, .12, .11, .10, .18),
    "late_synonym": (.20, .05, .05, .05, .06, .06, .07, .09, .11, .26),
    "late_proofing": (.17, .05, .05, .05, .05, .06, .07, .09, .13, .28),
    "late_spelling": (.20, .05, .05, .05, .05, .06, .07, .09, .12, .26),
    "late_misspelling": (.22, .05, .05, .05, .05, .05, .06, .08, .11, .28),
    "mid_grammar": (.12, .08, .09, .12, .13, .13, .12, .09, .07, .05),
    "late_collab": (.10, .04, .04, .05, .06, .07, .09, .12, .15, .28),
}

# (command, relative frequency, stage profile). Frequencies are normalized.
_COMMAND_TABLE: tuple[tuple[str, float, str], ...] = (
    ("Typing", 300, "base_u"),
    ("Save", 40, "base_u"), ("SaveAs", 6, "base_u"), ("SaveAll", 2, "base_u"),
    ("Copy", 18, "base_u"), ("CopyText", 6, "base_u"),
    ("Paste", 30, "base_u"), ("PasteTextOnly", 8, "base_u"),
    ("AutoCorrect", 15, "base_u"), ("Replace", 8, "base_u"),
    ("Bold", 20, "base_u"), ("Italic", 10, "base_u"), ("Underline", 6, "base_u"),
    ("FontDialog", 4, "base_u"), ("FontColor", 4, "base_u"),
    ("Open", 20, "start"), ("FileOpen", 6, "start"), ("OfficeStart", 6, "start"),
    ("New", 6, "start"), ("FileNewDialog", 4, "start"), ("NewDefault", 2, "start"),
    ("Close", 8, "base_u"), ("FileClose", 4, "base_u"),
    ("NextField", 8, "base_u"), ("PreviousField", 4, "base_u"),
    ("NextHeader", 6, "base_u"), ("PreviousHeader", 3, "base_u"),
    ("GoToPreviousPage", 8, "base_u"),
    ("ViewReadingMode", 10, "base_u"), ("ReadingModePageview", 4, "base_u"),
    ("ExpandAllHeadings", 3, "base_u"), ("ToggleReadingMode", 3, "base_u"),
    ("Find", 12, "base_u"), ("FindNext", 8, "base_u"),
    ("ShowDocumentText", 2, "base_u"), ("DocInfoFileName", 2, "base_u"),
    ("SelectAll", 10, "base_u"), ("Pointer", 6, "base_u"),
    ("SelectionMode", 3, "base_u"), ("TabReview", 6, "base_u"),
    ("TabHome", 8, "base_u"), ("RefPaneSelection", 2, "base_u"),
    ("EndOfLineExtend", 3, "base_u"),
    ("InsertHeader", 6, "early_hf"), ("InsertFooter", 5, "early_hf"),
    ("EditHeader", 5, "early_hf"), ("EditFooter", 4, "early_hf"),
    ("ViewHeader", 4, "early_hf"), ("GoToHeader", 3, "early_hf"),
    ("GoToFooter", 3, "early_hf"),
    ("ApplyStyle", 10, "early_style"), ("StyleGallery", 6, "early_style"),
    ("DefineNewStyle", 3, "early_style"), ("ClearFormatting", 3, "early_style"),
    ("ParagraphDialog", 6, "early_style"), ("AlignLeft", 5, "early_style"),
    ("AlignCenter", 4, "early_style"), ("LineSpacing", 4, "early_style"),
    ("IndentIncrease", 3, "early_style"),
    ("ApplyBullets", 7, "early_lists"), ("ApplyNumbering", 5, "early_lists"),
    ("NumberingRestart", 2, "early_lists"), ("JoinList", 2, "early_lists"),
    ("listPosition", 2, "early_lists"),
    ("TableInsert", 8, "mid_early"), ("TableDeleteRow", 3, "mid_early"),
    ("TableAutoFit", 3, "mid_early"), ("SelectTable", 4, "mid_early"),
    ("SelectRow", 3, "mid_early"), ("SelectCell", 3, "mid_early"),
    ("InsertShape", 6, "mid_early"), ("SetTransparentColor", 2, "mid_early"),
    ("Recolor", 3, "mid_early"), ("DrawSelectNext", 3, "mid_early"),
    ("InsertPicture", 8, "mid_early"), ("PictureFormat", 4, "mid_early"),
    ("InsertHyperlink", 5, "mid_early"), ("EditHyperlink", 2, "mid_early"),
    ("WebCopyHyperlink", 2, "mid_early"),
    ("InsertObject", 2, "mid_early"), ("InsertFile", 3, "mid_early"),
    ("InsertDrawingCanvas", 2, "mid_early"),
    ("InsertEquation", 4, "mid_late"), ("EquationScriptGallery", 2, "mid_late"),
    ("EquationLinearAll", 1, "mid_late"),
    ("InsertChart", 4, "mid_late"), ("ChartEdit", 2, "mid_late"),
    ("ChartDelete", 1, "mid_late"),
    ("InsertCitation", 5, "mid_late"), ("InsertBibliography", 2, "mid_late"),
    ("EditCitation", 2, "mid_late"), ("BibCitationToText", 1, "mid_late"),
    ("BibliographyFilterLanguages", 1, "mid_late"),
    ("TableOfContentsInsert", 2, "mid_late"), ("UpdateTableOfContents", 2, "mid_late"),
    ("ThesaurusLookup", 5, "late_synonym"), ("SynonymReplace", 3, "late_synonym"),
    ("SpellingAndGrammar", 6, "late_proofing"),
    ("NextMisspelling", 6, "late_misspelling"),
    ("StatusSpellCheck", 5, "late_spelling"), ("IgnoreSpellingError", 3, "late_spelling"),
    ("GrammarPane", 4, "mid_grammar"), ("IgnoreGrammarError", 2, "mid_grammar"),
    ("ToggleTrackChanges", 6, "late_collab"), ("NextRevision", 4, "late_collab"),
    ("AcceptRevision", 4, "late_collab"), ("RejectAllChangesShown", 2, "late_collab"),
    ("RevisionsHighlightChanges", 2, "late_collab"), ("AcceptConflict", 1, "late_collab"),
    ("TrackChangesAdvancedOptions", 1, "late_collab"),
    ("NewComment", 8, "late_collab"), ("DeleteComment", 2, "late_collab"),
    ("ReplyToComment", 5, "late_collab"), ("MarkCommentDone", 3, "late_collab"),
    ("Share", 6, "final"), ("FileShareMenu", 2, "final"),
    ("SendForReview", 4, "final"), ("SharedWithPersonaCanView", 2, "final"),
    ("MergeToEMail", 1, "final"), ("EnvelopeSend", 1, "final"),
    ("DocEncryption", 1, "final"), ("MarkAsReadOnly", 2, "final"),
    ("FileFinalizeMenu", 1, "final"), ("RestrictFormatting", 1, "final"),
    ("WordCompatChkr", 1, "final"), ("StatusHasPolicy", 1, "final"),
    ("DocInspector", 2, "final"), ("AccessibilityChecker", 2, "final"),
    ("DocProtectionManage", 1, "final"),
    ("PrintPreviewAndPrint", 3, "final"), ("Print", 4, "final"),
    ("ClosePreview", 2, "final"), ("DocExport", 2, "final"),
    ("ConvertDoc", 1, "final"), ("SaveToWebSignIn", 1, "final"),
    ("StatusBarConfigMenu", 1, "base_u"), ("Custom", 2, "base_u"),
    ("Ruler11", 1, "base_u"), ("TabHelp", 1, "base_u"), ("Insights", 1, "base_u"),
    ("StatusDocRecovery", 1, "base_u"), ("TabDeveloperTools", 1, "base_u"),
    ("TabAddins", 1, "base_u"), ("OfficeExtensionsGallery", 1, "base_u"),
)

_DEFAULT_COLLABORATOR_WEIGHTS = {
    1: 0.10, 2: 0.55, 3: 0.15, 4: 0.06, 5: 0.04,
    6: 0.03, 7: 0.02, 8: 0.02, 9: 0.02, 10: 0.01,
}

# First-command tables by author join rank; ranks beyond the table reuse the
# last row. Second joiners start with typing 14% of the time vs 2% for the
# document creator (a 7x contrast), with similar contrasts for adding
# advanced objects, editing, and communicating.
_DEFAULT_FIRST_COMMANDS = {
    1: {
        "Typing": 0.02,
        "TableInsert": 0.013, "InsertShape": 0.012, "InsertPicture": 0.01,
        "InsertChart": 0.005,
        "Bold": 0.02, "Replace": 0.015, "AutoCorrect": 0.015,
        "NewComment": 0.007, "ToggleTrackChanges": 0.003,
        "Open": 0.40, "OfficeStart": 0.10, "ViewReadingMode": 0.10,
        "GoToPreviousPage": 0.08, "SelectAll": 0.08, "Save": 0.07,
        "NextField": 0.05,
    },
    2: {
        "Typing": 0.14,
        "TableInsert": 0.03, "InsertShape": 0.03, "InsertPicture": 0.025,
        "InsertChart": 0.015,
        "Bold": 0.04, "Replace": 0.03, "AutoCorrect": 0.03,
        "NewComment": 0.02, "ToggleTrackChanges": 0.01,
        "Open": 0.28, "ViewReadingMode": 0.08, "GoToPreviousPage": 0.07,
        "SelectAll": 0.07, "Save": 0.07, "NextField": 0.06,
    },
}


def default_config(doc_count: int = 2000, rng_seed: int = 7, **overrides) -> GeneratorConfig:
    """Calibrated default configuration.

    The stage weights and per-stage mixes are derived from one consistent
    table of per-command frequencies and stage profiles, so the implied
    per-activity stage shares follow directly from the configuration. One
    structural caveat: a document's very first event takes its command from
    the rank-1 first-command table, consuming one stage-1 slot per document;
    with the default event counts this depletes recovered stage-1 activity
    shares by under a point relative to the implied profiles.
    """
    total = math.fsum(w for _, w, _ in _COMMAND_TABLE)
    freqs = {c: w / total for c, w, _ in _COMMAND_TABLE}
    profiles = {c: _PROFILES[p] for c, _, p in _COMMAND_TABLE}

    stage_weights = []
    for s in range(STAGE_COUNT):
        stage_weights.append(math.fsum(freqs[c] * profiles[c][s] for c, _, _ in _COMMAND_TABLE))
    mixes = []
    for s in range(STAGE_COUNT):
        mixes.append({c: freqs[c] * profiles[c][s] / stage_weights[s]
                      for c, _, _ in _COMMAND_TABLE})

    config = GeneratorConfig(
        doc_count=doc_count,
        rng_seed=rng_seed,
        collaborator_weights=dict(_DEFAULT_COLLABORATOR_WEIGHTS),
        cat_weights=(0.0, *stage_weights, 0.0),
        stage_command_mix=tuple(mixes),
        first_command_by_rank={r: dict(mix) for r, mix in _DEFAULT_FIRST_COMMANDS.items()},
    )
    for key, value in overrides.items():
        if not hasattr(config, key):
            raise ValueError(f"unknown generator option {key!r}")
        setattr(config, key, value)
    config.validate()
    return config


def _stage_offset_range(stage: int, lifetime: int) -> tuple[int, int]:
    """Inclusive integer offset range recomputing to the given stage."""
    lo = ((stage - 1) * lifetime + 9) // 10
    hi = (stage * lifetime + 9) // 10 - 1
    return lo, hi


@dataclass
class _DocPlan:
    events: list[TelemetryEvent] = field(default_factory=list)
    snapshots_after: dict[int, ContentSnapshot] = field(default_factory=dict)
    truth: list[dict] = field(default_factory=list)


def _generate_doc(doc_id: str, base_ts: int, rng: SplitMix64,
                  config: GeneratorConfig, samplers, taxonomy: CommandTaxonomy) -> _DocPlan:
    collab_sampler, stage_sampler, mix_samplers, rank_samplers = samplers
    u = collab_sampler.draw(rng)
    base_hours = math.exp(
        math.log(config.lifetime_min_hours)
        + rng.random() * (math.log(config.lifetime_max_hours) - math.log(config.lifetime_min_hours)))
    hours = min(base_hours * (1.0 + config.lifetime_author_slope * (u - 1)),
                config.lifetime_cap_hours)
    lifetime = max(int(round(hours * HOUR_MS)), 10 * STAGE_COUNT)

    n = rng.randint(config.events_min, config.events_max)
    n = max(n, u + 1)
    stages = [stage_sampler.draw(rng) for _ in range(n)]
    # the first and last event of a document are structural; host them on
    # drawn stage-1/stage-10 events so stage counts stay on-distribution,
    # converting a draw only when a stage is missing (and never the other
    # pin's only holder)
    if 1 not in stages:
        i = 1 if stages[0] == 10 and stages.count(10) == 1 else 0
        stages[i] = 1
    if 10 not in stages:
        j = n - 2 if stages[-1] == 1 and stages.count(1) == 1 else n - 1
        stages[j] = 10
    start_host = stages.index(1)
    end_host = stages.index(10)

    offsets = [0] * n
    used_entry_offsets = {0}
    for i, stage in enumerate(stages):
        if i == start_host:
            offsets[i] = 0
        elif i == end_host:
            offsets[i] = lifetime
        else:
            lo, hi = _stage_offset_range(stage, lifetime)
            offsets[i] = rng.randint(lo, hi)

    # pick u-1 entry hosts among the remaining events; their offsets must be
    # distinct so the author join order is unambiguous
    candidates = [i for i in range(n) if i not in (start_host, end_host)]
    entry_hosts = []
    for _ in range(u - 1):
        pick = rng.randrange(len(candidates))
        host = candidates.pop(pick)
        lo, hi = _stage_offset_range(stages[host], lifetime)
        while offsets[host] in used_entry_offsets:
            offsets[host] = rng.randint(lo, hi)
        used_entry_offsets.add(offsets[host])
        entry_hosts.append(host)
    entry_hosts.sort(key=lambda i: offsets[i])

    max_rank = max(rank_samplers)
    entry_of_rank = {1: start_host}
    for rank, host in enumerate(entry_hosts, start=2):
        entry_of_rank[rank] = host
    authors = {rank: f"{doc_id}a{rank:02d}" for rank in entry_of_rank}
    entry_offsets = [offsets[entry_of_rank[r]] for r in range(1, u + 1)]

    commands: list[Optional[str]] = [None] * n
    owner: list[Optional[int]] = [None] * n
    for rank, host in entry_of_rank.items():
        commands[host] = rank_samplers[min(rank, max_rank)].draw(rng)
        owner[host] = rank
    for i in range(n):
        if owner[i] is not None:
            continue
        commands[i] = mix_samplers[stages[i] - 1].draw(rng)
        eligible_count = sum(1 for e in entry_offsets if e <= offsets[i])
        owner[i] = 1 + rng.randrange(eligible_count)

    # emission order: by offset; entry events sort before same-millisecond
    # regular events so each author's first event is their entry
    seq = [0] * n
    next_seq = u + 1
    for rank, host in entry_of_rank.items():
        seq[host] = rank
    for i in range(n):
        if seq[i] == 0:
            seq[i] = next_seq
            next_seq += 1
    order = sorted(range(n), key=lambda i: (offsets[i], seq[i]))

    plan = _DocPlan()
    adds = 0
    for position, i in enumerate(order, start=1):
        event = TelemetryEvent(
            doc_id=doc_id,
            author_id=authors[owner[i]],
            timestamp=base_ts + offsets[i],
            command=commands[i],
        )
        plan.events.append(event)
        plan.truth.append({"doc": doc_id, "ts": event.timestamp, "true_stage": stages[i]})
        _, high_level = taxonomy.classify(event.command)
        if high_level == "Adding Content":
            adds += 1
        if position % config.snapshot_every == 0:
            words = 30 * adds
            plan.snapshots_after[position - 1] = ContentSnapshot(
                doc_id=doc_id,
                timestamp=event.timestamp,
                page_count=1 + words // 400,
                section_count=1 + adds // 25,
                paragraph_count=1 + words // 60,
                line_count=1 + words // 12,
                word_count=words,
                character_count=6 * words,
            )
    return plan


def generate(config: GeneratorConfig,
             taxonomy: Optional[CommandTaxonomy] = None) -> tuple[list[Record], list[dict]]:
    """Generate the corpus. Returns (records in emission order, truth rows).

    Truth rows carry the drawn stage of every event, one row per event in
    the same order the events appear in the corpus stream.
    """
    config.validate()
    taxonomy = taxonomy or default_taxonomy()

    collab_items = sorted(config.collaborator_weights)
    samplers = (
        _WeightedChoice(collab_items, [config.collaborator_weights[k] for k in collab_items]),
        _WeightedChoice(range(1, STAGE_COUNT + 1), config.cat_weights[1:-1]),
        [_WeightedChoice(list(mix), list(mix.values())) for mix in config.stage_command_mix],
        {rank: _WeightedChoice(list(mix), list(mix.values()))
         for rank, mix in config.first_command_by_rank.items()},
    )

    master = SplitMix64(config.rng_seed)
    doc_seeds = [master.next_u64() for _ in range(config.doc_count)]

    records: list[Record] = []
    truth: list[dict] = []
    for idx, doc_seed in enumerate(doc_seeds):
        doc_id = f"d{idx:06d}"
        plan = _generate_doc(doc_id, _EPOCH_2019_MS + idx * _DOC_SPACING_MS,
                             SplitMix64(doc_seed), config, samplers, taxonomy)
        for position, event in enumerate(plan.events):
            records.append(event)
            if position in plan.snapshots_after:
                records.append(plan.snapshots_after[position])
        truth.extend(plan.truth)
    return records, truth


def write_corpus(config: GeneratorConfig, corpus_stream: IO[str], truth_stream: IO[str],
                 taxonomy: Optional[CommandTaxonomy] = None) -> tuple[int, int]:
    """Write corpus JSONL and the ground-truth sidecar. Returns line counts."""
    records, truth = generate(config, taxonomy)
    n_records = write_jsonl(records, corpus_stream)
    for row in truth:
        truth_stream.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
        truth_stream.write("\n")
    return n_records, len(truth)


def implied_activity_profiles(
    config: GeneratorConfig,
    activity_sets: Mapping[str, frozenset[str]],
) -> dict[str, tuple[float, ...]]:
    """Per-activity stage shares implied by (cat_weights, stage_command_mix)."""
    profiles = {}
    for activity in sorted(activity_sets):
        joint = [
            math.fsum(config.cat_weights[s + 1] * config.stage_command_mix[s].get(c, 0.0)
                      for c in sorted(activity_sets[activity]))
            for s in range(STAGE_COUNT)
        ]
        total = math.fsum(joint)
        if total > 0:
            profiles[activity] = tuple(j / total for j in joint)
    return profiles


def calibration_report(
    timelines: Mapping[str, DocumentTimeline],
    truth: list[dict],
    config: GeneratorConfig,
    taxonomy: Optional[CommandTaxonomy] = None,
    activity_sets: Optional[Mapping[str, frozenset[str]]] = None,
) -> dict:
    """Compare a generated corpus against its own configured targets.

    Reports the L1 distance of the recovered stage distribution from the
    configured weights, per-activity stage-share deltas against the implied
    profiles, the first-command contrasts by author rank, the recovered
    lifetime/collaborators correlation, and the number of events whose
    recomputed stage disagrees with the sidecar (must be zero).
    """
    if not timelines:
        raise ValueError("empty corpus")
    if not truth:
        raise ValueError("missing ground-truth sidecar")
    taxonomy = taxonomy or default_taxonomy()
    activity_sets = activity_sets or default_activity_sets()

    mismatches = 0
    cursor: dict[str, int] = {}
    for row in truth:
        tl = timelines.get(row["doc"])
        if tl is None:
            raise ValueError(f"sidecar references unknown document {row['doc']!r}")
        i = cursor.get(row["doc"], 0)
        cursor[row["doc"]] = i + 1
        if stage_bucket(tl, tl.events[i].timestamp) != row["true_stage"]:
            mismatches += 1

    cat = cat_distribution(timelines)
    cat_l1 = sum(abs(e - c) for e, c in zip(cat.buckets, config.cat_weights))

    implied = implied_activity_profiles(config, activity_sets)
    matrix = activity_stage_matrix(timelines, activity_sets)
    activities = {}
    for activity, target in implied.items():
        row = matrix.row(activity)
        if row is None:
            continue
        deltas = [row.shares[s] - target[s] for s in range(STAGE_COUNT)]
        activities[activity] = {
            "implied": list(target),
            "recovered": list(row.shares),
            "max_abs_delta": max(abs(d) for d in deltas),
            "stage1_delta": deltas[0],
            "stage10_delta": deltas[-1],
        }

    profile = first_activity_profile(timelines, taxonomy)
    max_rank = max(config.first_command_by_rank)
    first_commands = {}
    for rank in range(1, max_rank + 1):
        table = config.first_command_by_rank[min(rank, max_rank)]
        implied_typing = math.fsum(w for c, w in table.items()
                                   if taxonomy.classify(c)[0] == "Typing")
        rank_profile = profile.rank(rank)
        recovered_typing = (rank_profile.first_by_category.get("Typing", 0.0)
                            if rank_profile else 0.0)
        first_commands[rank] = {
            "implied_typing_share": implied_typing,
            "recovered_typing_share": recovered_typing,
            "delta": recovered_typing - implied_typing,
        }

    correlation = lifetime_collaborator_correlation(
        timelines, max_collaborators=max(config.collaborator_weights))

    return {
        "stage_mismatches": mismatches,
        "cat_l1": cat_l1,
        "activities": activities,
        "first_commands": first_commands,
        "lifetime_correlation": {"r": correlation.r, "groups": correlation.group_count},
    }
