"""Batch command-line front door.

Subcommands compose the pipeline stages into reproducible runs:

    simulate  -> corpus.jsonl + truth.jsonl
    analyze   -> stage-distribution / activity / first-activity / correlation exports
    featurize -> dataset/train.csv + dataset/test.csv + dataset/layout.json
    train     -> models/model.json + models/baseline.json + feature importance
    evaluate  -> eval/report.json + eval/pr_curves.csv
    repro     -> the whole chain plus a one-page summary

Everything that affects numbers lives in the TOML config (unknown keys are
errors); flags only pick the subcommand, output directory and thread cap.
No subcommand reads the clock or the network, so identical configs produce
byte-identical outputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, analytics, events, features, predictor, synthgen, taxonomy
from .evaluation import evaluate

HOUR_MS = events.HOUR_MS


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    out_dir: Path = Path("out")
    taxonomy_path: Optional[Path] = None
    activity_sets_path: Optional[Path] = None
    corpus_path: Optional[Path] = None   # default: <out>/corpus.jsonl
    truth_path: Optional[Path] = None    # default: <out>/truth.jsonl

    # simulate
    doc_count: int = 2000
    simulate_seed: int = 7
    lifetime_min_hours: float = 1.0
    lifetime_max_hours: float = 2160.0
    lifetime_author_slope: float = 0.35
    events_min: int = 60
    events_max: int = 140
    snapshot_every: int = 10

    # filter
    min_lifetime_hours: float = 1.0
    min_authors: int = 2
    max_authors: int = 10

    # analyze
    max_collaborators: int = 10
    cat_per_document: bool = False

    # featurize
    snapshots_per_doc: int = 5
    featurize_seed: int = 11
    split_ratio: float = 0.8333
    quartile_boundaries: tuple[float, ...] = features.DEFAULT_BOUNDARIES

    # train
    hyperparams: dict = field(default_factory=dict)

    # evaluate
    randomization_iterations: int = 10_000
    evaluate_seed: int = 17


_SCHEMA = {
    "paths": {
        "out_dir": str, "taxonomy": str, "activity_sets": str,
        "corpus": str, "truth": str,
    },
    "simulate": {
        "doc_count": int, "rng_seed": int,
        "lifetime_min_hours": float, "lifetime_max_hours": float,
        "lifetime_author_slope": float,
        "events_min": int, "events_max": int, "snapshot_every": int,
    },
    "filter": {
        "min_lifetime_hours": float, "min_authors": int, "max_authors": int,
    },
    "analyze": {
        "max_collaborators": int, "cat_per_document": bool,
    },
    "featurize": {
        "snapshots_per_doc": int, "rng_seed": int, "split_ratio": float,
        "quartile_boundaries": list,
    },
    "train": {
        "tree_count": int, "max_depth": int, "learning_rate": float,
        "min_leaf": int, "subsample": float, "rng_seed": int,
    },
    "evaluate": {
        "randomization_iterations": int, "rng_seed": int,
    },
}


def _coerce(section: str, key: str, value, want: type):
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want in (int, float, bool) and isinstance(value, bool) is not (want is bool):
        raise ConfigError(f"[{section}] {key}: expected {want.__name__}")
    if not isinstance(value, want):
        raise ConfigError(f"[{section}] {key}: expected {want.__name__}, "
                          f"got {type(value).__name__}")
    return value


def load_config(path: Optional[Path]) -> PipelineConfig:
    """Parse and validate the TOML config; unknown keys are errors."""
    raw = {}
    if path is not None:
        try:
            raw = tomllib.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}")

    unknown_sections = set(raw) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"unknown config section(s): {sorted(unknown_sections)}")
    values: dict[str, dict] = {}
    for section, table in raw.items():
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(table) - set(_SCHEMA[section])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
        values[section] = {
            key: _coerce(section, key, value, _SCHEMA[section][key])
            for key, value in table.items()
        }

    def get(section, key, default):
        return values.get(section, {}).get(key, default)

    config = PipelineConfig(
        out_dir=Path(get("paths", "out_dir", "out")),
        taxonomy_path=Path(values["paths"]["taxonomy"]) if get("paths", "taxonomy", None) else None,
        activity_sets_path=Path(values["paths"]["activity_sets"]) if get("paths", "activity_sets", None) else None,
        corpus_path=Path(values["paths"]["corpus"]) if get("paths", "corpus", None) else None,
        truth_path=Path(values["paths"]["truth"]) if get("paths", "truth", None) else None,
        doc_count=get("simulate", "doc_count", 2000),
        simulate_seed=get("simulate", "rng_seed", 7),
        lifetime_min_hours=get("simulate", "lifetime_min_hours", 1.0),
        lifetime_max_hours=get("simulate", "lifetime_max_hours", 2160.0),
        lifetime_author_slope=get("simulate", "lifetime_author_slope", 0.35),
        events_min=get("simulate", "events_min", 60),
        events_max=get("simulate", "events_max", 140),
        snapshot_every=get("simulate", "snapshot_every", 10),
        min_lifetime_hours=get("filter", "min_lifetime_hours", 1.0),
        min_authors=get("filter", "min_authors", 2),
        max_authors=get("filter", "max_authors", 10),
        max_collaborators=get("analyze", "max_collaborators", 10),
        cat_per_document=get("analyze", "cat_per_document", False),
        snapshots_per_doc=get("featurize", "snapshots_per_doc", 5),
        featurize_seed=get("featurize", "rng_seed", 11),
        split_ratio=get("featurize", "split_ratio", 0.8333),
        quartile_boundaries=tuple(get("featurize", "quartile_boundaries",
                                      list(features.DEFAULT_BOUNDARIES))),
        hyperparams=dict(values.get("train", {})),
        randomization_iterations=get("evaluate", "randomization_iterations", 10_000),
        evaluate_seed=get("evaluate", "rng_seed", 17),
    )
    try:
        features.validate_boundaries(config.quartile_boundaries)
    except ValueError as exc:
        raise ConfigError(f"[featurize] quartile_boundaries: {exc}")
    return config


@dataclass
class _Workspace:
    config: PipelineConfig

    @property
    def out(self) -> Path:
        return self.config.out_dir

    @property
    def corpus_path(self) -> Path:
        return self.config.corpus_path or (self.out / "corpus.jsonl")

    @property
    def truth_path(self) -> Path:
        return self.config.truth_path or (self.out / "truth.jsonl")

    def load_taxonomy(self) -> taxonomy.CommandTaxonomy:
        if self.config.taxonomy_path is None:
            return taxonomy.default_taxonomy()
        with open(self.config.taxonomy_path, encoding="utf-8") as fh:
            return taxonomy.load_taxonomy(fh)

    def load_activity_sets(self) -> dict[str, frozenset[str]]:
        if self.config.activity_sets_path is None:
            return taxonomy.default_activity_sets()
        with open(self.config.activity_sets_path, encoding="utf-8") as fh:
            return taxonomy.load_activity_sets(fh)

    def generator_config(self) -> synthgen.GeneratorConfig:
        cfg = self.config
        return synthgen.default_config(
            doc_count=cfg.doc_count,
            rng_seed=cfg.simulate_seed,
            lifetime_min_hours=cfg.lifetime_min_hours,
            lifetime_max_hours=cfg.lifetime_max_hours,
            lifetime_author_slope=cfg.lifetime_author_slope,
            events_min=cfg.events_min,
            events_max=cfg.events_max,
            snapshot_every=cfg.snapshot_every,
        )

    def read_corpus(self) -> dict[str, events.DocumentTimeline]:
        path = self.corpus_path
        if not path.exists():
            raise FileNotFoundError(f"corpus file not found: {path} (run simulate first?)")
        with open(path, "rb") as fh:
            evts, snaps, diags = events.parse_log_stream(fh)
        for diag in diags:
            print(f"warning: {path}:{diag.line_number}: {diag.reason}", file=sys.stderr)
        return events.build_timelines(evts, snaps)

    def filtered(self, timelines) -> dict[str, events.DocumentTimeline]:
        cfg = self.config
        return events.filter_corpus(
            timelines,
            min_lifetime_ms=int(round(cfg.min_lifetime_hours * HOUR_MS)),
            min_authors=cfg.min_authors,
            max_authors=cfg.max_authors,
        )


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_simulate(ws: _Workspace) -> dict:
    gen_config = ws.generator_config()
    tax = ws.load_taxonomy()
    ws.out.mkdir(parents=True, exist_ok=True)
    with open(ws.corpus_path, "w", encoding="utf-8", newline="\n") as corpus_fh, \
            open(ws.truth_path, "w", encoding="utf-8", newline="\n") as truth_fh:
        n_records, n_truth = synthgen.write_corpus(gen_config, corpus_fh, truth_fh, tax)
    _write_json(ws.out / "generator_config.json", gen_config.to_json_dict())
    return {"records": n_records, "events": n_truth, "documents": gen_config.doc_count}


def cmd_analyze(ws: _Workspace) -> dict:
    cfg = ws.config
    tax = ws.load_taxonomy()
    activity_sets = ws.load_activity_sets()
    timelines = ws.read_corpus()
    lifetime_ok = {
        doc_id: tl for doc_id, tl in timelines.items()
        if tl.lifetime >= int(round(cfg.min_lifetime_hours * HOUR_MS))
    }
    filtered = ws.filtered(timelines)
    out = ws.out / "analytics"
    out.mkdir(parents=True, exist_ok=True)

    cat = analytics.cat_distribution(filtered, per_document=cfg.cat_per_document)
    bucket_names = ["pre"] + [f"stage{i}" for i in range(1, 11)] + ["post"]
    with open(out / "cat.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["bucket", "share"])
        for name, share in zip(bucket_names, cat.buckets):
            writer.writerow([name, repr(share)])
    _write_json(out / "cat.json", {
        "buckets": dict(zip(bucket_names, cat.buckets)),
        "total_events": cat.total_events,
        "normalization": "per_document_average" if cfg.cat_per_document else "pooled",
    })

    matrix = analytics.activity_stage_matrix(filtered, activity_sets)
    with open(out / "activity_stages.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["activity", "total_events"] + [f"stage{i}" for i in range(1, 11)])
        for row in matrix.rows:
            writer.writerow([row.activity, row.total_events] + [repr(s) for s in row.shares])
    _write_json(out / "activity_stages.json", {
        "rows": [
            {"activity": r.activity, "total_events": r.total_events,
             "shares": list(r.shares)}
            for r in matrix.rows
        ],
        "ordering": "stage1_share_minus_stage10_share_descending",
    })

    profile = analytics.first_activity_profile(filtered, tax)
    with open(out / "first_activities.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["rank", "level", "scope", "name", "share"])
        for rank_profile in profile.ranks:
            for level, scope, dist in (
                ("category", "first", rank_profile.first_by_category),
                ("high_level", "first", rank_profile.first_by_high_level),
                ("category", "overall", rank_profile.overall_by_category),
                ("high_level", "overall", rank_profile.overall_by_high_level),
            ):
                for name, share in dist.items():
                    writer.writerow([rank_profile.rank, level, scope, name, repr(share)])
    _write_json(out / "first_activities.json", {
        "ranks": [
            {
                "rank": p.rank,
                "author_count": p.author_count,
                "first_by_category": p.first_by_category,
                "first_by_high_level": p.first_by_high_level,
                "overall_by_category": p.overall_by_category,
                "overall_by_high_level": p.overall_by_high_level,
            }
            for p in profile.ranks
        ],
    })

    # lifetime filter only: this statistic spans all collaborator counts,
    # including single-author documents the author filter would drop
    correlation = analytics.lifetime_collaborator_correlation(
        lifetime_ok, max_collaborators=cfg.max_collaborators)
    _write_json(out / "lifetime_correlation.json", {
        "pearson_r": correlation.r,
        "group_count": correlation.group_count,
        "degenerate": correlation.degenerate,
        "grouping": "mean lifetime per collaborator count, author filter not applied",
    })
    return {
        "documents_analyzed": len(filtered),
        "cat_stage1": cat.buckets[1],
        "cat_stage10": cat.buckets[10],
        "lifetime_correlation_r": correlation.r,
    }


def _featurizer(ws: _Workspace) -> features.SnapshotFeaturizer:
    return features.SnapshotFeaturizer(ws.load_taxonomy(), ws.load_activity_sets())


def cmd_featurize(ws: _Workspace) -> dict:
    cfg = ws.config
    corpus = ws.filtered(ws.read_corpus())
    featurizer = _featurizer(ws)
    train, test = features.build_dataset(
        corpus, featurizer,
        k_per_doc=cfg.snapshots_per_doc,
        rng_seed=cfg.featurize_seed,
        split_ratio=cfg.split_ratio,
        boundaries=cfg.quartile_boundaries,
    )
    out = ws.out / "dataset"
    out.mkdir(parents=True, exist_ok=True)
    for name, dataset in (("train", train), ("test", test)):
        with open(out / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
            features.write_dataset_csv(dataset, fh)
    with open(out / "layout.json", "w", encoding="utf-8", newline="\n") as fh:
        features.write_layout_sidecar(train, fh)
    return {
        "train_snapshots": len(train),
        "test_snapshots": len(test),
        "train_documents": len(set(train.doc_ids)),
        "test_documents": len(set(test.doc_ids)),
        "features": train.layout.size,
        "layout_tag": train.layout.tag,
    }


def _load_dataset(ws: _Workspace, name: str) -> features.Dataset:
    out = ws.out / "dataset"
    layout_path = out / "layout.json"
    if not layout_path.exists():
        raise FileNotFoundError(f"missing {layout_path} (run featurize first?)")
    with open(layout_path, encoding="utf-8") as fh:
        sidecar = features.read_layout_sidecar(fh)
    with open(out / f"{name}.csv", encoding="utf-8") as fh:
        X, y, names = features.read_dataset_csv(fh)
    if list(names) != sidecar["feature_names"]:
        raise ValueError(f"{name}.csv columns do not match layout.json")
    layout = features.FeatureLayout(
        names=tuple(sidecar["feature_names"]),
        classes={
            class_name: (sidecar["feature_names"].index(members[0]),
                         sidecar["feature_names"].index(members[-1]) + 1)
            for class_name, members in sidecar["feature_classes"].items()
        },
        tag=sidecar["layout_tag"],
    )
    return features.Dataset(
        X=X, y=y,
        t_rel=np.zeros(len(y)),
        doc_ids=("",) * len(y),
        layout=layout,
        boundaries=tuple(sidecar["label_boundaries"]),
    )


def cmd_train(ws: _Workspace) -> dict:
    train = _load_dataset(ws, "train")
    hyper = ws.config.hyperparams
    model = predictor.train_model(train, hyper)
    baseline = predictor.train_baseline(train, hyper)
    out = ws.out / "models"
    out.mkdir(parents=True, exist_ok=True)
    for name, m in (("model", model), ("baseline", baseline)):
        with open(out / f"{name}.json", "w", encoding="utf-8", newline="\n") as fh:
            predictor.save_model(m, fh)
    with open(out / "feature_importance.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["feature", "total_split_gain"])
        for name, gain in predictor.feature_importance(model):
            writer.writerow([name, repr(gain)])
    return {
        "train_snapshots": len(train),
        "model_features": len(model.feature_names),
        "baseline_features": len(baseline.feature_names),
    }


def cmd_evaluate(ws: _Workspace) -> dict:
    test = _load_dataset(ws, "test")
    models_dir = ws.out / "models"
    loaded = {}
    for name in ("model", "baseline"):
        path = models_dir / f"{name}.json"
        if not path.exists():
            raise FileNotFoundError(f"missing {path} (run train first?)")
        with open(path, encoding="utf-8") as fh:
            loaded[name] = predictor.load_model(fh)
    report = evaluate(
        loaded["model"], loaded["baseline"], test,
        iterations=ws.config.randomization_iterations,
        rng_seed=ws.config.evaluate_seed,
    )
    out = ws.out / "eval"
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report.to_json_dict())
    with open(out / "pr_curves.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["system", "quartile", "threshold", "precision", "recall"])
        for system, quartile, threshold, precision, recall in report.pr_rows():
            writer.writerow([system, quartile, repr(threshold), repr(precision), repr(recall)])
    return {
        "model_macro_accuracy": report.model_macro_accuracy,
        "baseline_macro_accuracy": report.baseline_macro_accuracy,
        "accuracy_delta": report.accuracy_delta,
        "p_value": report.p_value,
    }


def _summary_text(sim, ana, feat, ev, config: PipelineConfig) -> str:
    lines = [
        "docstage repro summary",
        "======================",
        f"simulated documents:      {sim['documents']} (seed {config.simulate_seed})",
        f"corpus records:           {sim['records']} ({sim['events']} events)",
        f"documents after filter:   {ana['documents_analyzed']} "
        f"(lifetime >= {config.min_lifetime_hours}h, "
        f"{config.min_authors}..{config.max_authors} authors)",
        f"stage shares (1st/10th):  {ana['cat_stage1']:.4f} / {ana['cat_stage10']:.4f}",
        f"lifetime~collaborators r: {ana['lifetime_correlation_r']:.4f}",
        f"snapshots:                {feat['train_snapshots']} train / "
        f"{feat['test_snapshots']} test "
        f"({feat['train_documents']}/{feat['test_documents']} documents, "
        f"k={config.snapshots_per_doc})",
        f"feature vector size:      {feat['features']} (layout {feat['layout_tag']})",
        "",
        f"model macro accuracy:     {ev['model_macro_accuracy']:.4f}",
        f"baseline macro accuracy:  {ev['baseline_macro_accuracy']:.4f}",
        f"delta:                    {ev['accuracy_delta']:+.4f}",
        f"randomization p-value:    {ev['p_value']:.6f} "
        f"({config.randomization_iterations} iterations)",
        "",
    ]
    return "\n".join(lines)


def cmd_repro(ws: _Workspace) -> dict:
    sim = cmd_simulate(ws)
    ana = cmd_analyze(ws)
    feat = cmd_featurize(ws)
    cmd_train(ws)
    ev = cmd_evaluate(ws)
    summary = _summary_text(sim, ana, feat, ev, ws.config)
    (ws.out / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return ev


_COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "repro": cmd_repro,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docstage",
        description="Document-lifecycle telemetry analytics and stage prediction.",
    )
    parser.add_argument("--version", action="version", version=f"docstage {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", type=Path, default=None,
                       help="TOML config file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides [paths] out_dir)")
        p.add_argument("--threads", type=int, default=1,
                       help="cap on internal parallelism (current stages are "
                            "single-threaded; accepted for compatibility)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        config = load_config(args.config)
        if args.out is not None:
            config.out_dir = args.out
        result = _COMMANDS[args.command](_Workspace(config))
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command != "repro":
        print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
