import json
from pathlib import Path

import pytest

from docstage.cli import ConfigError, load_config, main


def run(args):
    return main([str(a) for a in args])


def write_config(tmp_path, body):
    path = tmp_path / "config.toml"
    path.write_text(body, encoding="utf-8")
    return path


SMALL = """
[simulate]
doc_count = 60
rng_seed = 7

[train]
tree_count = 8

[evaluate]
randomization_iterations = 300
"""


class TestConfig:
    def test_unknown_key_is_error(self, tmp_path, capsys):
        config = write_config(tmp_path, "[simulate]\ndoc_count = 5\nbogus = 1\n")
        assert run(["simulate", "--config", config, "--out", tmp_path / "o"]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_unknown_section_is_error(self, tmp_path, capsys):
        config = write_config(tmp_path, "[nope]\nx = 1\n")
        assert run(["simulate", "--config", config]) == 2
        assert "nope" in capsys.readouterr().err

    def test_wrong_type_is_error(self, tmp_path, capsys):
        config = write_config(tmp_path, '[simulate]\ndoc_count = "many"\n')
        assert run(["simulate", "--config", config]) == 2
        assert "doc_count" in capsys.readouterr().err

    def test_missing_file_is_error(self, tmp_path, capsys):
        assert run(["simulate", "--config", tmp_path / "absent.toml"]) == 2

    def test_defaults_when_no_config(self):
        config = load_config(None)
        assert config.doc_count == 2000
        assert config.snapshots_per_doc == 5
        assert config.quartile_boundaries == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_boundaries_validated(self, tmp_path):
        config = write_config(
            tmp_path, "[featurize]\nquartile_boundaries = [0.0, 0.25, 0.75, 1.0]\n")
        loaded = load_config(config)
        assert loaded.quartile_boundaries == (0.0, 0.25, 0.75, 1.0)
        bad = write_config(tmp_path, "[featurize]\nquartile_boundaries = [0.5, 1.0]\n")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_threads_validated(self, tmp_path, capsys):
        config = write_config(tmp_path, SMALL)
        assert run(["simulate", "--config", config, "--out", tmp_path / "o",
                    "--threads", "0"]) == 2


class TestPipeline:
    def test_analyze_without_corpus_fails(self, tmp_path, capsys):
        config = write_config(tmp_path, SMALL)
        assert run(["analyze", "--config", config, "--out", tmp_path / "empty"]) == 1
        assert "corpus" in capsys.readouterr().err

    def test_stagewise_run(self, tmp_path, capsys):
        config = write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        for command in ("simulate", "analyze", "featurize", "train", "evaluate"):
            assert run([command, "--config", config, "--out", out]) == 0, command
        captured = capsys.readouterr().out.strip().splitlines()
        final = json.loads(captured[-1])
        assert 0 < final["p_value"] <= 1
        assert (out / "corpus.jsonl").exists()
        assert (out / "analytics" / "cat.csv").exists()
        assert (out / "analytics" / "lifetime_correlation.json").exists()
        assert (out / "dataset" / "train.csv").exists()
        assert (out / "models" / "model.json").exists()
        assert (out / "models" / "feature_importance.csv").exists()
        assert (out / "eval" / "report.json").exists()
        assert (out / "eval" / "pr_curves.csv").exists()

        cat_rows = (out / "analytics" / "cat.csv").read_text().splitlines()
        assert cat_rows[0] == "bucket,share"
        assert cat_rows[1].startswith("pre,0.0")
        assert cat_rows[-1].startswith("post,0.0")

        report = json.loads((out / "eval" / "report.json").read_text())
        assert set(report["model"]["pr_curves"]) == {"Q1", "Q2", "Q3", "Q4"}

    def test_repro_prints_summary(self, tmp_path, capsys):
        config = write_config(tmp_path, SMALL)
        out = tmp_path / "repro"
        assert run(["repro", "--config", config, "--out", out]) == 0
        stdout = capsys.readouterr().out
        assert "model macro accuracy" in stdout
        assert (out / "summary.txt").read_text() == stdout

    def test_early_heavy_corpus_cat_rows(self, tmp_path):
        # all stage weight on stage 1: recovered shares must be zero for
        # stages 2..9; each document's span-closing final event stays in
        # stage 10, so that small share is structural
        config = write_config(tmp_path, SMALL)
        out = tmp_path / "early"
        from docstage import synthgen
        from docstage.cli import _Workspace, load_config
        ws = _Workspace(load_config(config))
        ws.config.out_dir = Path(out)
        base = synthgen.default_config(doc_count=30, rng_seed=7)
        gen = synthgen.default_config(
            doc_count=30, rng_seed=7,
            cat_weights=(0.0, 1.0) + (0.0,) * 10,
            stage_command_mix=tuple(dict(m) for m in base.stage_command_mix),
        )
        out.mkdir(parents=True)
        with open(ws.corpus_path, "w", newline="\n") as fh, \
                open(ws.truth_path, "w", newline="\n") as truth_fh:
            synthgen.write_corpus(gen, fh, truth_fh)
        from docstage.cli import cmd_analyze
        cmd_analyze(ws)
        rows = (out / "analytics" / "cat.csv").read_text().splitlines()[1:]
        shares = {name: float(v) for name, v in (row.split(",") for row in rows)}
        assert shares["pre"] == 0.0 and shares["post"] == 0.0
        for stage in range(2, 10):
            assert shares[f"stage{stage}"] == 0.0
        assert shares["stage1"] > 0.9
