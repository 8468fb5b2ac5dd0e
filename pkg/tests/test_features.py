import io
import math

import numpy as np
import pytest

from docstage.events import ContentSnapshot, build_timelines
from docstage.features import (DEFAULT_BOUNDARIES, SnapshotFeaturizer,
                               build_dataset, quartile_of, read_dataset_csv,
                               read_layout_sidecar, sample_snapshots,
                               write_dataset_csv, write_layout_sidecar)

from conftest import ev, timeline_of


class TestQuartileOf:
    @pytest.mark.parametrize("t,expected", [
        (0.0, 1), (0.1, 1), (0.25, 2), (0.4, 2), (0.5, 3),
        (0.74, 3), (0.75, 4), (0.99, 4), (1.0, 4),
    ])
    def test_default_boundaries(self, t, expected):
        assert quartile_of(t) == expected

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            quartile_of(-0.01)
        with pytest.raises(ValueError):
            quartile_of(1.01)

    def test_three_bucket_boundaries(self):
        bounds = (0.0, 0.25, 0.75, 1.0)
        assert quartile_of(0.1, bounds) == 1
        assert quartile_of(0.3, bounds) == 2
        assert quartile_of(0.8, bounds) == 3
        assert quartile_of(1.0, bounds) == 3

    def test_invalid_boundaries(self):
        with pytest.raises(ValueError):
            quartile_of(0.5, (0.0, 0.5, 0.5, 1.0))
        with pytest.raises(ValueError):
            quartile_of(0.5, (0.1, 1.0))


class TestSampleSnapshots:
    def tl(self):
        return timeline_of(ev("d", "a", 0), ev("d", "a", 1000))

    def test_deterministic(self):
        a = sample_snapshots(self.tl(), k=5, rng_seed=42)
        b = sample_snapshots(self.tl(), k=5, rng_seed=42)
        assert a == b
        assert len(set(a)) == 5

    def test_single_draw_in_range(self):
        (t,) = sample_snapshots(self.tl(), k=1, rng_seed=0)
        assert 0.0 <= t <= 1.0

    def test_mean_near_half(self):
        draws = sample_snapshots(self.tl(), k=10_000, rng_seed=7)
        assert abs(sum(draws) / len(draws) - 0.5) < 0.02

    def test_zero_lifetime_rejected(self):
        with pytest.raises(ValueError):
            sample_snapshots(timeline_of(ev("d", "a", 5)), k=5, rng_seed=0)


@pytest.fixture(scope="module")
def featurizer(taxonomy, activity_sets):
    return SnapshotFeaturizer(taxonomy, activity_sets)


def hand_doc():
    events = [
        ev("d", "A", 0, "Typing"),
        ev("d", "A", 100, "Bold"),
        ev("d", "B", 200, "NewComment"),
        ev("d", "B", 600, "UnknownCmd"),
        ev("d", "A", 1000, "Save"),
    ]
    snaps = [
        ContentSnapshot("d", 150, 1, 1, 2, 3, 10, 60),
        ContentSnapshot("d", 700, 2, 2, 4, 9, 50, 300),
    ]
    return build_timelines(events, snaps)["d"]


class TestFeaturize:
    def test_hand_computed_vector(self, featurizer):
        tl = hand_doc()
        vec = featurizer.featurize(tl, 0.65)  # cutoff at 650 ms: 4 events
        get = lambda name: vec[featurizer.layout.names.index(name)]

        for cmd in ("Typing", "Bold", "NewComment"):
            assert get(f"cmd:{cmd}") == 0.25
        assert get("cmd:(unmapped)") == 0.25
        assert get("cmd:Save") == 0.0

        assert get("category:Typing") == 0.25
        assert get("category:Formatting") == 0.25
        assert get("category:Comments") == 0.25
        assert get("category:Unknown") == 0.25

        assert get("high_level:Adding Content") == 0.25
        assert get("high_level:Editing") == 0.25
        assert get("high_level:Communicating") == 0.25
        assert get("high_level:Unknown") == 0.25
        assert get("high_level:Viewing") == 0.0

        assert get("advanced:Font:count") == 1.0
        assert get("advanced:Font:present") == 1.0
        assert get("advanced:Commenting:count") == 1.0
        assert get("advanced:Commenting:present") == 1.0
        assert get("advanced:Tables:count") == 0.0
        assert get("advanced:Tables:present") == 0.0

        assert get("collaborator_count") == 2.0
        # shares (2/3, 1/3): normalized entropy = H(1/3)/log(2)
        expected_cbs = (-(2 / 3) * math.log(2 / 3) - (1 / 3) * math.log(1 / 3)) / math.log(2)
        assert get("cbs") == pytest.approx(expected_cbs, abs=1e-12)
        assert get("cbs_missing") == 0.0
        for key in ("rbs_adding", "rbs_editing", "rbs_communicating", "rbs_finalizing"):
            assert get(key) == 0.0
            assert get(f"{key}_missing") == 1.0

        assert get("content_words") == 10.0
        assert get("content_pages") == 1.0
        assert get("content_lines") == 3.0
        assert get("content_missing") == 0.0

        assert get("time_elapsed_ms") == 650.0
        assert get("time_elapsed_bucket") == 0.0

    def test_causality_cutoff(self, featurizer):
        tl = hand_doc()
        before = featurizer.featurize(tl, 0.599)  # cutoff 599, excludes ts=600
        at = featurizer.featurize(tl, 0.6)        # cutoff 600, includes it
        assert not np.array_equal(before, at)
        get = lambda v, name: v[featurizer.layout.names.index(name)]
        assert get(before, "cmd:(unmapped)") == 0.0
        assert get(at, "cmd:(unmapped)") == 0.25

    def test_no_content_snapshot_flagged(self, featurizer):
        tl = hand_doc()
        vec = featurizer.featurize(tl, 0.1)  # cutoff 100, first snapshot at 150
        get = lambda name: vec[featurizer.layout.names.index(name)]
        assert get("content_missing") == 1.0
        assert get("content_words") == 0.0

    def test_viewing_only_history_flags_missing_balance(self, featurizer, taxonomy):
        tl = timeline_of(ev("d", "a", 0, "Find"), ev("d", "a", 1000, "Find"))
        vec = featurizer.featurize(tl, 0.5)
        start, stop = featurizer.layout.classes["commands"]
        assert vec[start:stop].sum() == pytest.approx(1.0)
        get = lambda name: vec[featurizer.layout.names.index(name)]
        assert get("cbs") == 0.0 and get("cbs_missing") == 1.0  # no content events

    def test_normalized_classes_sum_to_one_or_zero(self, featurizer):
        tl = hand_doc()
        for t in (0.0, 0.2, 0.5, 0.77, 1.0):
            vec = featurizer.featurize(tl, t)
            for cls in ("commands", "command_categories", "high_level_categories"):
                start, stop = featurizer.layout.classes[cls]
                total = vec[start:stop].sum()
                assert total == pytest.approx(1.0, abs=1e-9) or total == 0.0

    def test_monotone_accumulation(self, featurizer):
        tl = hand_doc()
        count_features = [i for i, name in enumerate(featurizer.layout.names)
                          if name.endswith(":count")
                          or name in ("collaborator_count", "time_elapsed_ms")]
        previous = None
        for t in (0.0, 0.25, 0.5, 0.75, 1.0):
            vec = featurizer.featurize(tl, t)[count_features]
            if previous is not None:
                assert (vec >= previous).all()
            previous = vec

    def test_bounds_checked(self, featurizer):
        with pytest.raises(ValueError):
            featurizer.featurize(hand_doc(), 1.5)
        with pytest.raises(ValueError):
            featurizer.featurize(timeline_of(ev("d", "a", 3)), 0.5)

    def test_elapsed_bucket_codes(self, featurizer):
        day = 24 * 3_600_000
        tl = timeline_of(ev("d", "a", 0), ev("d", "a", 40 * day))
        get = lambda v: v[featurizer.layout.names.index("time_elapsed_bucket")]
        assert get(featurizer.featurize(tl, 0.01)) == 0.0    # hours
        assert get(featurizer.featurize(tl, 0.05)) == 1.0    # 2 days
        assert get(featurizer.featurize(tl, 0.25)) == 2.0    # 10 days
        assert get(featurizer.featurize(tl, 1.0)) == 3.0     # 40 days


def small_corpus(n_docs=10):
    records = []
    for d in range(n_docs):
        doc = f"doc{d:02d}"
        records += [ev(doc, "a", 0, "Typing"), ev(doc, "b", 500, "Bold"),
                    ev(doc, "a", 1000 + d, "Save")]
    return build_timelines(records)


class TestBuildDataset:
    def test_split_by_document(self, featurizer):
        train, test = build_dataset(small_corpus(10), featurizer, k_per_doc=3,
                                    rng_seed=1, split_ratio=0.8)
        assert len(set(train.doc_ids)) == 8
        assert len(set(test.doc_ids)) == 2
        assert len(train) == 24 and len(test) == 6
        assert set(train.doc_ids).isdisjoint(test.doc_ids)

    def test_deterministic(self, featurizer):
        a = build_dataset(small_corpus(), featurizer, k_per_doc=2, rng_seed=9,
                          split_ratio=0.7)
        b = build_dataset(small_corpus(), featurizer, k_per_doc=2, rng_seed=9,
                          split_ratio=0.7)
        assert np.array_equal(a[0].X, b[0].X)
        assert np.array_equal(a[1].X, b[1].X)
        assert a[0].doc_ids == b[0].doc_ids

    def test_no_leakage_across_random_corpora(self, featurizer):
        rng = np.random.default_rng(5)
        for trial in range(10):
            n = int(rng.integers(2, 20))
            train, test = build_dataset(small_corpus(n), featurizer, k_per_doc=1,
                                        rng_seed=int(rng.integers(1000)),
                                        split_ratio=float(rng.uniform(0.2, 0.8)))
            assert set(train.doc_ids).isdisjoint(test.doc_ids)
            assert len(set(train.doc_ids)) + len(set(test.doc_ids)) == n

    def test_labels_match_positions(self, featurizer):
        train, test = build_dataset(small_corpus(4), featurizer, k_per_doc=5,
                                    rng_seed=3, split_ratio=0.5)
        for ds in (train, test):
            expected = [quartile_of(t) for t in ds.t_rel]
            assert ds.y.tolist() == expected

    def test_too_small_corpus(self, featurizer):
        with pytest.raises(ValueError):
            build_dataset(small_corpus(1), featurizer, k_per_doc=1, rng_seed=0,
                          split_ratio=0.5)

    def test_label_balance_chi_square(self, featurizer):
        from scipy import stats
        corpus = small_corpus(100)
        train, test = build_dataset(corpus, featurizer, k_per_doc=100, rng_seed=13,
                                    split_ratio=0.5)
        labels = np.concatenate([train.y, test.y])
        counts = np.bincount(labels, minlength=5)[1:]
        assert counts.sum() == 10_000
        assert stats.chisquare(counts).pvalue > 0.01

    def test_csv_and_sidecar_round_trip(self, featurizer):
        train, _ = build_dataset(small_corpus(4), featurizer, k_per_doc=2,
                                 rng_seed=3, split_ratio=0.5)
        buf = io.StringIO()
        write_dataset_csv(train, buf)
        buf.seek(0)
        X, y, names = read_dataset_csv(buf)
        assert names == train.layout.names
        assert np.array_equal(X, train.X)  # repr round-trip is exact
        assert np.array_equal(y, train.y)

        side = io.StringIO()
        write_layout_sidecar(train, side)
        side.seek(0)
        doc = read_layout_sidecar(side)
        assert doc["layout_tag"] == train.layout.tag
        assert doc["feature_names"] == list(train.layout.names)
        assert doc["label_boundaries"] == list(DEFAULT_BOUNDARIES)
        assert doc["labels"] == ["Q1", "Q2", "Q3", "Q4"]
