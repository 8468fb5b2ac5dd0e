import io

import numpy as np
import pytest

from docstage.features import Dataset, FeatureLayout
from docstage.predictor import (DEFAULT_HYPERPARAMS, LayoutMismatchError,
                                feature_importance, load_model, save_model,
                                train_baseline, train_model)


def toy_layout(n_extra=3):
    names = [f"f{i}" for i in range(n_extra)] + ["time_elapsed_ms", "time_elapsed_bucket"]
    return FeatureLayout(
        names=tuple(names),
        classes={"stuff": (0, n_extra), "lifetime": (n_extra, n_extra + 2)},
        tag="v1-test",
    )


def toy_dataset(n=240, seed=0, informative=True):
    rng = np.random.default_rng(seed)
    layout = toy_layout()
    X = rng.normal(size=(n, layout.size))
    if informative:
        y = 1 + (X[:, 0] > 0).astype(int) + 2 * (X[:, 1] > 0).astype(int)
    else:
        y = rng.integers(1, 5, size=n)
    return Dataset(X=X, y=y, t_rel=np.zeros(n), doc_ids=("d",) * n,
                   layout=layout, boundaries=(0.0, 0.25, 0.5, 0.75, 1.0))


class TestTraining:
    def test_full_model_uses_all_columns(self):
        model = train_model(toy_dataset(), {"tree_count": 10, "min_leaf": 10})
        assert model.feature_names == toy_layout().names
        assert model.layout_tag == "v1-test"

    def test_baseline_uses_exactly_lifetime_features(self):
        baseline = train_baseline(toy_dataset(), {"tree_count": 5})
        assert baseline.feature_names == ("time_elapsed_ms", "time_elapsed_bucket")
        assert len(baseline.columns) == 2

    def test_unknown_hyperparameter_rejected(self):
        with pytest.raises(ValueError, match="bogus"):
            train_model(toy_dataset(), {"bogus": 1})

    def test_default_hyperparams(self):
        assert DEFAULT_HYPERPARAMS["tree_count"] == 100
        assert DEFAULT_HYPERPARAMS["max_depth"] == 4
        assert DEFAULT_HYPERPARAMS["learning_rate"] == 0.1
        assert DEFAULT_HYPERPARAMS["min_leaf"] == 20

    def test_layout_tag_enforced_at_predict(self):
        model = train_model(toy_dataset(), {"tree_count": 3})
        with pytest.raises(LayoutMismatchError):
            model.predict(np.zeros((1, 5)), layout_tag="v1-other")
        labels, scores = model.predict(np.zeros((1, 5)), layout_tag="v1-test")
        assert labels.shape == (1,) and scores.shape == (1, 4)

    def test_prediction_tuple(self):
        model = train_model(toy_dataset(), {"tree_count": 20, "min_leaf": 10})
        labels, scores = model.predict(toy_dataset().X)
        assert scores.shape == (240, 4)
        assert np.array_equal(model.forest.classes_[np.argmax(scores, axis=1)], labels)


class TestSerialization:
    def test_round_trip_predicts_identically(self):
        model = train_model(toy_dataset(), {"tree_count": 25, "min_leaf": 10})
        buf = io.StringIO()
        save_model(model, buf)
        buf.seek(0)
        loaded = load_model(buf)
        rng = np.random.default_rng(7)
        probe = rng.normal(size=(1000, 5)) * 4
        labels_a, scores_a = model.predict(probe)
        labels_b, scores_b = loaded.predict(probe)
        assert np.array_equal(scores_a, scores_b)
        assert np.array_equal(labels_a, labels_b)
        assert loaded.layout_tag == model.layout_tag
        assert loaded.feature_names == model.feature_names

    def test_serialization_bit_identical_across_fits(self):
        def fit_and_dump():
            model = train_model(toy_dataset(), {"tree_count": 15, "min_leaf": 10,
                                                "rng_seed": 5})
            buf = io.StringIO()
            save_model(model, buf)
            return buf.getvalue()

        assert fit_and_dump() == fit_and_dump()

    def test_rejects_wrong_version(self):
        with pytest.raises(ValueError):
            load_model(io.StringIO('{"format_version": 99}'))


class TestFeatureImportance:
    def test_informative_feature_ranked_first(self):
        model = train_model(toy_dataset(), {"tree_count": 20, "min_leaf": 10})
        ranking = feature_importance(model)
        assert ranking[0][0] in ("f0", "f1")
        assert all(g > 0 for _, g in ranking)
        gains = [g for _, g in ranking]
        assert gains == sorted(gains, reverse=True)

    def test_degenerate_model_empty_ranking(self):
        ds = toy_dataset(informative=True)
        ds = Dataset(X=ds.X, y=np.full(len(ds), 2), t_rel=ds.t_rel,
                     doc_ids=ds.doc_ids, layout=ds.layout, boundaries=ds.boundaries)
        model = train_model(ds, {"tree_count": 10})
        assert feature_importance(model) == []
