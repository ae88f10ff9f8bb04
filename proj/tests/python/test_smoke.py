import csv
import itertools

import numpy as np
import pytest

import mlcfl

SMALL = {
    "midlevel": {"dict_k": 6, "kmeans_max_iter": 10},
    "mlpl": {"scales": [2], "n_iter": 2, "model_null_class": False},
    "synth": {"n_classes": 2, "segments_per_pattern": 2, "samples_per_segment": 160},
    "split": {"k": 2},
    "seed": 4,
}


def f1_oracle(truth, pred):
    total = 0.0
    for c in set(truth) | set(pred):
        tp = sum(t == c and p == c for t, p in zip(truth, pred))
        fp = sum(t != c and p == c for t, p in zip(truth, pred))
        fn = sum(t == c and p != c for t, p in zip(truth, pred))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        if prec + rec:
            total += 2 * (truth.count(c) / len(truth)) * prec * rec / (prec + rec)
    return total


def test_defaults_and_dimensions():
    c = mlcfl.default_config()
    assert c["framing"]["window"] == 64
    assert c["mlpl"]["scales"] == [5, 10]
    assert c["midlevel"]["dict_k"] == 300
    assert [mlcfl.embedding_dimension(m, [5, 10]) for m in (11, 6, 14)] == [187, 102, 238]
    assert isinstance(mlcfl.__version__, str)


def test_weighted_f1_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        truth = rng.integers(0, 4, n).tolist()
        pred = rng.integers(0, 5, n).tolist()
        assert abs(mlcfl.weighted_f1(truth, pred) - f1_oracle(truth, pred)) < 1e-12
    assert mlcfl.weighted_f1([1, 1, 1, 2], [1, 1, 2, 2]) == pytest.approx(23 / 30)
    assert mlcfl.accuracy([1, 1, 1, 2], [1, 1, 2, 2]) == pytest.approx(0.75)


def test_kmeans_inertia_non_increasing():
    x = np.random.default_rng(1).normal(size=(120, 3))
    r = mlcfl.kmeans(x, 5, seed=3)
    trace = r["inertia_trace"]
    assert all(b <= a + 1e-9 for a, b in itertools.pairwise(trace))
    assert r["centroids"].shape == (5, 3)
    assert len(r["assignment"]) == 120


def test_invalid_config_raises_library_error():
    with pytest.raises(mlcfl.MlcflError, match="bogus"):
        mlcfl.resolve_config({"bogus": 1})


def test_synth_train_predict_roundtrip(tmp_path):
    data = tmp_path / "data.csv"
    model = tmp_path / "model.bin"
    mlcfl.synth(data, SMALL)
    cfg = dict(SMALL, classifier={"kind": "svm"})
    summary = mlcfl.train(data, model, cfg)
    assert summary["dimension"] > 0

    m = mlcfl.Model.load(model)
    assert m.level == "mlcf"
    assert m.config["classifier"]["kind"] == "svm"
    assert mlcfl.Model.from_bytes(m.to_bytes()).to_bytes() == m.to_bytes()
    second = tmp_path / "again.bin"
    mlcfl.train(data, second, cfg)
    assert second.read_bytes() == model.read_bytes()

    pred = tmp_path / "pred.csv"
    mlcfl.predict(model, data, pred)
    with open(pred) as f:
        rows = list(csv.DictReader(f))
    assert rows
    frames = np.zeros((3, m.channels, m.window))
    assert m.transform(frames).shape[0] == 3
    labels = m.predict(frames)
    assert len(labels) == 3
    assert set(labels) <= set(range(len(m.label_names)))


def test_evaluate_reports(tmp_path):
    data = tmp_path / "data.csv"
    mlcfl.synth(data, SMALL)
    cfg = dict(SMALL, level="compl", classifier={"kind": "knn"})
    reports = mlcfl.evaluate(data, tmp_path / "eval", cfg)
    assert len(reports) == 1
    r = reports[0]
    assert (r["level"], r["classifier"]) == ("compl", "knn")
    assert 0.0 <= r["weighted_f1"] <= 1.0
    assert r["folds"] == 2
    assert (tmp_path / "eval" / "report.txt").exists()


def test_missing_file_names_path(tmp_path):
    with pytest.raises(mlcfl.MlcflError, match="absent.csv"):
        mlcfl.train(tmp_path / "absent.csv", tmp_path / "m.bin", SMALL)
    assert not (tmp_path / "m.bin").exists()
