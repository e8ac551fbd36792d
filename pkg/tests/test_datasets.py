import numpy as np
import pytest

from perfdrift.datasets import DatasetError, class_balance, load_csv, normalize


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


BASIC = """a,b,cat,label
-2,0,x,yes
0,5,y,no
2,10,x,yes
"""


def test_load_basic(tmp_path):
    ds = load_csv(write_csv(tmp_path, BASIC), "label", "yes")
    assert len(ds) == 3
    assert ds.columns == ["a", "b", "cat"]
    assert ds.kinds == ["numeric", "numeric", "categorical"]
    assert ds.labels.tolist() == [1, 0, 1]


def test_load_missing_label_column(tmp_path):
    with pytest.raises(DatasetError):
        load_csv(write_csv(tmp_path, BASIC), "nope", "yes")


def test_load_non_binary_labels(tmp_path):
    text = "a,label\n1,x\n2,y\n3,z\n"
    with pytest.raises(DatasetError):
        load_csv(write_csv(tmp_path, text), "label", "x")


def test_load_empty_file(tmp_path):
    with pytest.raises(DatasetError):
        load_csv(write_csv(tmp_path, ""), "label", "1")
    with pytest.raises(DatasetError):
        load_csv(write_csv(tmp_path, "a,label\n"), "label", "1")


def test_load_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        load_csv(tmp_path / "absent.csv", "label", "1")


def test_load_positive_value_must_exist(tmp_path):
    with pytest.raises(DatasetError):
        load_csv(write_csv(tmp_path, BASIC), "label", "maybe")


def test_normalize_ranges(tmp_path):
    ds = load_csv(write_csv(tmp_path, BASIC), "label", "yes")
    norm = normalize(ds)
    assert norm.feature_names == ["a", "b"]
    # column a has negatives -> [-1, 1]; column b non-negative -> [0, 1]
    assert norm.features[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert norm.features[:, 1].tolist() == [0.0, 0.5, 1.0]
    reports = {c.name: c for c in norm.report.columns}
    assert reports["cat"].dropped
    assert reports["a"].target == (-1.0, 1.0)
    assert reports["b"].target == (0.0, 1.0)


def test_normalize_constant_column(tmp_path):
    text = "a,label\n7,1\n7,0\n7,1\n"
    norm = normalize(load_csv(write_csv(tmp_path, text), "label", "1"))
    assert np.all(norm.features == 0.5)


def test_normalize_drops_gappy_rows(tmp_path):
    text = "a,b,label\n1,2,1\n,3,0\n5,6,1\n"
    norm = normalize(load_csv(write_csv(tmp_path, text), "label", "1"))
    assert len(norm.features) == 2
    assert norm.report.dropped_rows == 1
    assert norm.labels.tolist() == [1, 1]


def test_normalize_requires_numeric_column(tmp_path):
    text = "cat,label\nx,1\ny,0\n"
    with pytest.raises(DatasetError):
        normalize(load_csv(write_csv(tmp_path, text), "label", "1"))


def test_normalize_outputs_in_declared_ranges(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["f0,f1,f2,label"]
    for i in range(200):
        rows.append(f"{rng.normal():.6f},{rng.uniform(3, 9):.6f},{rng.normal(5, 2):.6f},{i % 2}")
    norm = normalize(load_csv(write_csv(tmp_path, "\n".join(rows) + "\n"), "label", "1"))
    for j, r in enumerate(norm.schema.ranges):
        col = norm.features[:, j]
        assert col.min() >= r.low and col.max() <= r.high


def test_normalize_idempotent(tmp_path):
    rng = np.random.default_rng(1)
    rows = ["f0,f1,label"] + [
        f"{rng.normal():.6f},{rng.uniform(0, 4):.6f},{i % 2}" for i in range(100)
    ]
    norm = normalize(load_csv(write_csv(tmp_path, "\n".join(rows) + "\n"), "label", "1"))
    # write the normalized values back out and normalize again
    text = "f0,f1,label\n" + "\n".join(
        f"{float(a)!r},{float(b)!r},{int(l)}" for (a, b), l in zip(norm.features, norm.labels)
    ) + "\n"
    norm2 = normalize(load_csv(write_csv(tmp_path, text, "again.csv"), "label", "1"))
    assert np.allclose(norm.features, norm2.features, atol=1e-12)


def test_normalize_preserves_rows_and_labels(tmp_path):
    ds = load_csv(write_csv(tmp_path, BASIC), "label", "yes")
    norm = normalize(ds)
    assert len(norm.features) == len(ds)
    assert sorted(norm.labels.tolist()) == sorted(ds.labels.tolist())


def test_instances_view(tmp_path):
    norm = normalize(load_csv(write_csv(tmp_path, BASIC), "label", "yes"))
    inst = norm.instances()
    assert len(inst) == 3
    assert inst[0].label == 1
    assert norm.schema.contains(np.array(inst[0].features))


def test_class_balance():
    assert class_balance([0, 1, 0, 1]) == {0: 0.5, 1: 0.5}
    assert class_balance([0, 0, 0, 1])[1] == pytest.approx(0.25)
    single = class_balance([1, 1])
    assert single == {0: 0.0, 1: 1.0}
    with pytest.raises(DatasetError):
        class_balance([])


def test_class_balance_heavy_imbalance():
    labels = np.zeros(10_000, dtype=np.int8)
    labels[:17] = 1
    assert class_balance(labels)[1] == pytest.approx(0.0017)
