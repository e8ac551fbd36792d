import csv

import pytest
import yaml

from perfdrift.cli import main


@pytest.fixture
def small_scenario(tmp_path):
    doc = {
        "name": "cli_smoke",
        "generator": {"kind": "equidistant", "per_class": 10, "spread": 0.15,
                      "feedback": {"0": "fulfilling", "1": "fulfilling"}},
        "detector": {"kind": "cbpdd", "f": 1.0, "tau": 500, "window": 50},
        "horizon": 3_000,
        "repetitions": 3,
        "base_seed": 5,
        "sigma_grid": [0.0, 0.05],
    }
    path = tmp_path / "cli_smoke.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_simulate_then_detect(tmp_path, small_scenario, capsys):
    stream = tmp_path / "stream.csv"
    assert main(["simulate", str(small_scenario), "--out", str(stream), "--sigma", "0.05"]) == 0
    rows = read_rows(stream)
    assert len(rows) == 3_000
    assert set(rows[0]) == {"t", "f0", "y", "yhat", "source"}

    report = tmp_path / "report.csv"
    assert main(["detect", "--in", str(stream), "--out", str(report),
                 "--tau", "500", "--window", "50"]) == 0
    out = read_rows(report)
    assert [r["class"] for r in out] == ["0", "1"]
    for r in out:
        assert 0.0 <= float(r["p_value"]) <= 1.0
        assert r["detected"] in ("true", "false")


def test_experiment_and_report(tmp_path, small_scenario, capsys):
    results = tmp_path / "results.csv"
    assert main(["experiment", str(small_scenario), "--out", str(results), "--jobs", "1"]) == 0
    rows = read_rows(results)
    assert len(rows) == 4  # 2 sigmas x 2 classes
    assert main(["report", "--in", str(results)]) == 0
    table = capsys.readouterr().out
    assert "cli_smoke" in table and "detection_rate" in table


def test_experiment_deterministic_across_job_counts(tmp_path, small_scenario):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["experiment", str(small_scenario), "--out", str(a), "--jobs", "1"])
    main(["experiment", str(small_scenario), "--out", str(b), "--jobs", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_impute_pipeline(tmp_path):
    data = tmp_path / "toy.csv"
    lines = ["f0,f1,label"]
    for i in range(60):
        lines.append(f"{(i % 11) / 10},{((i * 7) % 13) - 6},{i % 2}")
    data.write_text("\n".join(lines) + "\n", encoding="utf-8")
    stream = tmp_path / "imputed.csv"
    assert main(["impute", "--dataset", str(data), "--label-col", "label",
                 "--sigma", "0.01", "--loop", "fulfilling", "--out", str(stream),
                 "--instances", "2000", "--tau", "400", "--window", "40",
                 "--f", "0.5"]) == 0
    rows = read_rows(stream)
    assert len(rows) == 2_000
    assert set(rows[0]) == {"t", "f0", "f1", "y", "yhat", "source"}
    assert all(r["source"] == "cb" for r in rows[:50])


def test_simulate_scenario_name_resolution(tmp_path):
    # bundled scenario, tiny slice via --rep on the smallest-sigma cell
    stream = tmp_path / "s.csv"
    assert main(["simulate", "one_class", "--out", str(stream), "--sigma", "0.0"]) == 0
    assert len(read_rows(stream)) == 100_000
