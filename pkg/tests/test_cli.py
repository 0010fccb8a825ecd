import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from synthetic import mean_shift_dataset
from tschar.cli import run
from tschar.core import LabeledDataset, TimeSeries, save_dataset


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    train = mean_shift_dataset(seed=0, per_class=6, n=32)
    test = mean_shift_dataset(seed=1, per_class=3, n=32)
    save_dataset(train, root / "train.csv")
    save_dataset(test, root / "test.csv")
    return root


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _tree(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


COMMAND_LINES = {
    "featurize": ["featurize"],
    "distances": ["distances", "--kind", "dtw", "--window", "4"],
    "shapelet": ["shapelet", "--k", "2", "--l-min", "6", "--l-max", "8", "--stride", "2"],
    "tsf": ["tsf", "--n-trees", "10", "--test", "{test}"],
    "bop": ["bop", "--w", "8", "--l", "4", "--a", "3"],
    "classify": ["classify", "--method", "forest", "--n-trees", "10", "--folds", "3", "--test", "{test}"],
    "rank": ["rank", "--max-features", "2", "--folds", "3"],
    "forecast": ["forecast", "--horizon", "3"],
}

OUTPUTS = {
    "featurize": ["features.csv"],
    "distances": ["distances.csv"],
    "shapelet": ["shapelets.json", "transform.csv"],
    "tsf": ["importance.csv", "tsf.json", "predictions.csv"],
    "bop": ["bop_distances.csv", "histograms/0000_0_0.csv"],
    "classify": ["classify.json"],
    "rank": ["rank.json"],
    "forecast": ["forecast.csv"],
}


def _argv(name, data, out):
    tail = [a.replace("{test}", str(data / "test.csv")) for a in COMMAND_LINES[name][1:]]
    return [name, "--in", str(data / "train.csv"), "--out", str(out), *tail]


@pytest.mark.parametrize("name", sorted(COMMAND_LINES))
def test_command_runs_and_replays_identically(name, data, tmp_path):
    before = _digest(data / "train.csv")
    out = tmp_path / "run"
    assert run(_argv(name, data, out)) == 0
    for rel in OUTPUTS[name] + ["manifest.json"]:
        assert (out / rel).is_file(), rel
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == name and manifest["seed"] == 0
    assert manifest["inputs"]["input"]["sha256"] == before
    again = tmp_path / "replay"
    assert run(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert _tree(out) == _tree(again)
    assert _digest(data / "train.csv") == before


def test_featurize_has_one_column_per_feature(data, tmp_path):
    assert run(["featurize", "--in", str(data / "train.csv"), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "features.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows[0]) == 23 and rows[0][0] == "id"
    assert len(rows) == 13


def test_forecast_of_constant_series(tmp_path):
    ds = LabeledDataset((TimeSeries(np.full(20, 4.25), id="c"),), ("x",))
    save_dataset(ds, tmp_path / "c.csv")
    assert run(["forecast", "--in", str(tmp_path / "c.csv"), "--horizon", "5", "--out", str(tmp_path / "o")]) == 0
    line = (tmp_path / "o" / "forecast.csv").read_text().splitlines()[1].split(",")
    assert line[0] == "c" and line[2:] == ["4.25"] * 5


def test_unknown_command_exits_2(capsys):
    assert run(["frobnicate", "--in", "x"]) == 2
    err = capsys.readouterr().err
    assert "frobnicate" in err and len(err.strip().splitlines()) == 1


def test_bad_input_reports_one_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,v1,v2\na,x,1,zz\n")
    assert run(["featurize", "--in", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: FormatError") and "\n" not in err
    assert run(["featurize", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2


def test_entry_point_as_module(data, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "tschar", "forecast", "--in", str(data / "train.csv"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "forecast.csv").is_file()
