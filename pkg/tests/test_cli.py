import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from gaugecalc.cli import main

SQUARE = json.dumps({"kind": "poly", "coeffs": [0, 0, 1], "domain": [0, 1]})
HALF_SQUARE = json.dumps({"kind": "poly", "coeffs": [0, 0, 0.5], "domain": [0, 1]})
IDENTITY = json.dumps({"kind": "poly", "coeffs": [0, 1], "domain": [0, 1]})


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_derivate_square(capsys):
    code, out, _ = run(capsys, "derivate", "--spec", SQUARE, "--points", "0.5", "--r", "2")
    assert code == 0
    data = json.loads(out)
    (row,) = data["results"]
    assert row["derivative"]["value"] == pytest.approx(1.0, abs=1e-6)
    assert row["derivative"]["verdict"] == "converges"


def test_derivate_counterexample(capsys):
    code, out, _ = run(capsys, "derivate", "--spec", "counterexample", "--points", "0",
                       "--r", "1", "--count", "12")
    data = json.loads(out)
    (row,) = data["results"]
    assert row["derivative"]["verdict"] == "diverges"
    assert row["derivates"]["upperRight"]["value"] == "inf"
    assert code == 0


def test_malformed_json(capsys):
    code, _, err = run(capsys, "derivate", "--spec", "{oops", "--points", "0.5")
    assert code == 2 and "error" in err


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": SQUARE, "points": [0.5], "colour": "red"}))
    code, _, err = run(capsys, "derivate", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": "0..2", "format": "json"}))
    code, out, _ = run(capsys, "counterexample", "build", "--config", str(cfg), "--n", "1")
    assert code == 0
    assert [r["n"] for r in json.loads(out)["rows"]] == [1]


def test_build_table(capsys):
    code, out, _ = run(capsys, "counterexample", "build", "--n", "0..5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 6
    assert rows[1]["r_n"] == "5/12"
    assert rows[0]["u_n"] == "1/6"
    assert all(r["2^n*r_n"] == r["1/2+1/(n+2)"] for r in rows)


def test_build_deep_level_is_exact(capsys):
    code, out, _ = run(capsys, "counterexample", "build", "--n", "40")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert row["r_n"] == str(Fraction(44, 2**41 * 42)) == "11/23089744183296"
    assert row["2^n*r_n"] == row["1/2+1/(n+2)"] == "11/21"


def test_verify(capsys):
    code, out, _ = run(capsys, "counterexample", "verify", "--n", "1..10", "--r", "1,2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 20
    assert all(r["pass"] == "true" for r in rows)


def test_verify_beyond_depth_cap(capsys):
    code, _, _ = run(capsys, "counterexample", "verify", "--n", "1..12", "--depth-cap", "10")
    assert code == 2


def test_partition_round_trip(capsys, tmp_path):
    code, out, _ = run(capsys, "partition", "cousin", "--gauge", "0.3", "--domain", "0,1")
    assert code == 0
    items = json.loads(out)
    assert len(items) == 2
    path = tmp_path / "p.json"
    path.write_text(out)
    code, out, _ = run(capsys, "partition", "check", "--partition", str(path), "--gauge", "0.3",
                       "--domain", "0,1", "--spec", HALF_SQUARE, "--f-spec", IDENTITY)
    data = json.loads(out)
    assert code == 0
    assert data["nonoverlap"] and data["tiles"] and all(data["fine"].values())
    # oracle: each term is at most (d - c)^2 / 2, so the sum is at most mesh * (b - a) / 2
    assert data["riemann_lr_sum"] < 0.1


def test_partition_single_item(capsys):
    code, out, _ = run(capsys, "partition", "cousin", "--gauge", "2", "--domain", "0,1")
    assert code == 0 and json.loads(out) == [{"hi": 1, "lo": 0, "tag": 0.5}]


def test_partition_overlap(capsys):
    bad = json.dumps([{"lo": 0, "hi": 0.6, "tag": 0.3}, {"lo": 0.5, "hi": 1, "tag": 0.75}])
    code, out, _ = run(capsys, "partition", "check", "--partition", bad)
    assert code == 1 and json.loads(out)["nonoverlap"] is False


def test_partition_resource_error(capsys):
    code, _, err = run(capsys, "partition", "cousin", "--gauge", "1e-9", "--depth-cap", "5")
    assert code == 1 and "gauge too small" in err


def test_ac_check_perfect_set(capsys):
    code, out, _ = run(capsys, "ac-check", "--spec", "counterexample", "--points", "perfect:8",
                       "--epsilon", "1e-9")
    data = json.loads(out)
    assert code == 0 and data["verdict"] == "certificate"
    assert data["numericSummary"]["allSumsZero"] is True


def test_acr_check_identity(capsys):
    code, out, _ = run(capsys, "acr-check", "--spec", IDENTITY, "--points", "0,0.25,0.5,0.75,1",
                       "--epsilon", "0.01", "--eta", "0.01")
    assert code == 0 and json.loads(out)["verdict"] == "certificate"


def test_hkr_check_positive(capsys):
    code, out, _ = run(capsys, "hkr-check", "--spec", HALF_SQUARE, "--f-spec", IDENTITY,
                       "--epsilon", "1e-3", "--gauge", "1e-3", "--trials", "1")
    data = json.loads(out)
    assert code == 0 and data["numericSummary"]["maxSampledSum"] < 1e-3


def test_output_file_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(capsys, "acr-check", "--spec", SQUARE, "--points", "0.1,0.4,0.8",
                         "--epsilon", "0.01", "--eta", "0.05", "--seed", "4", "--out", str(path))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors(capsys):
    assert run(capsys, "derivate", "--spec", SQUARE)[0] == 2
    assert run(capsys, "ac-check", "--spec", SQUARE, "--points", "perfect:3")[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["nope"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gaugecalc", "counterexample", "build",
                           "--n", "1"], capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[1].startswith("1,5/12,")
