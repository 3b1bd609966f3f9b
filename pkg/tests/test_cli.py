import csv
import json
import shutil
import subprocess
from fractions import Fraction
from itertools import product
from pathlib import Path

import jsonschema
import pytest

from wwcascade.cli import load_schema, main, parse_int_list, parse_lambda
from wwcascade.dispersion import Vorticity
from wwcascade.resonance import Classification, classify_tuple

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def validate(name, doc):
    jsonschema.validate(doc, load_schema(name))


def test_parsers():
    assert parse_int_list("1,3,5") == [1, 3, 5]
    assert parse_int_list("1:9") == [1, 3, 5, 7, 9]
    assert parse_int_list("") == []
    assert parse_lambda("-2,3") == (-2, 3)


def test_certify_commands(capsys):
    code, doc = run(capsys, "certify", "--m", "-2", "--n", "3")
    assert code == 0 and doc["pass"] and doc["gamma_sq"] == "1/10"
    validate("certify", doc)
    code, doc = run(capsys, "certify", "--m", "-2", "--n", "4")
    assert code == 2 and not doc["G4"]["pass"]
    validate("certify", doc)
    code, doc = run(capsys, "certify", "--m", "-1", "--n", "3")
    assert code == 2 and not doc["G3"]["pass"]
    code, doc = run(capsys, "certify", "--m", "-2", "--n", "3", "--gamma-sq", "1/10")
    assert code == 0


def test_good_sets_commands(capsys):
    code, doc = run(capsys, "good-sets", "--p", "1", "--q", "10", "--a", "1")
    assert code == 0
    assert [(g["m"], g["n"]) for g in doc["accepted"]] == [(-2, 3)]
    validate("good-sets", doc)
    code, doc = run(capsys, "good-sets", "--p", "3", "--q", "4", "--a", "3,5,7")
    assert code == 0 and len(doc["accepted"]) == 3
    validate("good-sets", doc)
    code, doc = run(capsys, "good-sets", "--p", "3", "--q", "4")
    assert code == 0 and doc["accepted"] == [] and doc["skipped"] == []
    code, doc = run(capsys, "good-sets", "--p", "5", "--q", "3", "--a", "1,3")
    assert code == 2 and [s["a"] for s in doc["skipped"]] == [1]
    validate("good-sets", doc)


def test_bad_input_exit_codes(capsys):
    assert main(["good-sets", "--p", "2", "--q", "4", "--a", "1"]) == 2
    assert main(["good-sets", "--p", "1", "--q", "10", "--a", "2"]) == 2
    assert main(["coeffs", "--lambda", "-2,4"]) == 2
    assert main(["build-data", "--lambda", "-2,3", "--eps", "-1"]) == 2
    assert main(["certify", "--m", "2", "--n", "3"]) == 2
    capsys.readouterr()


def test_resonances_and_three_wave(capsys):
    code, doc = run(capsys, "resonances", "--lambda", "-2,3", "--layer", "1", "--J", "50")
    assert code == 0 and doc["resonances"] == []
    validate("resonances", doc)
    code, doc = run(capsys, "resonances", "--lambda", "-2,3", "--layer", "2", "--J", "20")
    assert code == 0 and doc["gap_bound"] > 0
    validate("resonances", doc)
    code, doc = run(capsys, "three-wave", "--gamma-sq", "1/10", "--J", "30")
    assert code == 0 and doc["min"] >= doc["c3"]
    validate("three-wave", doc)


def test_tiny_scan_matches_brute_force(capsys):
    code, doc = run(capsys, "resonances", "--lambda", "-2,3", "--layer", "0", "--J", "3")
    v = Vorticity(Fraction(1, 10))
    expected = set()
    for idx in product((-2, 3), repeat=4):
        for sg in product((1, -1), repeat=4):
            if sum(j * s for j, s in zip(idx, sg)) == 0:
                if classify_tuple(idx, sg, v).classification is Classification.INTEGRABLE:
                    expected.add(tuple(sorted(zip(idx, sg))))
    got = {tuple(sorted(zip(r["indices"], r["signs"]))) for r in doc["resonances"]}
    assert got == expected


def test_coeffs_command(capsys):
    code, doc = run(capsys, "coeffs", "--lambda", "-2,3")
    assert code == 0
    assert (doc["a"], doc["b"], doc["c"]) == ("758/225", "-39689/1650", "18387/1100")
    assert all(c["pass"] for c in doc["checks"].values())
    assert doc["checks"]["abc_oracle"]["residual"] < 1e-20
    validate("coeffs", doc)


def test_build_data_and_mourre(capsys):
    code, doc = run(capsys, "build-data", "--lambda", "-2,3")
    assert code == 0 and doc["balance"] == "0/1"
    validate("build-data", doc)
    code, doc = run(capsys, "mourre-check", "--lambda", "-2,3", "--K", "256", "--R", "64", "--s", "8", "--eps", "0.05")
    assert code == 0 and doc["pass"]
    assert doc["window"] == [128.0, 251]
    validate("mourre-check", doc)


def test_simulate_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code, doc = run(capsys, "--out-dir", str(out), "simulate", "--config", str(CONFIGS / "base.toml"),
                    "--K", "96", "--R", "24", "--s", "4", "--T-end", "500", "--svg")
    assert code == 0
    validate("simulate", doc)
    with open(out / "timeseries.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "A", "norm_s", "norm_s0", "norm_L2", "abs_zm", "abs_zn"]
    assert len(rows) == 62
    svg = (out / "growth.svg").read_text()
    assert svg.startswith("<svg") and "<script" not in svg
    manifest = json.loads((out / "manifest.json").read_text())
    validate("manifest", manifest)
    for path in manifest["outputs"]:
        assert Path(path).exists()
    assert str(CONFIGS / "base.toml") in manifest["input_hashes"]
    assert manifest["config"]["K"] == 96


def test_simulate_json_config_and_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": [-2, 3], "K": 64, "R": 16, "s": 3, "T_end": 100}))
    code, _ = run(capsys, "--out-dir", str(tmp_path / "o"), "simulate", "--config", str(cfg))
    assert code == 0
    cfg.write_text(json.dumps({"lambda": [-2, 3], "nonsense": 1}))
    code, _ = run(capsys, "--out-dir", str(tmp_path / "o"), "simulate", "--config", str(cfg))
    assert code == 2


def test_determinism(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        run(capsys, "--out-dir", str(d), "simulate", "--lambda", "-2,3", "--K", "64", "--R", "16", "--s", "3",
            "--T-end", "200", "--seed", "5", "--w-strength", "1", "--Y-strength", "1")
        outs.append(((d / "timeseries.csv").read_bytes(), (d / "simulate.json").read_bytes()))
    assert outs[0] == outs[1]
    _, first = run(capsys, "coeffs", "--lambda", "-2,3")
    _, second = run(capsys, "coeffs", "--lambda", "-2,3")
    assert first == second


@pytest.mark.skipif(shutil.which("wwcascade") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["wwcascade", "certify", "--m", "-2", "--n", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"] is True
