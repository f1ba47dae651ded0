import csv
import json
import pathlib
import subprocess
import sys

import pytest

from imr.cli import main

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*map(str, args), "--out", str(out)])
    return code, out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_enumerate_deterministic(tmp_path):
    code, out = run(tmp_path, "enumerate", "--model", MODELS / "deterministic.json")
    assert code == 0
    assert len(rows(out / "paths.csv")) == 1
    assert json.loads((out / "manifest.json").read_text())["command"] == "enumerate"
    assert (out / "states.csv").exists()


def test_enumerate_bernoulli(tmp_path):
    code, out = run(tmp_path, "enumerate", "--model", MODELS / "bernoulli.json")
    probs = [float(r["probability"]) for r in rows(out / "paths.csv")]
    assert code == 0 and sorted(probs) == [0.5, 0.5]


@pytest.mark.parametrize("name", ["random", "two_mark_deletion", "monotone"])
def test_enumerate_probabilities_sum_to_one(tmp_path, name):
    code, out = run(tmp_path, "enumerate", "--model", MODELS / f"{name}.json")
    assert code == 0
    assert abs(sum(float(r["probability"]) for r in rows(out / "paths.csv")) - 1.0) <= 1e-12


def test_verify_constant(tmp_path):
    code, out = run(tmp_path, "verify", "--model", MODELS / "bernoulli.json", "--target", "xi:constant")
    assert code == 0
    assert all(float(r["residual"]) == 0.0 for r in rows(out / "representation_report.csv"))


def test_verify_monotone_has_zero_ib_column(tmp_path):
    for target in ("first", "timing"):
        code, out = run(tmp_path, "verify", "--model", MODELS / "monotone.json", "--target", target, name=target)
        assert code == 0
        assert all(float(r["ib_integral"]) == 0.0 for r in rows(out / "representation_report.csv"))


@pytest.mark.parametrize("target, side", [("mixed", "IB"), ("rate", "IB"), ("rate", "IF")])
def test_verify_random_model(tmp_path, target, side):
    code, out = run(tmp_path, "verify", "--model", MODELS / "random.json", "--target", target,
                    "--drift-side", side)
    assert code == 0
    assert max(abs(float(r["residual"])) for r in rows(out / "representation_report.csv")) < 1e-10


def test_verify_process_and_sojourn(tmp_path):
    for target in ("process:tracked", "sojourn"):
        code, _ = run(tmp_path, "verify", "--model", MODELS / "two_mark_deletion.json", "--target", target,
                      name=target.replace(":", "_"))
        assert code == 0


def test_verify_unknown_target_and_breach(tmp_path, capsys):
    code, _ = run(tmp_path, "verify", "--model", MODELS / "bernoulli.json", "--target", "nope")
    assert code == 2 and "unknown target" in capsys.readouterr().err
    code, out = run(tmp_path, "verify", "--model", MODELS / "random.json", "--target", "mixed", "--tol", "-1",
                    name="breach")
    assert code == 1 and "RESIDUAL BREACH" in (out / "summary.txt").read_text()


def test_input_errors(tmp_path, capsys):
    code, _ = run(tmp_path, "enumerate", "--model", tmp_path / "missing.json")
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    code, _ = run(tmp_path, "enumerate", "--model", bad)
    assert code == 2 and "line 1" in capsys.readouterr().err


def test_simulate_reruns_identical(tmp_path):
    args = ("simulate", "--model", MODELS / "two_mark_deletion.json", "--seed", "5", "--n-paths", "20000",
            "--target", "first_mark")
    c1, a = run(tmp_path, *args, name="a")
    c2, b = run(tmp_path, *args, name="b")
    assert c1 == c2 == 0
    for f in ("estimates.csv", "diagnostics.csv", "summary.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_simulate_against_exact(tmp_path):
    code, out = run(tmp_path, "simulate", "--model", MODELS / "random.json", "--seed", "1", "--n-paths",
                    "100000", "--target", "mixed", "--exact")
    assert code == 0
    assert "within 5 standard errors" in (out / "summary.txt").read_text()


def test_simulate_flags_empty_cells(tmp_path):
    code, out = run(tmp_path, "simulate", "--model", MODELS / "random.json", "--n-paths", "3", "--exact",
                    "--levels", "2")
    statuses = {r["status"] for r in rows(out / "estimates.csv")}
    assert "absent" in statuses and "visited" in statuses


def _doc(tmp_path, name, doc):
    f = tmp_path / f"{name}.json"
    f.write_text(json.dumps(doc))
    return f


def test_app_thiele_zero_benefits(tmp_path):
    f = _doc(tmp_path, "t", {
        "builder": {"name": "thiele_model", "params": {"grid": [0, 1, 2, 3]}},
        "applications": {"thiele": {"contract": {"a": 0, "b": 0, "phi": 0.02}}},
    })
    code, out = run(tmp_path, "app", "--model", f, "--app", "thiele")
    assert code == 0
    assert all(float(r["reserve"]) == 0.0 for r in rows(out / "thiele_reserve.csv"))


def test_app_thiele_shipped(tmp_path):
    code, out = run(tmp_path, "app", "--model", MODELS / "thiele.json", "--app", "thiele")
    assert code == 0 and "status: ok" in (out / "summary.txt").read_text()


def test_app_markov_zero_gap(tmp_path):
    code, out = run(tmp_path, "app", "--model", MODELS / "markov.json", "--app", "markov")
    assert code == 0
    assert all(abs(float(r["gap"])) <= 1e-12 for r in rows(out / "markov_gap.csv"))
    code, out = run(tmp_path, "app", "--model", MODELS / "markov_duration.json", "--app", "markov", name="dur")
    assert code == 0
    assert max(abs(float(r["gap"])) for r in rows(out / "markov_gap.csv")) > 1e-3


def test_app_location_long_retention(tmp_path):
    f = _doc(tmp_path, "loc", {
        "builder": {"name": "location_model", "params": {"n_steps": 5, "delta": 5}},
        "applications": {"location": {"h": 1, "A": ["R"]}},
    })
    code, out = run(tmp_path, "app", "--model", f, "--app", "location")
    assert code == 0
    assert all(float(r["ib_integral"]) == 0.0 for r in rows(out / "location_predictor.csv"))


def test_app_location_sweep(tmp_path):
    code, out = run(tmp_path, "app", "--model", MODELS / "location.json", "--app", "location")
    assert code == 0
    sweep = rows(out / "location_sweep.csv")
    assert [int(r["delta"]) for r in sweep] == [1, 2, 3, 7]
    assert float(sweep[-1]["ib_magnitude"]) == 0.0


def test_app_missing_section(tmp_path):
    code, _ = run(tmp_path, "app", "--model", MODELS / "bernoulli.json", "--app", "thiele")
    assert code == 2


def test_console_script(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "imr.cli", "enumerate", "--model",
                           str(MODELS / "bernoulli.json"), "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and "paths: 2" in proc.stdout


def test_outputs_are_plain_numbers(tmp_path):
    runs = [("verify", "--model", MODELS / "random.json", "--target", "mixed"),
            ("simulate", "--model", MODELS / "random.json", "--n-paths", "50000", "--exact"),
            ("app", "--model", MODELS / "markov.json", "--app", "markov"),
            ("app", "--model", MODELS / "thiele.json", "--app", "thiele"),
            ("app", "--model", MODELS / "location.json", "--app", "location")]
    for j, args in enumerate(runs):
        code, out = run(tmp_path, *args, name=str(j))
        assert code == 0
        for f in out.iterdir():
            assert "np." not in f.read_text(), f.name
