import hashlib
import io
import json
import math
import subprocess
import sys

import pytest

from carleman_lab import cli


def run(*argv):
    out = io.StringIO()
    code = cli.run(list(argv), stdout=out)
    return code, out.getvalue()


def doc_of(text):
    return json.loads(text)


# -- JSON normalization ---------------------------------------------------------------


def test_normalize_rounds_and_stringifies():
    assert cli.normalize(1 / 3) == 0.333333333333
    assert cli.normalize([math.inf, -math.inf, math.nan]) == ["inf", "-inf", "nan"]
    assert cli.normalize({"a": (1, 2.0)}) == {"a": [1, 2.0]}


def test_envelope_shape():
    d = cli.envelope("kappa", {"p": 0.5}, {"v": 1.0}, None)
    assert d["schema"] == 1 and "timestamp" in d["meta"]
    assert "timestamp" not in cli.strip_volatile(d)["meta"]


# -- render_report -------------------------------------------------------------------------


def test_empty_report_is_header_only():
    table, js = cli.render_report([], ["p", "phase"])
    assert table == "p,phase\n" and json.loads(js) == []


def test_single_row_round_trip():
    row = {"p": 0.5, "value": 1.5235017686045238, "status": "finite"}
    _, js = cli.render_report([row])
    again = json.loads(js)
    assert cli.render_report(again)[1] == js


def test_column_order_is_stable():
    table, _ = cli.render_report([{"b": 1, "a": 2}, {"a": 3, "c": 4}])
    assert table.splitlines()[0] == "b,a,c"


# -- subcommands ------------------------------------------------------------------------------


def test_classify_example():
    code, text = run("--no-timestamp", "classify", "-w", "gevrey:1.5", "-p", "0.5", "--theta", "0")
    d = doc_of(text)
    assert code == 0 and d["command"] == "classify" and d["result"]["phase"] == "coupled_smooth"


def test_classify_grid_sorted(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    code, text = run("classify", "-w", "gevrey:1.5", "--grid", "p=0.1:0.9:0.1", "--csv", str(csv_path))
    rows = doc_of(text)["result"]
    assert code == 0 and len(rows) == 9
    assert [r["p"] for r in rows] == sorted(r["p"] for r in rows)
    assert len(csv_path.read_text().splitlines()) == 10


def test_grid_parallel_matches_serial(monkeypatch):
    args = ("--no-timestamp", "kappa", "-w", "gevrey:2", "--grid", "p=0.1:0.9:0.2")
    _, serial = run(*args)
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    _, parallel = run(*args)
    assert serial == parallel


def test_bad_thread_count_is_config_error(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    code, _ = run("kappa", "-w", "const", "--grid", "p=0.1:0.5:0.2")
    assert code == 2


def test_mollifier_emits_samples(tmp_path):
    code, text = run("mollifier", "sobolev", "-k", "1", "-p", "0.5", "--eps", "0.5", "--emit-samples", str(tmp_path))
    d = doc_of(text)
    assert code == 0 and d["passed"] is True
    lines = (tmp_path / "phi.csv").read_text().splitlines()
    assert lines[0] == "x,f(x)" and len(lines) > 100


def test_douady_reports_array():
    code, text = run("disconnect", "douady", "-p", "0.5", "-j", "2,4,8,16")
    reps = doc_of(text)["result"]["reports"]
    assert code == 0 and [r["index"] for r in reps] == [2, 4, 8, 16]


def test_bootstrap_table(tmp_path):
    path = tmp_path / "slack.csv"
    code, text = run("bootstrap", "-f", "hermite:1", "-n", "3", "-w", "gevrey:1.5", "--csv", str(path))
    rows = doc_of(text)["result"]
    assert code == 0 and all(r["holds"] for r in rows)
    assert path.read_text().splitlines()[0] == "inequality,order,slack,holds"


def test_witness_theta():
    code, text = run("witness", "theta", "-w", "gevrey:1.5", "-p", "0.5", "--theta-prime", "1")
    assert code == 0 and 0.8 <= doc_of(text)["result"]["theta_hat"] <= 1.2


# -- exit codes ---------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ("classify", "-w", "nope"),
        ("classify", "-w", "gevrey:1.5", "-p", "1.5"),
        ("kappa", "-w", "const", "--grid", "q=0:1:0.1"),
        ("bootstrap", "-f", "fourier:1"),
        ("witness", "theta", "-w", "gevrey:1.5", "--theta-prime", "1", "--window", "a:b"),
        ("nosuchcommand",),
    ],
)
def test_config_errors_exit_2(argv):
    assert run(*argv)[0] == 2


def test_certificate_failure_exits_1():
    code, text = run("mollifier", "carleman", "-w", "expchar:1@0.5", "-p", "0.5", "--eps", "1e-6", "--k-max", "16")
    d = doc_of(text)
    assert code == 1 and d["passed"] is False
    assert not d["result"]["passed"]


# -- reproducibility --------------------------------------------------------------------------------


def _hash_without_timestamp(text):
    return hashlib.sha256(json.dumps(cli.strip_volatile(json.loads(text)), sort_keys=True).encode()).hexdigest()


@pytest.mark.parametrize(
    "argv",
    [
        ("classify", "-w", "gevrey:1.5", "-p", "0.5"),
        ("disconnect", "douady", "-p", "0.5", "-j", "2,4"),
        ("mollifier", "sobolev", "-k", "2", "-p", "0.5", "--eps", "0.1"),
    ],
)
def test_double_run_identical(argv):
    a, b = run(*argv)[1], run(*argv)[1]
    assert _hash_without_timestamp(a) == _hash_without_timestamp(b)


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "k.json"
    proc = subprocess.run(
        [sys.executable, "-m", "carleman_lab.cli", "--no-timestamp", "-o", str(out), "kappa", "-w", "const"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(out.read_text())["result"]["value"] == 0.0
