import csv
import io
import json
import math
import subprocess
import sys

import jsonschema
import pytest

from dicke_squeeze import cli, optimize
from dicke_squeeze.cli import UsageError, load_output_schema, main, parse_grid, parse_int_list
from dicke_squeeze.liouville import IntegrationError, SteadyStateError
from dicke_squeeze.table import default_table_path


@pytest.fixture(scope="module")
def schema():
    return load_output_schema()


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_parsers():
    assert parse_int_list("2,4,8") == [2, 4, 8]
    assert parse_int_list("2:5") == [2, 3, 4, 5]
    assert parse_int_list("8:32:8") == [8, 16, 24, 32]
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("1:100:3:log") == pytest.approx([1.0, 10.0, 100.0])
    assert parse_grid("0.5,2") == [0.5, 2.0]
    for bad in ("1:0:3", "0:1", "0:1:0", "0:1:3:log", ""):
        with pytest.raises(UsageError):
            parse_grid(bad)
    with pytest.raises(UsageError):
        parse_int_list("5:2")


def test_steady_json(capsys, schema):
    code, out, _ = run(capsys, "steady", "--n", "2", "--omega-ratio", "1", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert doc["report"]["xi2_S"] == pytest.approx(10 / 11, abs=1e-9)
    assert doc["version"] and doc["config"]["n"] == [2]


def test_steady_ground_dump(capsys, schema):
    code, out, _ = run(capsys, "steady", "--n", "4", "--omega-ratio", "0", "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    nonzero = [e for e in doc["state"]["entries"] if e[2] != 0]
    assert nonzero == [[0, 0, 1.0]]


def test_steady_csv(capsys):
    code, out, _ = run(capsys, "steady", "--n", "3", "--omega-ratio", "1")
    values = {r["quantity"]: float(r["value"]) for r in csv_rows(out)}
    assert values["xi2_S"] == pytest.approx(31 / 37, abs=1e-12)


def test_steady_solver_failure(capsys, monkeypatch):
    def fail(*a, **k):
        raise SteadyStateError("no convergence")

    monkeypatch.setattr(cli, "steady_state", fail)
    code, _, err = run(capsys, "steady", "--n", "3", "--omega-ratio", "1")
    assert code == 2 and "no convergence" in err


def test_scan_csv_format(capsys):
    code, out, _ = run(capsys, "scan", "--n", "2,3", "--omega-over-n", "0:1.2:5")
    assert code == 0
    lines = out.split("\n")
    assert lines[0].startswith("# dicke_squeeze ")
    assert lines[1].startswith("# config: ")
    assert lines[2] == "n,omega_ratio,xi2_S,xi2_E,negativity"
    assert "\r" not in out and out.endswith("\n")
    rows = csv_rows(out)
    assert len(rows) == 10
    # shortest round-trip floats
    for r in rows:
        assert repr(float(r["xi2_S"])) == r["xi2_S"]


def test_scan_json_schema(capsys, schema):
    code, out, _ = run(capsys, "scan", "--n", "2", "--omega-ratio", "0,1,1.4142135623730951", "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert [r["xi2_S"] for r in doc["rows"]] == pytest.approx([1.0, 10 / 11, 1.0], abs=1e-12)


def test_scan_point_equals_steady(capsys):
    _, scan_out, _ = run(capsys, "scan", "--n", "5", "--omega-ratio", "2.5")
    _, steady_out, _ = run(capsys, "steady", "--n", "5", "--omega-ratio", "2.5")
    row = csv_rows(scan_out)[0]
    values = {r["quantity"]: r["value"] for r in csv_rows(steady_out)}
    for key in ("xi2_S", "xi2_E", "negativity"):
        assert row[key] == values[key]


def test_scan_byte_identical_across_workers(tmp_path, capsys):
    outs = []
    for w in ("1", "3"):
        path = tmp_path / f"scan{w}.csv"
        assert main(["scan", "--n", "2:6", "--omega-over-n", "0:1:11", "--workers", w, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_scan_partial_failure_exit(capsys, monkeypatch):
    real = optimize.steady_state

    def flaky(params, **kw):
        if params.omega_ratio > 1:
            raise SteadyStateError("forced")
        return real(params, **kw)

    monkeypatch.setattr(optimize, "steady_state", flaky)
    code, out, err = run(capsys, "scan", "--n", "3", "--omega-ratio", "0.5,2")
    assert code == 3 and "forced" in err
    assert csv_rows(out)[1]["xi2_S"] == ""


def test_optimize(capsys, schema):
    code, out, err = run(capsys, "optimize", "--n", "2:5", "--trend", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    rows = doc["rows"]
    assert [r["n"] for r in rows] == [2, 3, 4, 5]
    assert rows[0]["omega_boundary"] == pytest.approx(math.sqrt(2), abs=1e-7)
    assert all(a["xi2_min"] > b["xi2_min"] for a, b in zip(rows, rows[1:]))
    assert doc["trend"]["a"] is not None


def test_evolve_flat_when_undriven(capsys, schema):
    code, out, err = run(capsys, "evolve", "--n", "4", "--omega-ratio", "0", "--t-final", "5",
                         "--samples", "6", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert all(r["xi2_S"] == pytest.approx(1.0, abs=1e-12) for r in doc["rows"])


def test_evolve_csv_and_initial_states(capsys):
    code, out, _ = run(capsys, "evolve", "--n", "3", "--omega-ratio", "1", "--initial", "dicke:2",
                       "--t-final", "60", "--samples", "4")
    rows = csv_rows(out)
    assert code == 0 and list(rows[0]) == ["t", "xi2_S", "trace_error"]
    assert float(rows[-1]["xi2_S"]) == pytest.approx(31 / 37, abs=1e-6)
    assert run(capsys, "evolve", "--n", "3", "--omega-ratio", "1", "--initial", "dicke:7")[0] == 64
    assert run(capsys, "evolve", "--n", "3", "--omega-ratio", "1", "--initial", "bogus")[0] == 64


def test_evolve_integrator_failure(capsys, monkeypatch):
    def fail(*a, **k):
        raise IntegrationError("step size underflow", 1.25)

    monkeypatch.setattr(cli, "evolve", fail)
    code, _, err = run(capsys, "evolve", "--n", "3", "--omega-ratio", "1")
    assert code == 5 and "t=1.25" in err


def test_verify_table(capsys, tmp_path):
    code, out, _ = run(capsys, "verify-table")
    assert code == 0 and "max relative error" in out
    doc = json.loads(default_table_path().read_text())
    doc["rows"][0]["numerator"][0] = 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "verify-table", "--table", str(bad))
    assert code == 4 and "N=2" in err


def test_verify_oracle(capsys):
    code, out, _ = run(capsys, "verify-oracle", "--n", "1:3", "--omega-ratio", "0,1")
    assert code == 0 and "max entrywise difference" in out


def test_usage_errors(capsys):
    assert run(capsys, "scan", "--n", "2")[0] == 64
    assert run(capsys, "scan", "--n", "2", "--omega-ratio", "1", "--workers", "0")[0] == 64
    assert run(capsys, "steady", "--n", "2,3", "--omega-ratio", "1")[0] == 64
    assert run(capsys, "scan", "--n", "2", "--omega-ratio", "1:0:3")[0] == 64
    assert run(capsys, "steady", "--n", "2", "--omega-ratio", "1", "--tol-residual", "-1")[0] == 64


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dicke_squeeze.cli", "steady", "--n", "2", "--omega-ratio", "1"],
                          capture_output=True, text=True, check=True)
    assert "xi2_S,0.909090909090909" in proc.stdout
