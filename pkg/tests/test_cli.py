import json
import math
import subprocess
import sys

import pytest

from chamberflow.cli import main
from chamberflow.records import read_records

PI12 = "0.2617993877991494"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_catalog_list(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    assert code == 0
    assert len(out.strip().splitlines()) == 35


def test_catalog_show_rho1(capsys):
    code, out, _ = run(capsys, "catalog", "show", "rho1-SU3-SO3")
    assert code == 0
    assert "chamber (6 constraints)" in out
    assert out.count("vector (") == 3


def test_catalog_show_unknown(capsys):
    code, _, err = run(capsys, "catalog", "show", "nonsense")
    assert code == 2
    assert "nonsense" in err


def test_catalog_show_bad_parameters(capsys):
    code, _, err = run(capsys, "catalog", "show", "Spj1Spqj1-Spq2-Sp2Spq", "--q", "3", "--j", "0")
    assert code == 2 and "< 0" in err


def test_flow_writes_records(capsys, tmp_path):
    out_path = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "flow", "--action", "rho1-SU3-SO3", "--start", f"{PI12},0", "--out", str(out_path))
    assert code == 0
    assert "collapse" in out and "type_I_theory=0.5" in out
    samples, events = read_records(out_path.open())
    assert samples and events[0]["event"] == "collapse"
    assert max(abs(v) for v in events[0]["limit"]) <= 1e-6


def test_minimal_prints_sixteen_digits(capsys):
    code, out, _ = run(capsys, "minimal", "--action", "rho1-SU3-SO3")
    assert code == 0
    assert out.strip() == "w0 = 0.5235987755982988, 0.0000000000000000"


def test_cascade_two_events(capsys, tmp_path):
    out_path = tmp_path / "c.jsonl"
    code, out, _ = run(capsys, "cascade", "--action", "rho1-SU3-SO3", "--start", f"{PI12},0.01",
                       "--out", str(out_path))
    assert code == 0
    assert out.count("event ") == 2
    assert "0.906899682117" in out
    samples, events = read_records(out_path.open())
    t = [s["t"] for s in samples]
    assert all(b >= a for a, b in zip(t, t[1:]))
    assert len(events) == 2
    assert events[1]["T_est"] > events[0]["T_est"]
    assert events[1]["limit"][1] == pytest.approx(math.pi / (2 * math.sqrt(3)), abs=1e-8)


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"action": "rho1-SU3-SO3", "start": [0.3, 0.2], "options": {"rtol": 1e-9}}))
    code, out, _ = run(capsys, "flow", "--config", str(cfg), "--start", f"{PI12},0")
    assert code == 0 and "limit=(0," in out


def test_inline_roots(capsys):
    roots = json.dumps([{"vector": [2, 0], "m_V": 1}, {"vector": [-1, 1.7320508075688772], "m_H": 1},
                        {"vector": [1, 1.7320508075688772], "m_H": 1}])
    code, out, _ = run(capsys, "minimal", "--roots", roots)
    assert code == 0 and out.startswith("w0 = 0.523598775598")


def test_backtrace(capsys):
    code, out, _ = run(capsys, "backtrace", "--action", "rho1-SU3-SO3", "--point", "0,0.3")
    assert code == 0
    assert out.count("0.52359877") == 2


def test_backtrace_vertex_is_numeric_error(capsys):
    code, _, err = run(capsys, "backtrace", "--action", "rho1-SU3-SO3", "--point", "0,0.9068996821171089")
    assert code == 3 and "facet" in err


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--action", "rho1-SU3-SO3", "--point", "0.5235987755982988,0",
                       "--direction", "1,0")
    assert code == 0
    trace = float(out.strip().splitlines()[-1].split()[1])
    assert abs(trace) < 1e-12


def test_usage_errors(capsys):
    assert run(capsys, "flow", "--action", "rho1-SU3-SO3")[0] == 2
    assert run(capsys, "flow", "--action", "rho1-SU3-SO3", "--start", "5,5")[0] == 2
    assert run(capsys, "flow", "--action", "rho1-SU3-SO3", "--start", "a,b")[0] == 2
    assert run(capsys, "flow", "--action", "rho1-SU3-SO3", "--q", "3", "--start", "0.3,0")[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "flow", "--action", "rho1-SU3-SO3", "--start", "0.3,0", "--rtol", "-1")[0] == 2


def test_check_single_row(capsys, tmp_path):
    report = tmp_path / "r.jsonl"
    code, out, _ = run(capsys, "check", "--action", "rho1-SU3-SO3", "--report", str(report), "--points", "20")
    assert code == 0 and "rho1-SU3-SO3: match" in out
    lines = [json.loads(l) for l in report.read_text().splitlines()]
    assert lines[0]["transcriptions"][0]["verdict"] == "match"
    assert lines[-1]["summary"] is True


def test_check_all_pristine(capsys, tmp_path):
    code, _, _ = run(capsys, "check", "--all", "--report", str(tmp_path / "r.jsonl"), "--points", "20")
    assert code == 0


def test_check_all_with_empty_allowlist_fails(capsys, tmp_path):
    allow = tmp_path / "empty.json"
    allow.write_text(json.dumps({"format": "chamberflow-allowlist", "version": 1, "entries": {}}))
    report = tmp_path / "r.jsonl"
    code, out, _ = run(capsys, "check", "--all", "--allowlist", str(allow), "--report", str(report),
                       "--points", "20")
    assert code == 1
    assert str(report) in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chamberflow", "catalog", "show", "nonsense"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
