import json
import subprocess
import sys

import pytest

from theta_lab.cli import main
from theta_lab.core_arith import as_scalar, matrix_from_json, scalar_from_json, var

z, w = var("z"), var("w")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_tbar_at_zero(capsys):
    code, out, _ = run(capsys, "verify", "yangian.tbar-2dim", "--a", "0")
    assert code == 0
    assert out.startswith("PASS yangian.tbar-2dim")


def test_verify_fg_ratio_json(capsys):
    code, out, _ = run(capsys, "verify", "qloop.fg-ratio", "--order", "12", "--json")
    doc = json.loads(out)
    assert code == 0
    assert doc["pass"] is True and doc["residuals"] == []
    assert doc["window"] == {"order": 12}


def test_verify_trivial_difference_equation(capsys):
    assert run(capsys, "verify", "core.diffeq", "--order", "12")[0] == 0


def test_failing_suite_exits_one(capsys, monkeypatch):
    from theta_lab import suites
    monkeypatch.setattr(suites, "bounded_partitions", lambda k, m: 0)
    code, out, _ = run(capsys, "verify", "yangian.verma", "--depth", "2", "--modes", "2", "--json")
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_unknown_suite_exits_two_with_list(capsys):
    code, _, err = run(capsys, "verify", "no.such.suite")
    assert code == 2
    assert "qloop.poly-r" in err


def test_unsupported_parameter_exits_two(capsys):
    code, _, err = run(capsys, "verify", "core.series", "--depth", "3")
    assert code == 2
    assert "--depth" in err


def test_seed_is_recorded_only(capsys):
    _, a, _ = run(capsys, "verify", "core.series", "--json", "--seed", "7")
    _, b, _ = run(capsys, "verify", "core.series", "--json")
    da, db = json.loads(a), json.loads(b)
    assert da["parameters"].pop("seed") == 7
    assert da == db


def test_verify_output_is_deterministic(capsys):
    outs = {run(capsys, "verify", "yangian.theta-2dim", "--order", "4", "--json")[1] for _ in range(2)}
    assert len(outs) == 1


def test_compute_theta_zero_is_identity(capsys):
    code, out, _ = run(capsys, "compute", "qloop.theta.closed", "--n", "0")
    doc = json.loads(out)
    assert code == 0
    m = doc["matrices"]["Theta_0"]
    assert [e[:2] for e in m["entries"]] == [[i, i] for i in range(4)]
    assert all(e[2] == "1/1" for e in m["entries"])


def test_compute_rmatrix_document(capsys):
    code, out, _ = run(capsys, "compute", "yangian.rmatrix.2dim-negpref", "--zdeg", "full", "--depth", "10")
    doc = json.loads(out)
    assert code == 0
    assert doc["window"] == {"depth": 10}
    d = matrix_from_json(doc["matrices"]["R[1,1]"])
    assert [as_scalar(d.get(n, n)) for n in range(11)] == [as_scalar(z + n) for n in range(11)]
    up = matrix_from_json(doc["matrices"]["R[0,1]"])
    assert [up.get(n + 1, n) for n in range(10)] == list(range(1, 11))


def test_compute_rmatrix_z_coefficient(capsys):
    _, out, _ = run(capsys, "compute", "yangian.rmatrix.2dim-negpref", "--zdeg", "1", "--depth", "3")
    d = matrix_from_json(json.loads(out)["matrices"]["R[1,1]"])
    assert d.to_dense() == [[1 if i == j else 0 for j in range(4)] for i in range(4)]


def test_compute_monodromy_entry_is_constant(capsys):
    code, out, _ = run(capsys, "compute", "qloop.monodromy.tplus", "--row", "v2", "--col", "v0",
                       "--test-module", "v2dim")
    doc = json.loads(out)
    assert code == 0
    assert doc["window"]["constant_in_z"] is True
    assert set(doc["matrices"]) <= {"z^0"}


def test_compute_monodromy_first_entry(capsys):
    _, out, _ = run(capsys, "compute", "qloop.monodromy.tplus", "--row", "v1", "--col", "v0")
    doc = json.loads(out)
    (entry,) = doc["matrices"]["z^0"]["entries"]
    assert entry[:2] == [1, 0]
    q = var("q")
    assert scalar_from_json(entry[2]) == as_scalar((1 - q ** 2) / q)


def test_compute_outside_window_exits_two(capsys):
    code, _, err = run(capsys, "compute", "qloop.monodromy.tplus", "--row", "v30", "--depth", "8")
    assert code == 2
    assert "maximal window" in err and "v0..v7" in err


def test_compute_unknown_object(capsys):
    assert run(capsys, "compute", "nothing")[0] == 2


def test_emit_identity_text(capsys):
    code, out, _ = run(capsys, "emit", "identity", "--format", "text")
    grid = out.splitlines()[-2:]
    cells = [c for line in grid for c in line.split()[1:]]
    assert code == 0
    assert sorted(cells) == ["0", "0", "1", "1"]


def test_emit_json_round_trip(capsys, tmp_path):
    path = tmp_path / "gr.json"
    assert run(capsys, "emit", "qloop.gr-matrix", "--jmax", "2", "--format", "json", "--out", str(path))[0] == 0
    doc = json.loads(path.read_text())
    M = matrix_from_json(doc["matrices"]["gR"])
    again = json.loads(json.dumps(doc))
    assert matrix_from_json(again["matrices"]["gR"]) == M
    run(capsys, "emit", "qloop.gr-matrix", "--jmax", "2", "--format", "json", "--out", str(tmp_path / "b.json"))
    assert path.read_bytes() == (tmp_path / "b.json").read_bytes()


def test_emit_decomposition_matrix_entry_count(capsys):
    _, out, _ = run(capsys, "emit", "qloop.gr-matrix", "--jmax", "3", "--format", "json")
    doc = json.loads(out)
    entries = doc["matrices"]["gR"]["entries"]
    diagonal_blocks = [e for e in entries if (e[0] < 4) == (e[1] < 4)]
    assert len(diagonal_blocks) == 8
    assert len(entries) == 14
    q = var("q")
    e = {(i, j): scalar_from_json(v) for i, j, v in entries}
    assert e[(2, 2)] == as_scalar(q ** 2 - z * q ** -4)
    assert e[(7, 7)] == as_scalar(q ** -3 - z * w * q ** 5)


def test_emit_unwritable_path(capsys):
    code, _, err = run(capsys, "emit", "--out", "/nonexistent-dir/x.json")
    assert code == 2
    assert "cannot write" in err


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert "suites:" in out and "objects:" in out


@pytest.mark.parametrize("argv,code", [(["list"], 0), (["verify", "nope"], 2), ([], 2)])
def test_console_script_exit_codes(argv, code):
    proc = subprocess.run([sys.executable, "-m", "theta_lab.cli", *argv], capture_output=True, text=True)
    assert proc.returncode == code
