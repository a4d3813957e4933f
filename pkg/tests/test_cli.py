import json
import re
import subprocess
import sys

import pytest

from splitorder.cli import EXIT_NEGATIVE, EXIT_OK, EXIT_PARSE, EXIT_SEARCH, EXIT_USAGE, main
from splitorder.hall import load_basis
from splitorder.scheme import Scheme, load
from conftest import DATA


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_basis_listing(capsys):
    code, out, _ = run(capsys, "basis", "--degree", 5)
    assert code == EXIT_OK
    assert out.startswith("# 14 elements")
    assert "W1" in out and "validation: pass" in out
    rows = [l.split() for l in out.splitlines() if l[:6].strip().isdigit() and len(l.split()) == 4]
    assert [int(r[1]) for r in rows] == [2, 1, 2, 3, 6]
    assert [int(r[1]) for r in rows] == [int(r[2]) for r in rows]


def test_basis_dump_round_trips(capsys, tmp_path):
    dump = tmp_path / "b.txt"
    listing = tmp_path / "list.txt"
    code, out, _ = run(capsys, "basis", "--degree", 6, "--policy", "lyndon", "--dump", dump, "-o", listing)
    assert code == EXIT_OK and out == ""
    assert len(load_basis(dump.read_text())) == 23
    assert "# 23 elements" in listing.read_text()


def test_basis_degree_limit(capsys):
    code, _, err = run(capsys, "basis", "--degree", 11)
    assert code == EXIT_USAGE
    assert "degree" in err


@pytest.mark.parametrize("name,text", [
    ("trotter.scheme", "order: 1; defect: M1=-1/2 only at degree 2"),
    ("strang.scheme", "order: 2; defect: M2=-1/24, W1=1/12 at degree 3"),
    ("twokick.scheme", "order: 2; defect: M2=1/48 only at degree 3"),
    ("twokick.control", "order: 2; defect: M2=1/48 only at degree 3"),
])
def test_order(capsys, name, text):
    code, out, _ = run(capsys, "order", DATA / name)
    assert code == EXIT_OK
    assert out.splitlines()[0] == text
    assert re.search(r"= -?\d+/\d+ \(-?0\.\d+\)", out)  # rational plus decimal


def test_order_json(capsys):
    code, out, _ = run(capsys, "order", DATA / "strang.scheme", "--json")
    data = json.loads(out)
    assert data == {"order": 2, "at_least": False, "defect_degree": 3,
                    "defect": {"M2": "-1/24", "W1": "1/12"}}


def test_order_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.scheme"
    bad.write_text("splitting-scheme v1\nstage 1 X1 1/0\n")
    code, _, err = run(capsys, "order", bad)
    assert code == EXIT_PARSE
    assert "line 2, column 12" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "order", tmp_path / "nope.scheme")
    assert code == EXIT_USAGE
    assert "cannot read" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["order"])
    assert info.value.code == EXIT_USAGE


def test_verify_expectations(capsys, tmp_path):
    csv = tmp_path / "e.csv"
    code, out, _ = run(capsys, "verify", DATA / "strang.scheme", "--expect", 2, "--csv", csv)
    assert code == EXIT_OK
    assert "linearpair: slope" in out
    assert csv.read_text().startswith("T,error\n")
    code, out, _ = run(capsys, "verify", DATA / "trotter.scheme", "--expect", 2)
    assert code == EXIT_NEGATIVE
    assert "expected order 2" in out


def test_verify_exact_and_grid(capsys):
    code, out, _ = run(capsys, "verify", DATA / "twokick.scheme", "--system", "quadratic", "--grid", "3:10",
                       "--expect", 5)
    assert code == EXIT_OK
    assert "exact" in out
    assert out.startswith("T,error\n")
    assert len([l for l in out.splitlines() if l and l[0].isdigit()]) == 8


def test_verify_multi_step(capsys):
    code, out, _ = run(capsys, "verify", DATA / "strang.scheme", "--mode", "multi-step", "--grid", "2:7",
                       "--expect", 2)
    assert code == EXIT_OK


def test_verify_unknown_system(capsys):
    code, _, err = run(capsys, "verify", DATA / "strang.scheme", "--system", "pendulum")
    assert code == EXIT_USAGE
    assert "unknown system" in err


def test_obstruct_w1(capsys):
    code, out, _ = run(capsys, "obstruct", DATA / "twokick.scheme")
    assert code == EXIT_OK
    assert "functional: 1/48 (0.0208333" in out
    assert "verdict: obstructed" in out
    assert "identity holds" in out


def test_obstruct_hypotheses_not_met(capsys):
    code, out, _ = run(capsys, "obstruct", DATA / "trotter.scheme")
    assert code == EXIT_NEGATIVE
    assert "verdict: hypotheses-not-met" in out
    assert "hypothesis M1: defect -1/2" in out


def test_obstruct_w2_json(capsys):
    code, out, _ = run(capsys, "obstruct", DATA / "w2-counterexample.control", "--family", "w2", "--json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["coordinate_terms"] == ["+W2", "-M4"]
    assert data["identity_holds"] is True
    assert data["stated_sum"] == "-1577/3317760"


def test_obstruct_wN_domain_error(capsys):
    code, _, err = run(capsys, "obstruct", DATA / "twokick.scheme", "--family", "wN", "--N", 1,
                       "--flows", "X1,W1")
    assert code == EXIT_USAGE
    assert "W1" in err


@pytest.mark.parametrize("flows,text", [("X1", "max order 2"), ("X1,W1", "max order 4"),
                                        ("X1,W1,W2", "max order 6")])
def test_obstruct_bound(capsys, flows, text):
    code, out, _ = run(capsys, "obstruct", "--bound", "--flows", flows)
    assert code == EXIT_OK
    assert text in out


def test_obstruct_bound_needs_flows(capsys):
    code, _, err = run(capsys, "obstruct", "--bound")
    assert code == EXIT_USAGE
    code, _, err = run(capsys, "obstruct")
    assert code == EXIT_USAGE


def test_search_writes_reloadable_scheme(capsys, tmp_path):
    spec = tmp_path / "o2.spec"
    spec.write_text("target_order: 2\nstages: 3\nseed: 4\nrestarts: 10\n")
    out_file = tmp_path / "found.scheme"
    code, out, _ = run(capsys, "search", spec, "-o", out_file)
    assert code == EXIT_OK
    assert "residual norm" in out and "verified" in out
    found = load(out_file.read_text())
    assert isinstance(found, Scheme)
    code, out, _ = run(capsys, "verify", out_file, "--expect", 2)
    assert code == EXIT_OK


def test_search_is_deterministic(capsys, tmp_path):
    spec = tmp_path / "o2.spec"
    spec.write_text("target_order: 2\nstages: 3\nrestarts: 10\n")
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "search", spec, "--seed", 9)
        assert code == EXIT_OK
        outs.append(out)
    assert outs[0] == outs[1]


def test_search_failure_exit_code(capsys, tmp_path):
    spec = tmp_path / "o3.spec"
    spec.write_text("target_order: 3\nstages: 2\nseed: 0\nrestarts: 3\n")
    code, out, _ = run(capsys, "search", spec)
    assert code == EXIT_SEARCH
    assert "search failed" in out and "best residual" in out


def test_search_spec_parse_error(capsys, tmp_path):
    spec = tmp_path / "bad.spec"
    spec.write_text("target_order: 2\nflows: [X1\n")
    code, _, err = run(capsys, "search", spec)
    assert code == EXIT_PARSE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "splitorder", "obstruct", "--bound", "--flows", "X1,W1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "max order 4" in proc.stdout
