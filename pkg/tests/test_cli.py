import json

import pytest

from ctkkt import __version__
from ctkkt.__main__ import cli, main
from ctkkt.utils.report import validate_document
from tests.conftest import problem_path


def run_json(capsys, *args):
    code = main(list(args) + ["--json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_modules_are_registered(capsys):
    assert set(cli.commands) == {"check", "solve", "selftest"}
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in ("check", "solve", "selftest"))


@pytest.mark.parametrize(
    "name, code, verdict",
    [
        ("ex1", 0, "certified"),
        ("ex2", 2, "cq_failed"),
        ("negative_multiplier", 4, "refuted"),
        ("binding_inequality", 0, "certified"),
        ("infeasible", 5, "infeasible"),
        ("equality_only", 0, "certified"),
        ("time_varying", 0, "certified"),
    ],
)
def test_check_exit_codes(capsys, name, code, verdict):
    rc, doc = run_json(capsys, "check", problem_path(name))
    assert rc == code
    assert doc["verdict"] == verdict
    validate_document(doc)


def test_check_example_2_keeps_first_order_block(capsys):
    rc, doc = run_json(capsys, "check", problem_path("ex2"))
    assert rc == 2
    assert doc["first_order"] is not None
    assert doc["cq"]["H7"]["min_rank"] == 2


def test_check_candidate_override_refutes(capsys):
    rc, doc = run_json(capsys, "check", problem_path("ex1"), "--candidate", "1,1")
    assert rc == 4
    assert doc["refutation"]["gain"] > 0


def test_check_flags(capsys):
    rc, doc = run_json(
        capsys,
        "check", problem_path("ex1"),
        "--grid", "11", "--kmin", "10", "--tol-stat", "1e-6", "--sample", "0.5",
    )
    assert rc == 2
    assert doc["grid"]["N"] == 11
    assert doc["options"]["tol_stat"] == 1e-6
    assert [s["node"] for s in doc["first_order"]["samples"]] == [5]


def test_check_text_report_and_output_file(capsys, tmp_path):
    out = tmp_path / "report.txt"
    rc = main(["check", problem_path("ex1"), "--grid", "21", "-o", str(out)])
    assert rc == 0
    assert "certified" in capsys.readouterr().out
    written = out.read_text()
    assert "certified" in written
    assert "\x1b[" not in written


def test_check_without_candidate_is_usage_error(tmp_path):
    path = tmp_path / "bare.ctp"
    path.write_text('[problem]\nname = "bare"\nn = 1\nT = 1.0\nobjective = "-z1^2"\n')
    assert main(["check", str(path)]) == 1


def test_check_bad_candidate(tmp_path):
    assert main(["check", problem_path("ex1"), "--candidate", "1"]) == 1


def test_check_missing_file():
    assert main(["check", "no/such/file.ctp"]) == 1


def test_check_malformed_file(tmp_path):
    path = tmp_path / "bad.ctp"
    path.write_text("[problem]\nname = 3\n")
    assert main(["check", str(path)]) == 1


def test_unknown_option():
    assert main(["check", problem_path("ex1"), "--no-such-flag"]) == 1


def test_solve_writes_trajectory_then_check_reads_it(capsys, tmp_path):
    csv_path = tmp_path / "ex1.csv"
    rc, doc = run_json(
        capsys, "solve", problem_path("ex1"), "--grid", "21",
        "--trajectory-out", str(csv_path),
    )
    assert rc == 0
    assert doc["solve"]["failed_nodes"] == []
    assert len(doc["solve"]["trajectory"]["t"]) == 21
    assert abs(doc["objective"]) <= 1e-6
    assert csv_path.read_text().splitlines()[0] == "t,z1,z2,u1,v1,v2"

    rc, doc = run_json(
        capsys, "check", problem_path("ex1"), "--grid", "21",
        "--trajectory", str(csv_path),
    )
    assert doc["verdict"] in ("certified", "second_order_failed", "first_order_failed")
    assert doc["feasibility"]["passed"]


def test_solve_binding_inequality_with_positive_multiplier(capsys, tmp_path):
    csv_path = tmp_path / "binding.csv"
    rc, doc = run_json(
        capsys, "solve", problem_path("binding_inequality"), "--grid", "11",
        "--starts", "4", "--trajectory-out", str(csv_path),
    )
    assert rc == 0
    assert doc["verdict"] == "certified"
    assert doc["solve"]["failed_nodes"] == []
    assert all(abs(z[0] - 1.5) <= 1e-6 for z in doc["solve"]["trajectory"]["z"])
    assert doc["first_order"]["sup_v"] == pytest.approx(1.0, abs=1e-5)
    row = csv_path.read_text().splitlines()[1].split(",")
    assert float(row[2]) == pytest.approx(1.0, abs=1e-5)


def test_solve_infeasible_exits_6():
    assert main(["solve", problem_path("infeasible"), "--grid", "11", "--starts", "2"]) == 6


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("✅") == 3


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
