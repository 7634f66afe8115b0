import json

import jsonschema
import pytest

from ctkkt.core.certify import unconstrained_certificate
from ctkkt.core.model import constant_trajectory, objective_value, read_problem_file
from ctkkt.core.options import CertifyOptions
from ctkkt.core.solver import certify_trajectory
from ctkkt.utils.report import (
    VERDICT_EXIT,
    CertificateDocument,
    default_sample_nodes,
    sample_nodes_at,
    validate_document,
)
from tests.conftest import load_case, problem_path

FIXTURES = {
    "ex1": "certified",
    "ex2": "cq_failed",
    "negative_multiplier": "refuted",
    "binding_inequality": "certified",
    "infeasible": "infeasible",
    "equality_only": "certified",
    "time_varying": "certified",
}


def _document(name, N=51, traj=None):
    problem, grid, candidate = load_case(name, N)
    traj = candidate if traj is None else traj
    _, _, sha = read_problem_file(problem_path(name))
    opts = CertifyOptions(grid=N)
    unconstrained = None
    if problem.p == 0 and problem.m == 0:
        unconstrained = unconstrained_certificate(problem, traj, opts)
    return CertificateDocument(
        problem=problem,
        sha256=sha,
        grid=grid,
        certification=certify_trajectory(problem, traj, opts),
        objective=objective_value(problem, traj),
        options=opts,
        sample_nodes=default_sample_nodes(grid),
        unconstrained=unconstrained,
    )


@pytest.mark.parametrize("name, verdict", sorted(FIXTURES.items()))
def test_fixture_documents_validate(name, verdict):
    doc = _document(name)
    data = doc.to_dict()
    validate_document(data)
    assert data["verdict"] == verdict
    assert data["exit_code"] == VERDICT_EXIT[verdict]
    json.loads(doc.to_json())


def test_refuted_document_carries_witness():
    problem, grid, _ = load_case("ex1", 51)
    doc = _document("ex1", traj=constant_trajectory(grid, [1.0, 1.0]))
    data = doc.to_dict()
    assert data["verdict"] == "refuted"
    assert data["exit_code"] == 4
    assert data["refutation"]["gain"] > 0
    assert data["refutation"]["feasibility"]["passed"] is True


def test_example_2_keeps_first_order_block():
    data = _document("ex2").to_dict()
    assert data["first_order"] is not None
    assert data["cq"]["H7"]["passed"] is False
    assert data["cq"]["H7"]["min_rank"] == 2


def test_schema_rejects_inconsistent_verdict():
    data = _document("ex1").to_dict()
    data["verdict"] = "refuted"
    with pytest.raises(jsonschema.ValidationError):
        validate_document(data)


def test_text_and_json_share_one_source():
    doc = _document("negative_multiplier")
    text = doc.to_text()
    data = doc.to_dict()
    assert data["verdict"] in text
    assert "Refutation" in text
    assert data["refutation"]["source"] in text


def test_sample_nodes():
    problem, grid, _ = load_case("ex1", 11)
    assert default_sample_nodes(grid) == (0, 5, 10)
    assert sample_nodes_at(grid, [0.0, 0.52]) == (0, 5)
    assert sample_nodes_at(grid, None) == (0, 5, 10)
