import math

import numpy as np
import pytest

from ctkkt.core.exceptions import DimensionError, ExprDomainError, ProblemFormatError
from ctkkt.core.model import (
    Candidate,
    build_grid,
    check_feasibility,
    constant_trajectory,
    evaluate_point,
    integrate,
    load_problem,
    objective_value,
    parse_candidate,
    read_problem_file,
    sample_trajectory,
    save_problem,
)
from tests.conftest import load_case, problem_path

BASIC = """
[problem]
name = "basic"
n = 2
T = 2.0
objective = "-z1^2 - z2^2"

[[equality]]
expr = "z1 - z2"

[[inequality]]
expr = "z1 + 1"
"""


def test_load_problem():
    problem, candidate = load_problem(BASIC)
    assert (problem.name, problem.n, problem.T) == ("basic", 2, 2.0)
    assert (problem.p, problem.m) == (1, 1)
    assert candidate is None
    assert problem.is_autonomous


def test_save_then_load_reproduces_sources():
    problem, candidate, _ = read_problem_file(problem_path("ex2"))
    again, cand2 = load_problem(save_problem(problem, candidate))
    assert again.sources == problem.sources
    assert (again.name, again.n, again.T) == (problem.name, problem.n, problem.T)
    assert cand2.sources == candidate.sources


@pytest.mark.parametrize(
    "text, line",
    [
        (BASIC + "\n[extra]\nx = 1\n", 14),
        (BASIC.replace('name = "basic"', 'name = "basic"\ncolor = "red"'), 4),
        (BASIC.replace("n = 2", 'n = "two"'), 4),
        (BASIC.replace('expr = "z1 + 1"', 'expr = "z1 + "'), 12),
    ],
)
def test_format_errors_report_lines(text, line):
    with pytest.raises(ProblemFormatError) as info:
        load_problem(text)
    assert info.value.line == line


DUPLICATED = """\
[problem]
name = "NAME"
n = 1
T = 1.0
objective = "OBJ"
# a draft had expr = "z1 + "
[[inequality]]
expr = "z1"

[[inequality]]
expr = "z1 + "
"""


@pytest.mark.parametrize(
    "name, objective, line, label",
    [
        ("dup", "-z1^2", 11, "inequality 2"),
        ("z1 *", "z1 *", 5, "objective"),
    ],
)
def test_expression_errors_point_at_their_entry(name, objective, line, label):
    text = DUPLICATED.replace("NAME", name).replace("OBJ", objective)
    with pytest.raises(ProblemFormatError, match=label) as info:
        load_problem(text)
    assert info.value.line == line


def test_missing_problem_key():
    with pytest.raises(ProblemFormatError, match="objective"):
        load_problem('[problem]\nname = "x"\nn = 1\nT = 1.0\n')


def test_bad_toml():
    with pytest.raises(ProblemFormatError):
        load_problem("[problem\nname = 1\n")


def test_too_many_equalities():
    text = BASIC.replace("n = 2", "n = 1").replace("z1 - z2", "z1").replace(
        '"-z1^2 - z2^2"', '"-z1^2"'
    ) + '\n[[equality]]\nexpr = "z1 - 1"\n'
    with pytest.raises(DimensionError):
        load_problem(text)


def test_candidate_length_mismatch():
    with pytest.raises(DimensionError, match="line"):
        load_problem(BASIC + '\n[candidate]\nz = ["0"]\n')


def test_candidate_may_only_use_t():
    with pytest.raises(DimensionError):
        parse_candidate(["t", "z1"], 2)


def test_grid_and_trapezoid():
    grid = build_grid(2.0, 5)
    np.testing.assert_array_equal(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert math.fsum(grid.weights) == pytest.approx(2.0)
    assert integrate(grid, grid.nodes) == pytest.approx(2.0)
    assert grid.index_of(1.1) == 2
    with pytest.raises(DimensionError):
        build_grid(1.0, 1)


def test_integrate_is_order_free():
    grid = build_grid(1.0, 101)
    rng = np.random.default_rng(3)
    values = rng.standard_normal(101) * 1e8
    perm = rng.permutation(101)
    a = integrate(grid, values)
    b = math.fsum(float(grid.weights[k]) * float(values[k]) for k in perm)
    assert a == b


def test_sample_time_varying_candidate():
    problem, grid, traj = load_case("time_varying", N=5)
    np.testing.assert_allclose(traj.values[:, 0], grid.nodes)
    assert not problem.is_autonomous
    assert objective_value(problem, traj) == 0.0


def test_evaluate_point_ex1(ex1):
    problem, grid, _ = ex1
    pe = evaluate_point(problem, [0.0, 0.0], 0.0)
    np.testing.assert_array_equal(pe.g, [0.0, 1.0])
    assert pe.active == (0,)
    assert pe.inactive == (1,)
    np.testing.assert_array_equal(pe.jac_h, [[1.0, -1.0]])
    np.testing.assert_array_equal(pe.jac_g, [[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_array_equal(pe.hess_phi, -2.0 * np.eye(2))
    assert pe.active_stack().shape == (2, 2)


def test_feasibility_reports_worst_nodes(ex1):
    problem, grid, _ = ex1
    report = check_feasibility(problem, constant_trajectory(grid, [-1.0, -1.0]))
    assert not report.passed
    assert report.min_g == -0.5
    assert report.inequality[0].value == -0.5
    assert report.to_dict()["inequality"][0]["constraint"] == 1


def test_feasibility_without_inequalities():
    problem, grid, traj = load_case("equality_only", N=11)
    report = check_feasibility(problem, traj)
    assert report.passed
    assert report.to_dict()["min_g"] is None


def test_domain_error_is_labelled():
    problem, _ = load_problem(
        '[problem]\nname = "d"\nn = 1\nT = 1.0\nobjective = "z1"\n'
        '[[inequality]]\nexpr = "log(z1)"\n'
    )
    with pytest.raises(ExprDomainError) as info:
        evaluate_point(problem, [-1.0], 0.0)
    assert info.value.label == "g1"


def test_candidate_dataclass_round_trip():
    exprs = parse_candidate(["t", "1"], 2)
    grid = build_grid(1.0, 3)
    traj = sample_trajectory(grid, Candidate(("t", "1"), exprs).exprs)
    np.testing.assert_array_equal(traj.values, [[0.0, 1.0], [0.5, 1.0], [1.0, 1.0]])


def test_trapezoid_converges_at_second_order():
    errors = []
    for N in (11, 21, 41, 81, 161):
        grid = build_grid(1.0, N)
        errors.append(abs(integrate(grid, -2.0 * grid.nodes ** 2) + 2.0 / 3.0))
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert rates == pytest.approx([2.0] * len(rates), abs=0.05)


def test_objective_of_diagonal_trajectory(ex1):
    problem, _, _ = ex1
    grid = build_grid(problem.T, 2001)
    traj = sample_trajectory(grid, parse_candidate(["t", "t"], 2))
    assert objective_value(problem, traj) == pytest.approx(-2.0 / 3.0, abs=1e-6)


def test_active_set_grows_with_tolerance(ex1):
    problem, _, _ = ex1
    rng = np.random.default_rng(8)
    tolerances = [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0]
    for _ in range(100):
        s = float(rng.uniform(-1.0, 1.0))
        delta = float(10.0 ** rng.uniform(-12, 0))
        z = [delta - 0.5 * s * s, s]
        previous = set()
        for eps in tolerances:
            active = set(evaluate_point(problem, z, 0.0, eps).active)
            assert previous <= active
            previous = active
