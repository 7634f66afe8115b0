import numpy as np
import pytest

from ctkkt.core.exceptions import SolverError
from ctkkt.core.model import build_grid, load_problem, objective_value, read_problem_file
from ctkkt.core.options import SolveOptions
from ctkkt.core.solver import (
    certified_solve,
    certify_trajectory,
    solve_pointwise,
    solve_trajectory,
)
from tests.conftest import load_case, problem_path


def _problem(name):
    problem, _, _ = read_problem_file(problem_path(name))
    return problem


@pytest.mark.parametrize(
    "name, expected", [("ex1", [0.0, 0.0]), ("ex2", [1.0, 1.0, 1.0])]
)
def test_recovers_worked_examples(name, expected):
    problem = _problem(name)
    first = certified_solve(problem, SolveOptions())
    second = certified_solve(problem, SolveOptions())
    z = first.trajectory.values
    assert first.solve.complete
    assert np.max(np.abs(z - np.asarray(expected))) <= 1e-4
    assert objective_value(problem, first.trajectory) == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_array_equal(z, second.trajectory.values)


def test_solved_example_1_certifies():
    solution = certified_solve(_problem("ex1"), SolveOptions())
    assert solution.first_order.feasible
    assert solution.first_order.cq_passed
    assert solution.refutation is None


def test_pointwise_solution():
    problem, _ = load_problem(
        '[problem]\nname = "shift"\nn = 1\nT = 1.0\nobjective = "-(z1 - 2)^2"\n'
        '[[inequality]]\nexpr = "1.5 - z1"\n'
    )
    z = solve_pointwise(problem, 0.0, SolveOptions(starts=4))
    assert z[0] == pytest.approx(1.5, abs=1e-6)


def test_time_varying_tracks_t():
    problem = _problem("time_varying")
    grid = build_grid(problem.T, 11)
    result = solve_trajectory(problem, grid, SolveOptions(grid=11, starts=4))
    assert result.complete
    np.testing.assert_allclose(result.trajectory.values[:, 0], grid.nodes, atol=1e-6)


def test_seed_changes_nothing_for_unique_optimum():
    problem = _problem("ex1")
    a = certified_solve(problem, SolveOptions(grid=11, seed=1))
    b = certified_solve(problem, SolveOptions(grid=11, seed=2))
    np.testing.assert_allclose(a.trajectory.values, b.trajectory.values, atol=1e-6)


def test_infeasible_problem_raises():
    with pytest.raises(SolverError) as info:
        certified_solve(_problem("infeasible"), SolveOptions(grid=11, starts=4))
    assert info.value.exit_code == 6
    assert info.value.best_infeasibility >= 1.0 - 1e-6


def test_certify_trajectory_pipeline(ex1):
    problem, grid, traj = ex1
    cert = certify_trajectory(problem, traj)
    assert cert.certified
    assert cert.refutation is None

    problem, grid, traj = load_case("negative_multiplier", N=21)
    cert = certify_trajectory(problem, traj)
    assert not cert.certified
    assert cert.refutation is not None


def test_more_starts_never_do_worse():
    problem, _ = load_problem(
        '[problem]\nname = "bumpy"\nn = 2\nT = 1.0\n'
        'objective = "sin(3*z1) + cos(2*z2) - 0.1*(z1^2 + z2^2)"\n'
        '[[inequality]]\nexpr = "4 - z1^2 - z2^2"\n'
    )
    values = []
    for starts in (1, 2, 4, 8, 16):
        try:
            z = solve_pointwise(problem, 0.0, SolveOptions(starts=starts, seed=5))
        except SolverError:
            values.append(-np.inf)
            continue
        values.append(problem.tables.phi(z.tolist(), 0.0)[0])
    assert np.isfinite(values[-1])
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_binding_inequality_meets_solver_tolerance():
    problem = _problem("binding_inequality")
    for starts in (1, 4, 16):
        z = solve_pointwise(problem, 0.0, SolveOptions(starts=starts))
        assert 1.5 - z[0] >= -SolveOptions().tol_feas
        assert z[0] == pytest.approx(1.5, abs=1e-6)
