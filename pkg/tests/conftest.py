from pathlib import Path

import pytest

from ctkkt.core.model import build_grid, read_problem_file, sample_trajectory

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def problem_path(name: str) -> str:
    return str(PROBLEMS / f"{name}.ctp")


def load_case(name: str, N: int = 201):
    """(problem, grid, candidate trajectory) for a shipped fixture."""
    problem, candidate, _ = read_problem_file(problem_path(name))
    grid = build_grid(problem.T, N)
    return problem, grid, sample_trajectory(grid, candidate.exprs)


@pytest.fixture
def ex1():
    return load_case("ex1")


@pytest.fixture
def ex2():
    return load_case("ex2")
