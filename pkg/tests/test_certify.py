import math
import re
from pathlib import Path

import numpy as np
import pytest

from ctkkt.core.certify import (
    MultiplierTrajectory,
    build_upsilon,
    check_H4,
    check_H7,
    check_licq,
    equality_multipliers,
    first_order_certificate,
    kkt_multipliers,
    multiplier_bound,
    slack_lift,
    unconstrained_certificate,
)
from ctkkt.core.exceptions import CQFailure, DimensionError, InfeasibleError
from ctkkt.core.model import (
    build_grid,
    constant_trajectory,
    evaluate_point,
    load_problem,
    sample_trajectory,
)
from ctkkt.core.options import CertifyOptions
from ctkkt.core.selfcheck import synthetic_point
from ctkkt.core.solver import certify_trajectory
from ctkkt.utils.report import decide_verdict
from tests.conftest import load_case, problem_path


def test_example_1_first_order(ex1):
    problem, grid, traj = ex1
    cert = first_order_certificate(problem, traj)
    assert cert.feasibility.max_abs_h == 0.0
    assert cert.feasibility.min_g == 0.0
    assert cert.cq["H7"].infimum == pytest.approx(4.0, abs=1e-9)
    assert cert.cq["H4"].infimum == pytest.approx(2.0, abs=1e-12)
    assert cert.cq["H7"].to_dict()["max_sigma1"] == pytest.approx(2.0, abs=1e-12)
    assert cert.cq["H4"].to_dict()["max_sigma1"] == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert cert.max_stationarity <= 1e-10
    assert cert.max_complementarity == 0.0
    assert np.all(cert.multipliers.u == 0.0)
    assert np.all(cert.multipliers.v == 0.0)
    assert cert.passed
    assert cert.bound is not None and cert.bound.holds


def test_example_2_cq_fails_with_rank_two(ex2):
    problem, grid, traj = ex2
    cert = first_order_certificate(problem, traj)
    h7 = cert.cq["H7"]
    assert not h7.passed
    assert h7.infimum <= 1e-12
    assert set(h7.ranks) == {2}
    assert cert.cq["H4"].passed
    assert not cert.cq_passed
    assert cert.multipliers is not None
    assert cert.conditions_passed
    assert not cert.passed
    assert cert.cq["LICQ-active"].min_rank == 2


def test_upsilon_layout():
    problem, grid, _ = load_case("ex1", N=3)
    pe = evaluate_point(problem, [1.0, 1.0], 0.0)
    U = build_upsilon(pe)
    w = slack_lift(pe)
    np.testing.assert_allclose(w, [math.sqrt(1.5), math.sqrt(2.0)])
    expected = np.array(
        [
            [1.0, -1.0, 0.0, 0.0],
            [1.0, 1.0, -2.0 * w[0], 0.0],
            [1.0, 1.0, 0.0, -2.0 * w[1]],
        ]
    )
    np.testing.assert_allclose(U, expected)


def test_upsilon_rejects_infeasible_point():
    problem, grid, _ = load_case("infeasible", N=3)
    pe = evaluate_point(problem, [0.0], 0.0)
    with pytest.raises(InfeasibleError):
        build_upsilon(pe)


def test_equality_multipliers_match_normal_equations():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, n + 1))
        J = rng.standard_normal((p, n))
        while np.linalg.det(J @ J.T) < 1e-3:
            J = rng.standard_normal((p, n))
        u_true = rng.standard_normal(p)
        grad_phi = -J.T @ u_true
        pe = synthetic_point(J, np.zeros((0, n)), np.zeros(0), grad_phi)
        u = equality_multipliers(pe)
        residual = np.linalg.norm(grad_phi + J.T @ u)
        assert residual <= 1e-9 * (1.0 + np.linalg.norm(grad_phi))
        dense = np.linalg.solve(J @ J.T, -J @ grad_phi)
        assert np.linalg.norm(u - dense) <= 1e-9 * max(1.0, np.linalg.norm(dense))


def test_equality_multipliers_reject_rank_deficiency():
    J = np.array([[1.0, 1.0], [2.0, 2.0]])
    pe = synthetic_point(J, np.zeros((0, 2)), np.zeros(0), np.zeros(2))
    with pytest.raises(CQFailure) as info:
        equality_multipliers(pe)
    assert info.value.report.rank == 1


def test_inactive_multipliers_are_exactly_zero():
    J_g = np.array([[1.0, 0.0], [0.3, 0.7]])
    pe = synthetic_point(np.zeros((0, 2)), J_g, np.array([0.0, 2.0]), [-2.0, 0.0])
    sol = kkt_multipliers(pe)
    assert sol.v[1] == 0.0
    assert sol.v[0] == pytest.approx(2.0)
    assert sol.unique and sol.residual == pytest.approx(0.0, abs=1e-12)


def test_negative_multiplier_fails_sign():
    problem, grid, traj = load_case("negative_multiplier", N=11)
    cert = first_order_certificate(problem, traj)
    assert cert.cq_passed
    assert cert.min_v == pytest.approx(-1.0)
    assert not cert.sign_passed
    assert cert.negative_multipliers() == {0: tuple(range(11))}


def test_infeasible_trajectory_skips_multipliers():
    problem, grid, traj = load_case("infeasible", N=11)
    cert = first_order_certificate(problem, traj)
    assert not cert.feasible
    assert cert.multipliers is None
    assert cert.verdict == "fail"


def test_cq_reports_are_vacuous_without_constraints():
    problem, grid, traj = load_case("time_varying", N=11)
    h4 = check_H4(problem, traj)
    h7 = check_H7(problem, traj)
    assert h4.vacuous and h4.passed and math.isinf(h4.infimum)
    assert h7.vacuous and h7.passed
    assert h4.to_dict()["infimum"] is None


def test_licq_with_too_many_active_rows():
    problem, grid, _ = load_case("ex2", N=3)
    traj = constant_trajectory(grid, [1.0, 1.0, 1.0])
    report = check_licq(problem, traj)
    assert report.rows == (3, 3, 3)
    assert report.infimum <= 1e-12


def test_unconstrained_certificate():
    problem, grid, traj = load_case("time_varying", N=21)
    cert = unconstrained_certificate(problem, traj)
    assert cert.max_grad_norm == 0.0
    assert cert.max_eig == pytest.approx(-2.0)
    assert cert.passed

    shifted = constant_trajectory(grid, [0.0])
    assert not unconstrained_certificate(problem, shifted).first_order_passed


def test_unconstrained_certificate_rejects_constraints(ex1):
    problem, grid, traj = ex1
    with pytest.raises(DimensionError):
        unconstrained_certificate(problem, traj)


def test_tolerance_overrides_flow_through(ex1):
    problem, grid, traj = ex1
    cert = first_order_certificate(problem, traj, CertifyOptions(tol_stat=1e-3, k_min=10.0))
    assert cert.tol_stat == 1e-3
    assert not cert.cq["H7"].passed


def test_kkt_multipliers_without_inequalities_match_equality_multipliers():
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, n + 1))
        J = rng.standard_normal((p, n))
        if np.linalg.det(J @ J.T) < 1e-3:
            continue
        pe = synthetic_point(J, np.zeros((0, n)), np.zeros(0), rng.standard_normal(n))
        sol = kkt_multipliers(pe)
        assert sol.v.shape == (0,)
        np.testing.assert_allclose(sol.u, equality_multipliers(pe), rtol=0, atol=1e-12)


def _regular_family(rng, N):
    """N nodes sharing (n, p, m) whose active stacks have det(M M') >= 1e-3."""
    n = int(rng.integers(2, 6))
    p = int(rng.integers(0, n))
    q = int(rng.integers(1, n - p + 1))
    r = int(rng.integers(0, 3))
    g = np.concatenate([np.zeros(q), rng.uniform(0.5, 2.0, size=r)])
    evals = []
    while len(evals) < N:
        jac_h = rng.standard_normal((p, n))
        jac_g = rng.standard_normal((q + r, n))
        stack = np.vstack([jac_h, jac_g[:q]])
        if np.linalg.det(stack @ stack.T) < 1e-3:
            continue
        evals.append(synthetic_point(jac_h, jac_g, g, rng.standard_normal(n)))
    return evals


def test_multiplier_bound_holds_on_random_regular_families():
    rng = np.random.default_rng(13)
    for _ in range(100):
        evals = _regular_family(rng, 5)
        sols = [kkt_multipliers(pe) for pe in evals]
        multipliers = MultiplierTrajectory(
            grid=build_grid(1.0, 5),
            u=np.array([s.u for s in sols]).reshape(5, evals[0].p),
            v=np.array([s.v for s in sols]).reshape(5, evals[0].m),
            residual=np.array([s.residual for s in sols]),
            unique=np.array([s.unique for s in sols]),
        )
        bound = multiplier_bound(evals, multipliers)
        assert bound is not None
        assert bound.holds
        for k in range(5):
            node = math.hypot(
                np.linalg.norm(multipliers.u[k]), np.linalg.norm(multipliers.v[k])
            )
            assert node <= bound.bound * (1.0 + 1e-9)


@pytest.mark.parametrize(
    "name",
    [
        "ex1",
        "ex2",
        "negative_multiplier",
        "binding_inequality",
        "equality_only",
        "time_varying",
        "infeasible",
    ],
)
@pytest.mark.parametrize("c", [0.25, 4.0])
def test_scaling_the_objective_scales_multipliers(name, c):
    text = Path(problem_path(name)).read_text()
    scaled_text = re.sub(
        r'^objective = "(.*)"$', lambda m: f'objective = "{c} * ({m.group(1)})"',
        text, count=1, flags=re.M,
    )
    problem, candidate = load_problem(text)
    scaled, _ = load_problem(scaled_text)
    assert scaled.sources.objective != problem.sources.objective
    grid = build_grid(problem.T, 41)
    traj = sample_trajectory(grid, candidate.exprs)

    base = certify_trajectory(problem, traj)
    other = certify_trajectory(scaled, traj)
    assert decide_verdict(other) == decide_verdict(base)

    a, b = base.first_order.multipliers, other.first_order.multipliers
    assert (a is None) == (b is None)
    if a is not None:
        np.testing.assert_allclose(b.u, c * a.u, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(b.v, c * a.v, rtol=1e-9, atol=1e-12)
