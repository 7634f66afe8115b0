"""
Pointwise solver.

Constraints and integrand act pointwise in t, so maximizing the integral
separates into one finite-dimensional problem per grid node:

    maximize phi(z, t)  subject to  h(z, t) = 0, g(z, t) >= 0.

Each is solved by a multi-start augmented Lagrangian (Powell-Hestenes-
Rockafellar) with BFGS inner solves.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.optimize

from ctkkt import log
from ctkkt.core.certify import FirstOrderCertificate, first_order_certificate
from ctkkt.core.exceptions import CtkktError, ExprDomainError, SolverError
from ctkkt.core.improve import RefutationWitness, refute_optimality
from ctkkt.core.model import (
    Problem,
    TimeGrid,
    Trajectory,
    build_grid,
    trajectory_from_values,
)
from ctkkt.core.options import CertifyOptions, SolveOptions
from ctkkt.core.soc import SecondOrderCertificate, second_order_certificate


@dataclass(frozen=True)
class _Local:
    z: np.ndarray
    phi: float
    infeasibility: float


def _infeasibility(h: np.ndarray, g: np.ndarray) -> float:
    worst = 0.0
    if h.size:
        worst = max(worst, float(np.max(np.abs(h))))
    if g.size:
        worst = max(worst, float(np.max(-g)))
    return worst


def _augmented_lagrangian(problem: Problem, t: float, z0: np.ndarray, opts: SolveOptions) -> _Local:
    tb = problem.tables
    n, p, m = problem.n, problem.p, problem.m
    lam = np.zeros(p)
    mu = np.zeros(m)
    rho = float(opts.penalty0)
    z = np.array(z0, dtype=float)

    for _ in range(max(opts.outer, 1)):

        def merit(x, lam=lam, mu=mu, rho=rho):
            xl = x.tolist()
            h = np.array(tb.h(xl, t), dtype=float)
            g = np.array(tb.g(xl, t), dtype=float)
            jh = np.array(tb.jac_h(xl, t), dtype=float).reshape(p, n)
            jg = np.array(tb.jac_g(xl, t), dtype=float).reshape(m, n)
            sh = lam + rho * h
            sg = np.maximum(0.0, mu - rho * g)
            value = (
                -tb.phi(xl, t)[0]
                + lam @ h
                + 0.5 * rho * (h @ h)
                + (sg @ sg - mu @ mu) / (2.0 * rho)
            )
            grad = -np.array(tb.grad_phi(xl, t), dtype=float) + jh.T @ sh - jg.T @ sg
            return value, grad

        res = scipy.optimize.minimize(
            merit,
            z,
            jac=True,
            method="BFGS",
            options={"gtol": opts.gtol, "maxiter": 200 * (n + 1)},
        )
        if not np.all(np.isfinite(res.x)):
            break
        z = res.x
        zl = z.tolist()
        h = np.array(tb.h(zl, t), dtype=float)
        g = np.array(tb.g(zl, t), dtype=float)
        infeas = _infeasibility(h, g)
        gap = infeas
        if m:
            gap = max(gap, float(np.max(np.abs(np.minimum(g, mu)))))
        lam = lam + rho * h
        mu = np.maximum(0.0, mu - rho * g)
        if gap <= opts.tol_feas:
            break
        rho *= opts.growth

    zl = z.tolist()
    return _Local(
        z=z,
        phi=tb.phi(zl, t)[0],
        infeasibility=_infeasibility(
            np.array(tb.h(zl, t), dtype=float), np.array(tb.g(zl, t), dtype=float)
        ),
    )


def _node_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k]))


def _starts(n: int, opts: SolveOptions, rng: np.random.Generator, warm=None):
    if warm is not None:
        yield np.asarray(warm, dtype=float)
    for _ in range(opts.starts):
        yield rng.uniform(-opts.box, opts.box, size=n)


def _solve_node(problem, t, opts, rng, warm=None) -> Tuple[Optional[_Local], float, np.ndarray]:
    """(best feasible local maximizer or None, best infeasibility, least infeasible z)."""
    best = None
    closest, closest_z = math.inf, np.zeros(problem.n)
    for z0 in _starts(problem.n, opts, rng, warm):
        try:
            local = _augmented_lagrangian(problem, t, z0, opts)
        except ExprDomainError as err:
            log.debug(f"Start abandoned at t = {t}: {err}")
            continue
        if local.infeasibility < closest:
            closest, closest_z = local.infeasibility, local.z
        if local.infeasibility > opts.tol_feas or not math.isfinite(local.phi):
            continue
        # exact ties go to the lexicographically smallest z
        if best is None or (-local.phi, tuple(local.z)) < (-best.phi, tuple(best.z)):
            best = local
    return best, closest, closest_z


def solve_pointwise(
    problem: Problem,
    t: float,
    opts: SolveOptions = SolveOptions(),
    node: int = 0,
    warm=None,
) -> np.ndarray:
    """Best feasible local maximizer of phi(., t) over all starts."""
    best, closest, _ = _solve_node(problem, t, opts, _node_rng(opts.seed, node), warm)
    if best is None:
        raise SolverError(
            f"no feasible point found at t = {t} "
            f"(best infeasibility {closest:.3e})",
            best_infeasibility=closest,
        )
    return best.z


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: Trajectory
    failed: np.ndarray  # bool per node
    infeasibility: np.ndarray

    @property
    def complete(self) -> bool:
        return not bool(np.any(self.failed))


def solve_trajectory(
    problem: Problem, grid: TimeGrid, opts: SolveOptions = SolveOptions()
) -> SolveResult:
    """
    Solve every node, warm-starting from the previous node. Problems that
    do not reference t are solved once and the solution replicated.
    """
    N, n = grid.N, problem.n
    values = np.zeros((N, n))
    failed = np.zeros(N, dtype=bool)
    infeas = np.zeros(N)

    if problem.is_autonomous:
        log.info("Objective and constraints do not depend on t; solving once")
        best, closest, closest_z = _solve_node(
            problem, float(grid.nodes[0]), opts, _node_rng(opts.seed, 0)
        )
        z = best.z if best is not None else closest_z
        values[:] = z
        failed[:] = best is None
        infeas[:] = best.infeasibility if best is not None else closest
    else:
        warm = None
        for k, t in enumerate(grid.nodes):
            best, closest, closest_z = _solve_node(
                problem, float(t), opts, _node_rng(opts.seed, k), warm
            )
            if best is None:
                values[k], failed[k], infeas[k] = closest_z, True, closest
            else:
                values[k], infeas[k] = best.z, best.infeasibility
                warm = best.z

    if failed.any():
        log.warning(f"{int(failed.sum())} of {N} nodes unsolved")
    return SolveResult(trajectory_from_values(grid, values), failed, infeas)


@dataclass(frozen=True, eq=False)
class Certification:
    first_order: FirstOrderCertificate
    second_order: Optional[SecondOrderCertificate]
    refutation: Optional[RefutationWitness]

    @property
    def certified(self) -> bool:
        return (
            self.first_order.passed
            and self.second_order is not None
            and self.second_order.passed
        )


def certify_trajectory(
    problem: Problem, trajectory: Trajectory, opts: CertifyOptions = CertifyOptions()
) -> Certification:
    """First order, then second order, then a refutation attempt on failure."""
    first = first_order_certificate(problem, trajectory, opts)
    second = None
    if first.multipliers is not None:
        second = second_order_certificate(
            problem, trajectory, first.multipliers, opts,
            evals=first.evals, tol_stat=first.tol_stat,
        )
    cert = Certification(first, second, None)
    if first.feasible and not cert.certified:
        try:
            witness = refute_optimality(problem, trajectory, opts, first)
        except CtkktError as err:
            log.warning(f"Refutation skipped: {err}")
            witness = None
        cert = Certification(first, second, witness)
    return cert


@dataclass(frozen=True, eq=False)
class CertifiedSolution:
    solve: SolveResult
    certification: Certification

    @property
    def trajectory(self) -> Trajectory:
        return self.solve.trajectory

    @property
    def first_order(self) -> FirstOrderCertificate:
        return self.certification.first_order

    @property
    def second_order(self) -> Optional[SecondOrderCertificate]:
        return self.certification.second_order

    @property
    def refutation(self) -> Optional[RefutationWitness]:
        return self.certification.refutation


def certified_solve(
    problem: Problem, opts: SolveOptions = SolveOptions()
) -> CertifiedSolution:
    """Solve every node, then certify the assembled trajectory."""
    grid = build_grid(problem.T, opts.grid)
    result = solve_trajectory(problem, grid, opts)
    if result.failed.all():
        best = float(result.infeasibility.min())
        raise SolverError(
            f"no feasible point found at any node (best infeasibility {best:.3e})",
            best_infeasibility=best,
        )
    return CertifiedSolution(result, certify_trajectory(problem, result.trajectory, opts.certify))
