"""
Optimality refutation.

A feasible trajectory is not locally optimal when some bounded direction
gamma has positive ascent integral, int grad phi' gamma dt > 0, and a
step z + tau gamma stays feasible. Directions come from two places: the
increase directions of active constraints carrying a negative multiplier,
and the projection of grad phi onto the tangent space.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ctkkt import log
from ctkkt.core.certify import (
    FirstOrderCertificate,
    build_upsilon,
    first_order_certificate,
)
from ctkkt.core.exceptions import (
    CQFailure,
    DimensionError,
    ExprDomainError,
    InactiveConstraintError,
    InfeasibleError,
)
from ctkkt.core.model import (
    FeasibilityReport,
    PointEval,
    Problem,
    Trajectory,
    check_feasibility,
    integrate,
    objective_value,
    trajectory_from_values,
)
from ctkkt.core.numkern import gram_det, min_norm_lsq
from ctkkt.core.options import CertifyOptions
from ctkkt.core.soc import tangent_basis


@dataclass(frozen=True, eq=False)
class RefutationWitness:
    source: str  # "negative_multiplier" | "stationarity_residual"
    constraint: Optional[int]  # 0-based g index for negative_multiplier
    support: Tuple[int, ...]  # nodes where the direction is nonzero
    direction: np.ndarray  # N x n
    ascent: float
    tau: float
    improved: Trajectory
    objective_before: float
    objective_after: float
    feasibility: FeasibilityReport

    @property
    def gain(self) -> float:
        return self.objective_after - self.objective_before

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "constraint": None if self.constraint is None else self.constraint + 1,
            "support_nodes": len(self.support),
            "ascent_integral": self.ascent,
            "tau": self.tau,
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "gain": self.gain,
            "direction_sup": float(np.max(np.abs(self.direction))),
            "feasibility": self.feasibility.to_dict(),
        }


def increase_direction(
    pe: PointEval, k: int, tol_ineq: Optional[float] = None
) -> np.ndarray:
    """
    gamma = first n entries of Upsilon' (Upsilon Upsilon')^-1 b with b = e_(p+k).
    gamma keeps grad h and the other active g_j stationary while
    grad g_k' gamma = 1.
    """
    if k not in pe.active:
        raise InactiveConstraintError(
            f"g{k + 1} = {pe.g[k]:.3e} is not active at t = {pe.t}"
        )
    upsilon = build_upsilon(pe, tol_ineq)
    # active slacks are zero; the band only serves activity detection
    for j in pe.active:
        upsilon[pe.p + j, pe.n + j] = 0.0
    report = gram_det(upsilon)
    if not report.full_row_rank:
        raise CQFailure(
            f"Upsilon has rank {report.rank} < {report.shape[0]} at t = {pe.t}",
            report=report,
            t=pe.t,
        )
    b = np.zeros(pe.p + pe.m)
    b[pe.p + k] = 1.0
    return min_norm_lsq(upsilon, b)[: pe.n]


def ascent_integral(
    problem: Problem, trajectory: Trajectory, direction: np.ndarray
) -> float:
    """int grad phi(z(t), t)' gamma(t) dt by the trapezoid rule."""
    direction = np.asarray(direction, dtype=float)
    if direction.shape != trajectory.values.shape:
        raise DimensionError(
            f"direction has shape {direction.shape}, "
            f"trajectory {trajectory.values.shape}"
        )
    grad = problem.tables.grad_phi
    slopes = [
        float(np.dot(grad(z.tolist(), t), direction[k]))
        for k, t, z in trajectory.points()
    ]
    return integrate(trajectory.grid, slopes)


def _negative_multiplier_directions(
    cert: FirstOrderCertificate, n: int, opts: CertifyOptions
) -> List[Tuple[str, Optional[int], np.ndarray]]:
    out = []
    for j, nodes in cert.negative_multipliers().items():
        gamma = np.zeros((len(cert.evals), n))
        for k in nodes:
            try:
                gamma[k] = increase_direction(cert.evals[k], j, opts.tol_ineq)
            except (CQFailure, InactiveConstraintError) as err:
                log.debug(f"No increase direction for g{j + 1} at node {k}: {err}")
        if np.any(gamma):
            out.append(("negative_multiplier", j, gamma))
    return out


def _residual_direction(cert: FirstOrderCertificate) -> np.ndarray:
    rows = []
    for pe in cert.evals:
        B = tangent_basis(pe)
        rows.append(B @ (B.T @ pe.grad_phi))
    return np.array(rows, dtype=float)


def _line_search(problem, trajectory, gamma, base, opts):
    for i in range(opts.halvings + 1):
        tau = opts.sigma0 / 2.0 ** i
        trial = trajectory_from_values(trajectory.grid, trajectory.values + tau * gamma)
        try:
            feas = check_feasibility(problem, trial, opts.tol_eq, opts.tol_ineq)
            if not feas.passed:
                continue
            value = objective_value(problem, trial)
        except ExprDomainError:
            continue
        if value > base + opts.tol_gain:
            return tau, trial, value, feas
    return None


def refute_optimality(
    problem: Problem,
    trajectory: Trajectory,
    opts: CertifyOptions = CertifyOptions(),
    first_order: Optional[FirstOrderCertificate] = None,
) -> Optional[RefutationWitness]:
    """
    Search for a feasible trajectory with strictly larger objective.
    Returns None when neither direction source yields one.
    """
    cert = first_order
    if cert is None:
        cert = first_order_certificate(problem, trajectory, opts)
    if not cert.feasible:
        raise InfeasibleError("refutation needs a feasible trajectory")

    candidates = _negative_multiplier_directions(cert, problem.n, opts)
    candidates.append(("stationarity_residual", None, _residual_direction(cert)))

    base = objective_value(problem, trajectory)
    for source, j, gamma in candidates:
        ascent = ascent_integral(problem, trajectory, gamma)
        if not ascent > opts.tol_gain:
            continue
        found = _line_search(problem, trajectory, gamma, base, opts)
        if found is None:
            log.debug(f"Line search failed along {source} direction")
            continue
        tau, improved, value, feas = found
        witness = RefutationWitness(
            source=source,
            constraint=j,
            support=tuple(int(k) for k in np.flatnonzero(np.any(gamma != 0, axis=1))),
            direction=gamma,
            ascent=ascent,
            tau=tau,
            improved=improved,
            objective_before=base,
            objective_after=value,
            feasibility=feas,
        )
        if witness.feasibility.passed and witness.gain > 0:
            log.info(
                f"Refuted along {source} direction: tau = {tau:g}, "
                f"gain {witness.gain:.6g}"
            )
            return witness
    return None
