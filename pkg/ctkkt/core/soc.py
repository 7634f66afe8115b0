"""
Second-order necessary condition.

At every node the Lagrangian Hessian

    H(t) = grad^2 phi + sum_i u_i grad^2 h_i + sum_j v_j grad^2 g_j

must be negative semidefinite on the tangent space of the active
constraints. The pointwise matrix test is the verdict; the integral form
over sampled test directions and the slack-lifted form are reported as
cross-checks.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ctkkt import log
from ctkkt.core.certify import MultiplierTrajectory, build_upsilon
from ctkkt.core.exceptions import CtkktError, DimensionError
from ctkkt.core.model import (
    PointEval,
    Problem,
    Trajectory,
    evaluate_trajectory,
    integrate,
    trajectory_eps_act,
)
from ctkkt.core.numkern import max_eig_sym, nullspace_basis, project_sym
from ctkkt.core.options import CertifyOptions


def lagrangian_hessian(pe: PointEval, u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u.shape[0] != pe.p or v.shape[0] != pe.m:
        raise DimensionError(
            f"multipliers of length ({u.shape[0]}, {v.shape[0]}), "
            f"expected ({pe.p}, {pe.m})"
        )
    H = pe.hess_phi.copy()
    if pe.p:
        H += np.tensordot(u, pe.hess_h, axes=1)
    if pe.m:
        H += np.tensordot(v, pe.hess_g, axes=1)
    return 0.5 * (H + H.T)


def tangent_basis(pe: PointEval, active: Optional[Sequence[int]] = None) -> np.ndarray:
    """Orthonormal basis of {gamma : grad h gamma = 0, grad g_A gamma = 0}."""
    if active is None:
        stack = pe.active_stack()
    else:
        stack = np.vstack([pe.jac_h, pe.jac_g[list(active)]])
    return nullspace_basis(stack.reshape(-1, pe.n))


def _tol_psd(H: np.ndarray, opts: CertifyOptions) -> float:
    if opts.tol_psd is not None:
        return opts.tol_psd
    return opts.tol_psd_rel * (1.0 + float(np.linalg.norm(H, 2)))


# ===== Cross-checks =====

@dataclass(frozen=True)
class SampledIntegralReport:
    samples: int
    seed: int
    max_value: float  # max over samples of int gamma' H gamma
    max_normalized: float  # same, over T * sup|gamma|^2
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_normalized <= self.tol

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "max_value": self.max_value,
            "max_normalized": self.max_normalized,
            "tol": self.tol,
            "passed": self.passed,
        }


def _node_data(evals, multipliers, skip):
    bases, hessians = [], []
    for k, pe in enumerate(evals):
        H = lagrangian_hessian(pe, multipliers.u[k], multipliers.v[k])
        B = tangent_basis(pe) if k not in skip else np.zeros((pe.n, 0))
        bases.append(B)
        hessians.append(H)
    return bases, hessians


def sampled_integral_check(
    problem: Problem,
    trajectory: Trajectory,
    multipliers: MultiplierTrajectory,
    samples: int = 100,
    seed: int = 0,
    evals: Optional[Sequence[PointEval]] = None,
    opts: CertifyOptions = CertifyOptions(),
    skip: Sequence[int] = (),
) -> SampledIntegralReport:
    """
    Draw gamma(t_k) = B_k c_k with standard normal c_k in each tangent basis
    B_k and evaluate the integral of gamma' H gamma by the trapezoid rule.
    """
    if evals is None:
        evals = evaluate_trajectory(problem, trajectory, opts.eps_act)
    bases, hessians = _node_data(evals, multipliers, set(skip))
    grid = trajectory.grid
    tol = max(_tol_psd(H, opts) for H in hessians)
    rng = np.random.default_rng(seed)
    max_value, max_normalized = -math.inf, -math.inf
    for _ in range(samples):
        quad = np.zeros(grid.N)
        sup2 = 0.0
        for k, (B, H) in enumerate(zip(bases, hessians)):
            c = rng.standard_normal(B.shape[1])
            gamma = B @ c
            quad[k] = gamma @ H @ gamma
            sup2 = max(sup2, float(gamma @ gamma))
        value = integrate(grid, quad)
        max_value = max(max_value, value)
        max_normalized = max(
            max_normalized, value / (grid.T * sup2) if sup2 > 0 else 0.0
        )
    if samples == 0:
        max_value = max_normalized = 0.0
    return SampledIntegralReport(samples, seed, max_value, max_normalized, tol)


@dataclass(frozen=True)
class SlackSecondOrderReport:
    max_eig: Tuple[float, ...]  # per node; -inf when the null space is trivial
    tol: Tuple[float, ...]

    @property
    def worst(self) -> float:
        return max(self.max_eig, default=-math.inf)

    @property
    def passed(self) -> bool:
        return all(lam <= tol for lam, tol in zip(self.max_eig, self.tol))

    def to_dict(self) -> dict:
        return {
            "worst_eig": None if math.isinf(self.worst) else self.worst,
            "passed": self.passed,
        }


def slack_second_order_check(
    problem: Problem,
    trajectory: Trajectory,
    multipliers: MultiplierTrajectory,
    evals: Optional[Sequence[PointEval]] = None,
    opts: CertifyOptions = CertifyOptions(),
    skip: Sequence[int] = (),
) -> SlackSecondOrderReport:
    """
    The same test in the lifted (z, w) space: blockdiag(H, diag(-2 v))
    projected onto ker Upsilon(t).
    """
    if evals is None:
        evals = evaluate_trajectory(problem, trajectory, opts.eps_act)
    skip = set(skip)
    eigs, tols = [], []
    for k, pe in enumerate(evals):
        if k in skip:
            continue
        H = lagrangian_hessian(pe, multipliers.u[k], multipliers.v[k])
        lifted = scipy.linalg.block_diag(H, np.diag(-2.0 * multipliers.v[k]))
        upsilon = build_upsilon(pe, opts.tol_ineq)
        B = nullspace_basis(upsilon.reshape(-1, pe.n + pe.m))
        eigs.append(max_eig_sym(project_sym(lifted, B)) if B.shape[1] else -math.inf)
        tols.append(_tol_psd(lifted, opts))
    return SlackSecondOrderReport(tuple(eigs), tuple(tols))


# ===== Certificate =====

@dataclass(frozen=True, eq=False)
class SecondOrderCertificate:
    tangent_dim: Tuple[int, ...]
    max_eig: Tuple[Optional[float], ...]  # None for excluded nodes, -inf vacuous
    tol_psd: Tuple[Optional[float], ...]
    excluded: Tuple[int, ...]
    sensitive: Tuple[int, ...]
    nodes: Tuple[float, ...] = field(repr=False)
    sampled: Optional[SampledIntegralReport] = None
    slack: Optional[SlackSecondOrderReport] = None

    @property
    def vacuous(self) -> Tuple[int, ...]:
        return tuple(
            k for k, d in enumerate(self.tangent_dim)
            if d == 0 and k not in self.excluded
        )

    def _checked(self):
        return [
            (k, lam) for k, lam in enumerate(self.max_eig)
            if lam is not None and not math.isinf(lam)
        ]

    @property
    def worst_eig(self) -> float:
        checked = self._checked()
        return max((lam for _, lam in checked), default=-math.inf)

    @property
    def worst_node(self) -> Optional[int]:
        checked = self._checked()
        if not checked:
            return None
        return max(checked, key=lambda item: item[1])[0]

    @property
    def passed(self) -> bool:
        return all(
            lam <= tol
            for lam, tol in zip(self.max_eig, self.tol_psd)
            if lam is not None
        )

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        worst = self.worst_node
        return {
            "verdict": self.verdict,
            "worst_eig": None if worst is None else self.worst_eig,
            "worst_node": worst,
            "worst_t": None if worst is None else self.nodes[worst],
            "tangent_dim": list(self.tangent_dim),
            "vacuous_nodes": len(self.vacuous),
            "excluded_nodes": list(self.excluded),
            "sensitive_nodes": list(self.sensitive),
            "sampled_integral": self.sampled.to_dict() if self.sampled else None,
            "slack_lifted": self.slack.to_dict() if self.slack else None,
        }


def second_order_certificate(
    problem: Problem,
    trajectory: Trajectory,
    multipliers: Optional[MultiplierTrajectory],
    opts: CertifyOptions = CertifyOptions(),
    evals: Optional[List[PointEval]] = None,
    tol_stat: Optional[float] = None,
) -> SecondOrderCertificate:
    """
    lambda_max(B' H B) at every node, B the tangent basis. Nodes whose
    stationarity residual exceeds tol_stat are excluded and flagged.
    """
    if multipliers is None:
        raise CtkktError("second-order test needs the first-order multipliers")
    if evals is None:
        eps_act = opts.eps_act
        if eps_act is None:
            eps_act = trajectory_eps_act(problem, trajectory, opts.eps_act_rel)
        evals = evaluate_trajectory(problem, trajectory, eps_act)
    if tol_stat is None:
        tol_stat = opts.tol_stat
    if tol_stat is None:
        K_phi = max(float(np.linalg.norm(pe.grad_phi)) for pe in evals)
        tol_stat = opts.tol_stat_rel * (1.0 + K_phi)

    dims, eigs, tols, excluded, sensitive = [], [], [], [], []
    for k, pe in enumerate(evals):
        if pe.active_at(10.0 * pe.eps_act) != pe.active:
            sensitive.append(k)
        if multipliers.residual[k] > tol_stat:
            excluded.append(k)
            dims.append(0)
            eigs.append(None)
            tols.append(None)
            continue
        H = lagrangian_hessian(pe, multipliers.u[k], multipliers.v[k])
        B = tangent_basis(pe)
        dims.append(B.shape[1])
        eigs.append(max_eig_sym(project_sym(H, B)) if B.shape[1] else -math.inf)
        tols.append(_tol_psd(H, opts))

    if excluded:
        log.warning(f"{len(excluded)} nodes excluded from the second-order test")
    if sensitive:
        log.warning(
            f"Active set changes within 10 eps_act at {len(sensitive)} nodes"
        )
    sampled = sampled_integral_check(
        problem, trajectory, multipliers, opts.soc_samples, opts.seed,
        evals=evals, opts=opts, skip=excluded,
    )
    slack = slack_second_order_check(
        problem, trajectory, multipliers, evals=evals, opts=opts, skip=excluded
    )
    cert = SecondOrderCertificate(
        tangent_dim=tuple(dims),
        max_eig=tuple(eigs),
        tol_psd=tuple(tols),
        excluded=tuple(excluded),
        sensitive=tuple(sensitive),
        nodes=tuple(pe.t for pe in evals),
        sampled=sampled,
        slack=slack,
    )
    log.info(
        f"Second order: worst eigenvalue {cert.worst_eig:.3e}, "
        f"{len(cert.vacuous)} vacuous nodes, verdict {cert.verdict}"
    )
    return cert
