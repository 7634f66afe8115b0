"""
First-order certification.

Constraint-qualification diagnostics on the Gram determinants of the
equality Jacobian and of the slack-lifted matrix

    Upsilon(t) = [[grad h(t),          0          ],
                  [grad g(t), diag(-2 w_j(t))     ]],   w_j = sqrt(g_j)

followed by the multiplier solve on the active stack [grad h; grad g_A]
and the stationarity, sign and complementarity residuals.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ctkkt import K_MIN, TOL_INEQ, log
from ctkkt.core.exceptions import (
    CQFailure,
    DimensionError,
    InfeasibleError,
)
from ctkkt.core.model import (
    FeasibilityReport,
    PointEval,
    Problem,
    TimeGrid,
    Trajectory,
    check_feasibility,
    evaluate_trajectory,
    trajectory_eps_act,
)
from ctkkt.core.numkern import (
    GramReport,
    gram_det,
    inverse_norm_bound,
    max_eig_sym,
    min_norm_lsq,
    numerical_rank,
    singular_values,
)
from ctkkt.core.options import CertifyOptions


def _none_if_inf(x: float):
    return None if x is None or math.isinf(x) or math.isnan(x) else x


# ===== Multipliers =====

@dataclass(frozen=True, eq=False)
class MultiplierTrajectory:
    grid: TimeGrid
    u: np.ndarray  # N x p
    v: np.ndarray  # N x m
    residual: np.ndarray  # stationarity residual per node
    unique: np.ndarray  # bool per node

    def __post_init__(self):
        N = self.grid.N
        if self.u.shape[0] != N or self.v.shape[0] != N:
            raise DimensionError("multiplier rows do not match the grid")
        if not np.all(np.isfinite(self.v)) or not np.all(np.isfinite(self.u)):
            raise DimensionError("multipliers must be finite")

    @property
    def p(self) -> int:
        return self.u.shape[1]

    @property
    def m(self) -> int:
        return self.v.shape[1]

    @property
    def sup_u(self) -> float:
        return float(np.max(np.linalg.norm(self.u, axis=1))) if self.p else 0.0

    @property
    def sup_v(self) -> float:
        return float(np.max(np.linalg.norm(self.v, axis=1))) if self.m else 0.0

    def sample(self, k: int) -> dict:
        return {
            "node": k,
            "t": float(self.grid.nodes[k]),
            "u": [float(x) for x in self.u[k]],
            "v": [float(x) for x in self.v[k]],
        }


@dataclass(frozen=True, eq=False)
class KKTSolution:
    u: np.ndarray
    v: np.ndarray
    residual: float
    unique: bool
    rank: int


def equality_multipliers(pe: PointEval) -> np.ndarray:
    """u = -(grad h grad h')^-1 grad h grad phi, via the least-squares solve."""
    if pe.p == 0:
        return np.zeros(0)
    report = gram_det(pe.jac_h)
    if not report.full_row_rank:
        raise CQFailure(
            f"equality Jacobian has rank {report.rank} < p = {pe.p} at t = {pe.t}",
            report=report,
            t=pe.t,
        )
    return min_norm_lsq(pe.jac_h.T, -pe.grad_phi)


def kkt_multipliers(pe: PointEval) -> KKTSolution:
    """
    Solve [grad h' grad g_A'] (u, v_A) = -grad phi in the least-squares sense.
    Inactive v_j are exactly zero. A rank-deficient stack returns the
    minimal-norm representative with unique=False.
    """
    M = pe.active_stack()
    x = min_norm_lsq(M.T, -pe.grad_phi)
    u = x[: pe.p]
    v = np.zeros(pe.m)
    v[list(pe.active)] = x[pe.p:]
    rank = numerical_rank(M) if M.shape[0] else 0
    residual = float(np.linalg.norm(pe.grad_phi + M.T @ x))
    return KKTSolution(u, v, residual, rank == M.shape[0], rank)


def slack_lift(pe: PointEval) -> np.ndarray:
    """Slack values w_j = sqrt(max(g_j, 0)) of the problem with g - w^2 = 0."""
    return np.sqrt(np.maximum(pe.g, 0.0))


def build_upsilon(pe: PointEval, tol_ineq: Optional[float] = None) -> np.ndarray:
    tol_ineq = TOL_INEQ if tol_ineq is None else tol_ineq
    if pe.m and float(np.min(pe.g)) < -tol_ineq:
        j = int(np.argmin(pe.g))
        raise InfeasibleError(
            f"g{j + 1} = {pe.g[j]:.3e} < -{tol_ineq:g} at t = {pe.t}"
        )
    p, m, n = pe.p, pe.m, pe.n
    top = np.hstack([pe.jac_h, np.zeros((p, m))])
    bottom = np.hstack([pe.jac_g, np.diag(-2.0 * slack_lift(pe))])
    return np.vstack([top, bottom]).reshape(p + m, n + m)


# ===== Constraint qualifications =====

@dataclass(frozen=True)
class CQReport:
    kind: str  # "H4" | "H7" | "LICQ-active"
    dets: Tuple[float, ...]  # per node; inf where the system is empty
    ranks: Tuple[int, ...]
    rows: Tuple[int, ...]
    spectral: Tuple[float, ...]  # largest singular value per node
    k_min: float
    nodes: Tuple[float, ...] = field(repr=False)
    q_active: Tuple[int, ...] = field(default=(), repr=False)
    q_inactive: Tuple[int, ...] = field(default=(), repr=False)

    @property
    def infimum(self) -> float:
        return min(self.dets, default=math.inf)

    @property
    def worst_node(self) -> Optional[int]:
        if not self.dets or math.isinf(self.infimum):
            return None
        return int(np.argmin(self.dets))

    @property
    def worst_t(self) -> Optional[float]:
        k = self.worst_node
        return None if k is None else self.nodes[k]

    @property
    def vacuous(self) -> bool:
        return all(r == 0 for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.infimum >= self.k_min

    @property
    def min_rank(self) -> Optional[int]:
        ranks = [rk for rk, r in zip(self.ranks, self.rows) if r]
        return min(ranks) if ranks else None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "infimum": _none_if_inf(self.infimum),
            "k_min": self.k_min,
            "worst_node": self.worst_node,
            "worst_t": self.worst_t,
            "min_rank": self.min_rank,
            "rows": max(self.rows, default=0),
            "max_sigma1": max(self.spectral, default=0.0),
            "det_per_node": [_none_if_inf(d) for d in self.dets],
            "rank_per_node": list(self.ranks),
        }
        if self.q_active:
            out["active_count"] = list(self.q_active)
            out["inactive_count"] = list(self.q_inactive)
        return out


def _gram_entry(M: np.ndarray) -> Tuple[float, int, int, float]:
    """(det, rank, rows, sigma_1) of M M'; more rows than columns is singular."""
    r, c = M.shape
    if r == 0:
        return math.inf, 0, 0, 0.0
    if r > c:
        s = singular_values(M)
        return 0.0, numerical_rank(M), r, float(s[0])
    g: GramReport = gram_det(M)
    return g.det, g.rank, r, g.spectral_norm


def _cq_report(kind, matrices, evals, k_min) -> CQReport:
    entries = [_gram_entry(M) for M in matrices]
    return CQReport(
        kind=kind,
        dets=tuple(e[0] for e in entries),
        ranks=tuple(e[1] for e in entries),
        rows=tuple(e[2] for e in entries),
        spectral=tuple(e[3] for e in entries),
        k_min=float(k_min),
        nodes=tuple(pe.t for pe in evals),
        q_active=tuple(len(pe.active) for pe in evals),
        q_inactive=tuple(pe.m - len(pe.active) for pe in evals),
    )


def _evals(problem, trajectory, evals):
    return evals if evals is not None else evaluate_trajectory(problem, trajectory)


def check_H4(
    problem: Problem,
    trajectory: Trajectory,
    k_min: Optional[float] = None,
    evals: Optional[Sequence[PointEval]] = None,
) -> CQReport:
    """Gram determinant of grad h at each node against K_min."""
    evals = _evals(problem, trajectory, evals)
    k_min = K_MIN if k_min is None else k_min
    return _cq_report("H4", [pe.jac_h for pe in evals], evals, k_min)


def check_H7(
    problem: Problem,
    trajectory: Trajectory,
    k_min: Optional[float] = None,
    evals: Optional[Sequence[PointEval]] = None,
    tol_ineq: Optional[float] = None,
) -> CQReport:
    """Gram determinant of Upsilon at each node against K_min."""
    evals = _evals(problem, trajectory, evals)
    k_min = K_MIN if k_min is None else k_min
    return _cq_report(
        "H7", [build_upsilon(pe, tol_ineq) for pe in evals], evals, k_min
    )


def check_licq(
    problem: Problem,
    trajectory: Trajectory,
    k_min: Optional[float] = None,
    evals: Optional[Sequence[PointEval]] = None,
) -> CQReport:
    """Linear independence of the active gradients [grad h; grad g_A]."""
    evals = _evals(problem, trajectory, evals)
    k_min = K_MIN if k_min is None else k_min
    return _cq_report(
        "LICQ-active", [pe.active_stack() for pe in evals], evals, k_min
    )


# ===== Multiplier bound =====

@dataclass(frozen=True)
class MultiplierBound:
    """sup |(u, v_A)| <= M K0 K_phi with M = max_r L^(r-1) / K."""

    K: float
    L: float
    M: float
    K0: float
    K_phi: float
    bound: float
    observed: float

    @property
    def holds(self) -> bool:
        return self.observed <= self.bound * (1.0 + 1e-9) + 1e-300

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "L": self.L,
            "M": self.M,
            "K0": self.K0,
            "K_phi": self.K_phi,
            "bound": self.bound,
            "observed": self.observed,
            "holds": self.holds,
        }


def multiplier_bound(
    evals: Sequence[PointEval], multipliers: MultiplierTrajectory
) -> Optional[MultiplierBound]:
    """
    Bound on the active-stack multipliers from the infimum Gram determinant
    K and the supremum sigma_1^2 = L over nodes. None when no node has an
    active row or the family is rank deficient.
    """
    grams = []
    for pe in evals:
        M = pe.active_stack()
        if 0 < M.shape[0] <= pe.n:
            grams.append(gram_det(M))
        elif M.shape[0] > pe.n:
            return None
    if not grams:
        return None
    K = min(g.det for g in grams)
    if not K > 0:
        return None
    L = max(g.spectral_norm ** 2 for g in grams)
    M = max(inverse_norm_bound(K, L, r) for r in {g.shape[0] for g in grams})
    K0 = max(g.spectral_norm for g in grams)
    K_phi = max(float(np.linalg.norm(pe.grad_phi)) for pe in evals)
    observed = max(
        float(np.hypot(np.linalg.norm(multipliers.u[k]), np.linalg.norm(multipliers.v[k])))
        for k in range(len(evals))
    )
    return MultiplierBound(K, L, M, K0, K_phi, M * K0 * K_phi, observed)


# ===== First-order certificate =====

@dataclass(frozen=True, eq=False)
class FirstOrderCertificate:
    feasibility: FeasibilityReport
    cq: Dict[str, CQReport]
    multipliers: Optional[MultiplierTrajectory]
    max_stationarity: Optional[float]
    tol_stat: Optional[float]
    max_complementarity: Optional[float]
    tol_comp: Optional[float]
    min_v: Optional[float]
    tol_sign: float
    bound: Optional[MultiplierBound]
    eps_act: Optional[float]
    K_phi: Optional[float]
    evals: Optional[List[PointEval]] = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.feasibility.passed

    @property
    def cq_passed(self) -> bool:
        return all(self.cq[k].passed for k in ("H4", "H7") if k in self.cq)

    @property
    def stationarity_passed(self) -> bool:
        return self.max_stationarity is not None and self.max_stationarity <= self.tol_stat

    @property
    def complementarity_passed(self) -> bool:
        return (
            self.max_complementarity is not None
            and self.max_complementarity <= self.tol_comp
        )

    @property
    def sign_passed(self) -> bool:
        return self.min_v is None or self.min_v >= -self.tol_sign

    @property
    def conditions_passed(self) -> bool:
        """Stationarity, complementarity and sign, regardless of CQ."""
        return (
            self.feasible
            and self.stationarity_passed
            and self.complementarity_passed
            and self.sign_passed
        )

    @property
    def passed(self) -> bool:
        return self.conditions_passed and self.cq_passed

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def negative_multipliers(self) -> Dict[int, Tuple[int, ...]]:
        """j -> nodes where v_j < -tol_sign."""
        if self.multipliers is None:
            return {}
        out = {}
        for j in range(self.multipliers.m):
            nodes = np.flatnonzero(self.multipliers.v[:, j] < -self.tol_sign)
            if nodes.size:
                out[j] = tuple(int(k) for k in nodes)
        return out

    def to_dict(self, sample_nodes: Sequence[int] = ()) -> dict:
        mult = self.multipliers
        return {
            "verdict": self.verdict,
            "stationarity": {
                "max_residual": self.max_stationarity,
                "tol": self.tol_stat,
                "passed": self.stationarity_passed,
            },
            "complementarity": {
                "max_residual": self.max_complementarity,
                "tol": self.tol_comp,
                "passed": self.complementarity_passed,
            },
            "sign": {
                "min_v": self.min_v,
                "tol": self.tol_sign,
                "passed": self.sign_passed,
                "negative": {
                    str(j + 1): list(nodes)
                    for j, nodes in self.negative_multipliers().items()
                },
            },
            "sup_u": mult.sup_u if mult is not None else None,
            "sup_v": mult.sup_v if mult is not None else None,
            "bound": self.bound.to_dict() if self.bound is not None else None,
            "non_unique_nodes": (
                [int(k) for k in np.flatnonzero(~mult.unique)] if mult is not None else []
            ),
            "eps_act": self.eps_act,
            "samples": [mult.sample(k) for k in sample_nodes] if mult is not None else [],
            "assumed": ["H2", "H3", "H5", "H6"],
        }


def first_order_certificate(
    problem: Problem,
    trajectory: Trajectory,
    opts: CertifyOptions = CertifyOptions(),
) -> FirstOrderCertificate:
    feasibility = check_feasibility(problem, trajectory, opts.tol_eq, opts.tol_ineq)
    if not feasibility.passed:
        log.warning(
            f"Trajectory infeasible: max|h| = {feasibility.max_abs_h:.3e}, "
            f"min g = {feasibility.min_g:.3e}"
        )
        return FirstOrderCertificate(
            feasibility=feasibility,
            cq={},
            multipliers=None,
            max_stationarity=None,
            tol_stat=None,
            max_complementarity=None,
            tol_comp=None,
            min_v=None,
            tol_sign=opts.tol_sign,
            bound=None,
            eps_act=None,
            K_phi=None,
        )

    eps_act = opts.eps_act
    if eps_act is None:
        eps_act = trajectory_eps_act(problem, trajectory, opts.eps_act_rel)
    evals = evaluate_trajectory(problem, trajectory, eps_act)

    cq = {
        "H4": check_H4(problem, trajectory, opts.k_min, evals),
        "H7": check_H7(problem, trajectory, opts.k_min, evals, opts.tol_ineq),
        "LICQ-active": check_licq(problem, trajectory, opts.k_min, evals),
    }
    for report in cq.values():
        if not report.passed:
            log.warning(
                f"{report.kind} fails: infimum det {report.infimum:.3e} "
                f"< {report.k_min:g} (rank {report.min_rank})"
            )

    sols = [kkt_multipliers(pe) for pe in evals]
    N = trajectory.grid.N
    multipliers = MultiplierTrajectory(
        grid=trajectory.grid,
        u=np.array([s.u for s in sols], dtype=float).reshape(N, problem.p),
        v=np.array([s.v for s in sols], dtype=float).reshape(N, problem.m),
        residual=np.array([s.residual for s in sols]),
        unique=np.array([s.unique for s in sols], dtype=bool),
    )
    non_unique = int(np.sum(~multipliers.unique))
    if non_unique:
        log.warning(f"Multipliers not unique at {non_unique} of {N} nodes")

    K_phi = max(float(np.linalg.norm(pe.grad_phi)) for pe in evals)
    tol_stat = opts.tol_stat
    if tol_stat is None:
        tol_stat = opts.tol_stat_rel * (1.0 + K_phi)
    comp = 0.0
    for pe, s in zip(evals, sols):
        if pe.m:
            comp = max(comp, float(np.max(np.abs(s.v * pe.g))))
    min_v = float(np.min(multipliers.v)) if problem.m else None
    tol_comp = max(eps_act, opts.tol_ineq) * (1.0 + multipliers.sup_v)

    cert = FirstOrderCertificate(
        feasibility=feasibility,
        cq=cq,
        multipliers=multipliers,
        max_stationarity=float(np.max(multipliers.residual)),
        tol_stat=float(tol_stat),
        max_complementarity=comp,
        tol_comp=float(tol_comp),
        min_v=min_v,
        tol_sign=opts.tol_sign,
        bound=multiplier_bound(evals, multipliers),
        eps_act=float(eps_act),
        K_phi=K_phi,
        evals=evals,
    )
    log.info(
        f"First order: stationarity {cert.max_stationarity:.3e} "
        f"(tol {cert.tol_stat:.1e}), verdict {cert.verdict}"
    )
    return cert


# ===== Unconstrained case =====

@dataclass(frozen=True)
class UnconstrainedCertificate:
    max_grad_norm: float
    tol_stat: float
    max_eig: float
    worst_node: int
    worst_t: float
    psd_margin: float  # max over nodes of lambda_max - tol_psd(node)

    @property
    def first_order_passed(self) -> bool:
        return self.max_grad_norm <= self.tol_stat

    @property
    def second_order_passed(self) -> bool:
        return self.psd_margin <= 0.0

    @property
    def passed(self) -> bool:
        return self.first_order_passed and self.second_order_passed

    def to_dict(self) -> dict:
        return {
            "max_grad_norm": self.max_grad_norm,
            "tol_stat": self.tol_stat,
            "max_eig": self.max_eig,
            "worst_node": self.worst_node,
            "worst_t": self.worst_t,
            "first_order_passed": self.first_order_passed,
            "second_order_passed": self.second_order_passed,
        }


def unconstrained_certificate(
    problem: Problem,
    trajectory: Trajectory,
    opts: CertifyOptions = CertifyOptions(),
) -> UnconstrainedCertificate:
    """grad phi = 0 and grad^2 phi negative semidefinite at every node."""
    if problem.p or problem.m:
        raise DimensionError(
            f"unconstrained_certificate needs p = m = 0, got p = {problem.p}, m = {problem.m}"
        )
    evals = evaluate_trajectory(problem, trajectory, 0.0)
    norms = [float(np.linalg.norm(pe.grad_phi)) for pe in evals]
    K_phi = max(norms)
    tol_stat = opts.tol_stat if opts.tol_stat is not None else opts.tol_stat_rel * (1.0 + K_phi)
    eigs, margins = [], []
    for pe in evals:
        lam = max_eig_sym(pe.hess_phi)
        tol_psd = opts.tol_psd
        if tol_psd is None:
            tol_psd = opts.tol_psd_rel * (1.0 + float(np.linalg.norm(pe.hess_phi, 2)))
        eigs.append(lam)
        margins.append(lam - tol_psd)
    k = int(np.argmax(eigs))
    return UnconstrainedCertificate(
        max_grad_norm=K_phi,
        tol_stat=float(tol_stat),
        max_eig=float(eigs[k]),
        worst_node=k,
        worst_t=evals[k].t,
        psd_margin=float(max(margins)),
    )
