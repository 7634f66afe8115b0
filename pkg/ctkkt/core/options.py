from dataclasses import dataclass
from typing import Optional, Tuple

from ctkkt import (
    AL_GROWTH,
    AL_OUTER,
    AL_PENALTY0,
    EPS_ACT_REL,
    GRID_NODES,
    INNER_GTOL,
    K_MIN,
    LS_HALVINGS,
    LS_SIGMA0,
    SEED,
    SOC_SAMPLES,
    SOLVER_TOL_FEAS,
    START_BOX,
    STARTS,
    TOL_EQ,
    TOL_GAIN,
    TOL_INEQ,
    TOL_PSD_REL,
    TOL_SIGN,
    TOL_STAT_REL,
)


@dataclass(frozen=True)
class CertifyOptions:
    """
    Tolerances of the certification pipeline. `eps_act`, `tol_stat` and
    `tol_psd` are absolute overrides; when None the relative defaults
    apply (see the *_rel fields).
    """

    grid: int = GRID_NODES
    tol_eq: float = TOL_EQ
    tol_ineq: float = TOL_INEQ
    tol_sign: float = TOL_SIGN
    k_min: float = K_MIN
    eps_act: Optional[float] = None
    eps_act_rel: float = EPS_ACT_REL
    tol_stat: Optional[float] = None
    tol_stat_rel: float = TOL_STAT_REL
    tol_psd: Optional[float] = None
    tol_psd_rel: float = TOL_PSD_REL
    sigma0: float = LS_SIGMA0
    halvings: int = LS_HALVINGS
    tol_gain: float = TOL_GAIN
    soc_samples: int = SOC_SAMPLES
    seed: int = SEED
    sample_times: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class SolveOptions:
    grid: int = GRID_NODES
    starts: int = STARTS
    seed: int = SEED
    box: float = START_BOX
    penalty0: float = AL_PENALTY0
    growth: float = AL_GROWTH
    outer: int = AL_OUTER
    gtol: float = INNER_GTOL
    tol_feas: float = SOLVER_TOL_FEAS
    certify: CertifyOptions = CertifyOptions()
