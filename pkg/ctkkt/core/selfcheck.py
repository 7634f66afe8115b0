"""
Built-in sweeps run by `ctkkt selftest`:

* symbolic gradients and Hessians against central finite differences,
* the inverse-norm bound L^(p-1)/K on random Gram matrices,
* the defining conditions of the increase directions.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ctkkt import log
from ctkkt.core.exceptions import ExprDomainError
from ctkkt.core.exprdsl import compile_exprs, differentiate, gradient, hessian
from ctkkt.core.improve import increase_direction
from ctkkt.core.model import PointEval
from ctkkt.core.numkern import gram_det, inverse_norm_bound, singular_values
from ctkkt.utils.exprgen import random_expr

FD_STEP = 1e-6
FD_RTOL = 1e-5
MIXED_RTOL = 1e-7
LEMMA_TOL = 1e-9


@dataclass(frozen=True)
class SweepResult:
    name: str
    cases: int
    failures: int
    worst: float
    skipped: int = 0
    first_failure: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.cases > 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cases": self.cases,
            "failures": self.failures,
            "skipped": self.skipped,
            "worst": self.worst,
            "passed": self.passed,
        }


def _central(f, x: np.ndarray, i: int, t: float, step: float):
    """Central difference along coordinate i (i = n means t)."""
    n = x.shape[0]
    xp, xm = x.copy(), x.copy()
    tp = tm = t
    if i < n:
        xp[i] += step
        xm[i] -= step
    else:
        tp, tm = t + step, t - step
    fp = np.array(f(xp.tolist(), tp), dtype=float)
    fm = np.array(f(xm.tolist(), tm), dtype=float)
    return (fp - fm) / (2.0 * step)


def derivative_sweep(count: int = 1000, seed: int = 0, depth: int = 3) -> SweepResult:
    """Gradient and Hessian of random expressions against finite differences."""
    rng = np.random.default_rng(seed)
    failures, skipped, worst = 0, 0, 0.0
    first = None
    for case in range(count):
        n = int(rng.integers(1, 4))
        e = random_expr(rng, n, depth)
        z = rng.uniform(-1.0, 1.0, size=n)
        t = float(rng.uniform(0.0, 1.0))
        grad = gradient(e, n)
        hess = hessian(e, n)
        symmetric = all(hess[i][j] == hess[j][i] for i in range(n) for j in range(n))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        # d/dz_i of grad_j, built apart from hess[i][j] = d/dz_j of grad_i
        swapped = [differentiate(grad[j], i + 1) for i, j in pairs]
        f = compile_exprs([e])
        fg = compile_exprs(grad)
        fh = compile_exprs([d for row in hess for d in row])
        fs = compile_exprs(swapped)
        try:
            g_sym = np.array(fg(z.tolist(), t), dtype=float)
            h_sym = np.array(fh(z.tolist(), t), dtype=float).reshape(n, n)
            g_fd = np.array([_central(f, z, i, t, FD_STEP)[0] for i in range(n)])
            h_fd = np.array([_central(fg, z, i, t, FD_STEP) for i in range(n)])
            s_sym = np.array(fs(z.tolist(), t), dtype=float)
        except ExprDomainError:
            skipped += 1
            continue
        err = max(
            float(np.max(np.abs(g_sym - g_fd) / (1.0 + np.abs(g_sym)))),
            float(np.max(np.abs(h_sym - h_fd) / (1.0 + np.abs(h_sym)))),
        )
        mixed = 0.0
        if pairs:
            upper = np.array([h_sym[i, j] for i, j in pairs])
            scale = 1.0 + float(np.max(np.abs(h_sym)))
            mixed = float(np.max(np.abs(upper - s_sym))) / scale
        worst = max(worst, err)
        if err > FD_RTOL or mixed > MIXED_RTOL or not symmetric:
            failures += 1
            if first is None:
                first = (
                    f"case {case}: {e} (error {err:.3e}, mixed partials {mixed:.3e}, "
                    f"symmetric {symmetric})"
                )
    return SweepResult("derivatives", count - skipped, failures, worst, skipped, first)


def inverse_bound_sweep(count: int = 500, seed: int = 0) -> SweepResult:
    """
    For random r x c matrices M with det(M M') >= K^2 and |M| <= L, the
    inverse of M M' obeys |(M M')^-1| <= L^(2(r-1)) / K^2.
    """
    rng = np.random.default_rng(seed)
    failures, worst = 0, 0.0
    first = None
    for case in range(count):
        r = int(rng.integers(1, 7))
        c = int(rng.integers(r, 8))
        M = rng.standard_normal((r, c))
        s = singular_values(M)
        if s[-1] < 1e-3:
            M[:, :r] += np.eye(r)
            s = singular_values(M)
        L = float(s[0]) * (1.0 + 1e-9)
        K = float(np.prod(s)) * (1.0 - 1e-9)
        gram = M @ M.T
        inv_norm = float(np.linalg.norm(np.linalg.inv(gram), 2))
        bound = inverse_norm_bound(K * K, L * L, r)
        ratio = inv_norm / bound
        worst = max(worst, ratio)
        if inv_norm > bound:
            failures += 1
            if first is None:
                first = f"case {case}: {inv_norm:.6e} > {bound:.6e}"
    return SweepResult("inverse_norm_bound", count, failures, worst, 0, first)


def synthetic_point(jac_h: np.ndarray, jac_g: np.ndarray, g: np.ndarray, grad_phi=None) -> PointEval:
    """PointEval carrying only first-order data; active set is {j : g_j <= 0}."""
    p, n = jac_h.shape
    m = jac_g.shape[0]
    return PointEval(
        t=0.0,
        z=np.zeros(n),
        phi=0.0,
        grad_phi=np.zeros(n) if grad_phi is None else np.asarray(grad_phi, dtype=float),
        hess_phi=np.zeros((n, n)),
        h=np.zeros(p),
        jac_h=jac_h.reshape(p, n),
        hess_h=np.zeros((p, n, n)),
        g=np.asarray(g, dtype=float),
        jac_g=jac_g.reshape(m, n),
        hess_g=np.zeros((m, n, n)),
        active=tuple(int(j) for j in np.flatnonzero(np.asarray(g) <= 0.0)),
        eps_act=0.0,
    )


def random_regular_point(rng: np.random.Generator) -> PointEval:
    """Random node whose active stack [grad h; grad g_A] has full row rank."""
    while True:
        n = int(rng.integers(2, 7))
        p = int(rng.integers(0, n))
        q = int(rng.integers(1, n - p + 1))
        r = int(rng.integers(0, 3))
        jac_h = rng.standard_normal((p, n))
        jac_g = rng.standard_normal((q + r, n))
        g = np.concatenate([np.zeros(q), rng.uniform(0.5, 2.0, size=r)])
        if gram_det(np.vstack([jac_h, jac_g[:q]])).det >= 1e-6:
            return synthetic_point(jac_h, jac_g, g)


def increase_direction_sweep(count: int = 200, seed: int = 0) -> SweepResult:
    """grad h gamma = 0, grad g_j gamma = 0 (j active, j != k), grad g_k gamma = 1."""
    rng = np.random.default_rng(seed)
    failures, worst = 0, 0.0
    first = None
    for case in range(count):
        pe = random_regular_point(rng)
        k = pe.active[int(rng.integers(len(pe.active)))]
        gamma = increase_direction(pe, k)
        target = np.zeros(len(pe.active))
        target[pe.active.index(k)] = 1.0
        residual = np.concatenate(
            [pe.jac_h @ gamma, pe.jac_g[list(pe.active)] @ gamma - target]
        )
        err = float(np.max(np.abs(residual)))
        worst = max(worst, err)
        if err > LEMMA_TOL:
            failures += 1
            if first is None:
                first = f"case {case}: violation {err:.3e}"
    return SweepResult("increase_direction", count, failures, worst, 0, first)


def run_selftest(seed: int = 0) -> List[SweepResult]:
    results = [
        derivative_sweep(seed=seed),
        inverse_bound_sweep(seed=seed),
        increase_direction_sweep(seed=seed),
    ]
    for res in results:
        if res.passed:
            log.info(f"{res.name}: {res.cases} cases, worst {res.worst:.3e}")
        else:
            log.error(f"{res.name}: {res.failures} of {res.cases} failed; {res.first_failure}")
    return results
