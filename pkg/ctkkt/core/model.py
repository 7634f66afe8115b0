"""
Problem and trajectory data model.

    maximize    P(z) = int_0^T phi(z(t), t) dt
    subject to  h(z(t), t) = 0,  g(z(t), t) >= 0   for a.e. t in [0, T]

Conditions stated "a.e." are checked on the nodes of a uniform grid; a
grid check cannot see violations on sets that contain no node.
"""
import hashlib
import math
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import tomli_w

from ctkkt import EPS_ACT_REL, TOL_EQ, TOL_INEQ
from ctkkt.core.exceptions import (
    DimensionError,
    ExprSyntaxError,
    ProblemFormatError,
)
from ctkkt.core.exprdsl import (
    Expr,
    compile_exprs,
    depends_on_t,
    gradient,
    hessian,
    parse_expr,
    variables,
)


@dataclass(frozen=True)
class ProblemSources:
    objective: str
    equality: Tuple[str, ...]
    inequality: Tuple[str, ...]


@dataclass(frozen=True)
class Problem:
    name: str
    n: int
    T: float
    phi: Expr
    h: Tuple[Expr, ...]
    g: Tuple[Expr, ...]
    sources: Optional[ProblemSources] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"n must be positive, got {self.n}")
        if not self.T > 0:
            raise DimensionError(f"horizon T must be positive, got {self.T}")
        if len(self.h) > self.n:
            raise DimensionError(
                f"{len(self.h)} equality constraints exceed n = {self.n}"
            )
        for e in (self.phi,) + tuple(self.h) + tuple(self.g):
            if any(k > self.n for k in variables(e)):
                raise DimensionError(f"expression '{e}' references z beyond n")

    @property
    def p(self) -> int:
        return len(self.h)

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def is_autonomous(self) -> bool:
        return not any(
            depends_on_t(e) for e in (self.phi,) + self.h + self.g
        )

    @cached_property
    def tables(self) -> "DerivativeTables":
        return DerivativeTables.build(self)


def _flat(matrix) -> List[Expr]:
    return [e for row in matrix for e in row]


@dataclass(frozen=True)
class DerivativeTables:
    """Compiled values, gradients and Hessians of phi, h and g."""

    phi: object
    grad_phi: object
    hess_phi: object
    h: object
    jac_h: object
    hess_h: object
    g: object
    jac_g: object
    hess_g: object

    @classmethod
    def build(cls, problem: Problem) -> "DerivativeTables":
        n = problem.n
        hl = [f"h{i + 1}" for i in range(problem.p)]
        gl = [f"g{j + 1}" for j in range(problem.m)]
        return cls(
            phi=compile_exprs([problem.phi], ["objective"]),
            grad_phi=compile_exprs(gradient(problem.phi, n)),
            hess_phi=compile_exprs(_flat(hessian(problem.phi, n))),
            h=compile_exprs(problem.h, hl),
            jac_h=compile_exprs(
                [d for e in problem.h for d in gradient(e, n)],
                [lab for lab in hl for _ in range(n)],
            ),
            hess_h=compile_exprs(
                [d for e in problem.h for d in _flat(hessian(e, n))],
                [lab for lab in hl for _ in range(n * n)],
            ),
            g=compile_exprs(problem.g, gl),
            jac_g=compile_exprs(
                [d for e in problem.g for d in gradient(e, n)],
                [lab for lab in gl for _ in range(n)],
            ),
            hess_g=compile_exprs(
                [d for e in problem.g for d in _flat(hessian(e, n))],
                [lab for lab in gl for _ in range(n * n)],
            ),
        )


# ===== Time grid and quadrature =====

@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def N(self) -> int:
        return len(self.nodes)

    def index_of(self, t: float) -> int:
        """Nearest node to time t."""
        return int(np.argmin(np.abs(self.nodes - t)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_grid(T: float, N: int) -> TimeGrid:
    """Uniform nodes on [0, T] with composite trapezoid weights."""
    if N < 2:
        raise DimensionError(f"grid needs at least 2 nodes, got {N}")
    if not T > 0:
        raise DimensionError(f"horizon T must be positive, got {T}")
    nodes = np.linspace(0.0, T, N)
    nodes[-1] = T
    weights = np.full(N, T / (N - 1))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return TimeGrid(float(T), _frozen(nodes), _frozen(weights))


def integrate(grid: TimeGrid, values: Sequence[float]) -> float:
    """Trapezoid rule; the weighted sum is exactly rounded so it is order-free."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != grid.N:
        raise DimensionError(
            f"{values.shape[0]} values for a grid of {grid.N} nodes"
        )
    return math.fsum(float(w) * float(v) for w, v in zip(grid.weights, values))


# ===== Trajectories =====

@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    values: np.ndarray
    exprs: Optional[Tuple[Expr, ...]] = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.N:
            raise DimensionError(
                f"trajectory has shape {self.values.shape}, "
                f"grid has {self.grid.N} nodes"
            )

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def points(self):
        """(index, t, z) per node in index order."""
        for k, t in enumerate(self.grid.nodes):
            yield k, float(t), self.values[k]


def trajectory_from_values(grid: TimeGrid, values) -> Trajectory:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return Trajectory(grid, _frozen(values))


def constant_trajectory(grid: TimeGrid, z: Sequence[float]) -> Trajectory:
    z = np.asarray(z, dtype=float).reshape(1, -1)
    return trajectory_from_values(grid, np.repeat(z, grid.N, axis=0))


def sample_trajectory(grid: TimeGrid, exprs: Sequence[Expr]) -> Trajectory:
    """Sample expressions in t at the grid nodes."""
    exprs = tuple(exprs)
    if any(k != 0 for e in exprs for k in variables(e)):
        raise DimensionError("candidate expressions may reference only t")
    f = compile_exprs(exprs, [f"z{i + 1}" for i in range(len(exprs))])
    values = np.array([f((), float(t)) for t in grid.nodes], dtype=float)
    return Trajectory(grid, _frozen(values.reshape(grid.N, len(exprs))), exprs)


def parse_candidate(texts: Sequence[str], n: int) -> Tuple[Expr, ...]:
    if len(texts) != n:
        raise DimensionError(f"candidate has {len(texts)} components, n = {n}")
    exprs = tuple(parse_expr(str(s), n) for s in texts)
    for s, e in zip(texts, exprs):
        if any(k != 0 for k in variables(e)):
            raise DimensionError(f"candidate component '{s}' may reference only t")
    return exprs


# ===== Pointwise evaluation =====

@dataclass(frozen=True, eq=False)
class PointEval:
    t: float
    z: np.ndarray
    phi: float
    grad_phi: np.ndarray  # (n,)
    hess_phi: np.ndarray  # (n, n)
    h: np.ndarray  # (p,)
    jac_h: np.ndarray  # (p, n)
    hess_h: np.ndarray  # (p, n, n)
    g: np.ndarray  # (m,)
    jac_g: np.ndarray  # (m, n)
    hess_g: np.ndarray  # (m, n, n)
    active: Tuple[int, ...]
    eps_act: float

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.h.shape[0]

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def inactive(self) -> Tuple[int, ...]:
        return tuple(j for j in range(self.m) if j not in self.active)

    def active_stack(self) -> np.ndarray:
        """Rows [grad h; grad g_j for active j], shape (p + |A|) x n."""
        return np.vstack([self.jac_h, self.jac_g[list(self.active)]])

    def active_at(self, eps: float) -> Tuple[int, ...]:
        return active_set(self.g, eps)


def active_set(g: np.ndarray, eps: float) -> Tuple[int, ...]:
    return tuple(int(j) for j in np.flatnonzero(g <= eps))


def activity_tolerance(g_scale: float, rel: float) -> float:
    return rel * (1.0 + g_scale)


def evaluate_point(
    problem: Problem, z, t: float, eps_act: Optional[float] = None
) -> PointEval:
    """Every value and derivative at (z, t); eps_act defaults to 1e-6(1+max|g|)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != problem.n:
        raise DimensionError(f"state has length {z.shape[0]}, n = {problem.n}")
    n, p, m = problem.n, problem.p, problem.m
    tb = problem.tables
    zl, t = z.tolist(), float(t)
    g = np.array(tb.g(zl, t), dtype=float)
    if eps_act is None:
        scale = float(np.max(np.abs(g))) if m else 0.0
        eps_act = activity_tolerance(scale, EPS_ACT_REL)
    return PointEval(
        t=t,
        z=z,
        phi=tb.phi(zl, t)[0],
        grad_phi=np.array(tb.grad_phi(zl, t), dtype=float),
        hess_phi=np.array(tb.hess_phi(zl, t), dtype=float).reshape(n, n),
        h=np.array(tb.h(zl, t), dtype=float),
        jac_h=np.array(tb.jac_h(zl, t), dtype=float).reshape(p, n),
        hess_h=np.array(tb.hess_h(zl, t), dtype=float).reshape(p, n, n),
        g=g,
        jac_g=np.array(tb.jac_g(zl, t), dtype=float).reshape(m, n),
        hess_g=np.array(tb.hess_g(zl, t), dtype=float).reshape(m, n, n),
        active=active_set(g, eps_act),
        eps_act=float(eps_act),
    )


def constraint_values(problem: Problem, trajectory: Trajectory):
    """(H, G): node-by-constraint arrays of h and g."""
    tb = problem.tables
    H = np.zeros((trajectory.grid.N, problem.p))
    G = np.zeros((trajectory.grid.N, problem.m))
    for k, t, z in trajectory.points():
        zl = z.tolist()
        H[k] = tb.h(zl, t)
        G[k] = tb.g(zl, t)
    return H, G


def trajectory_eps_act(problem: Problem, trajectory: Trajectory, rel=None) -> float:
    """eps_act = rel * (1 + max over nodes and j of |g_j|)."""
    rel = EPS_ACT_REL if rel is None else rel
    _, G = constraint_values(problem, trajectory)
    scale = float(np.max(np.abs(G))) if G.size else 0.0
    return activity_tolerance(scale, rel)


def evaluate_trajectory(
    problem: Problem, trajectory: Trajectory, eps_act: Optional[float] = None
) -> List[PointEval]:
    if trajectory.n != problem.n:
        raise DimensionError(
            f"trajectory has {trajectory.n} components, n = {problem.n}"
        )
    if eps_act is None:
        eps_act = trajectory_eps_act(problem, trajectory)
    return [evaluate_point(problem, z, t, eps_act) for _, t, z in trajectory.points()]


def objective_value(problem: Problem, trajectory: Trajectory) -> float:
    tb = problem.tables
    vals = [tb.phi(z.tolist(), t)[0] for _, t, z in trajectory.points()]
    return integrate(trajectory.grid, vals)


# ===== Feasibility =====

@dataclass(frozen=True)
class WorstNode:
    index: int  # constraint index, 0-based
    node: int
    t: float
    value: float

    def to_dict(self) -> dict:
        return {
            "constraint": self.index + 1,
            "node": self.node,
            "t": self.t,
            "value": self.value,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    max_abs_h: float
    min_g: float
    equality: Tuple[WorstNode, ...]
    inequality: Tuple[WorstNode, ...]
    tol_eq: float
    tol_ineq: float

    @property
    def passed(self) -> bool:
        return self.max_abs_h <= self.tol_eq and self.min_g >= -self.tol_ineq

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_abs_h": self.max_abs_h,
            "min_g": None if math.isinf(self.min_g) else self.min_g,
            "tol_eq": self.tol_eq,
            "tol_ineq": self.tol_ineq,
            "equality": [w.to_dict() for w in self.equality],
            "inequality": [w.to_dict() for w in self.inequality],
        }


def check_feasibility(
    problem: Problem,
    trajectory: Trajectory,
    tol_eq: Optional[float] = None,
    tol_ineq: Optional[float] = None,
) -> FeasibilityReport:
    """Worst residual of every constraint across all nodes."""
    tol_eq = TOL_EQ if tol_eq is None else tol_eq
    tol_ineq = TOL_INEQ if tol_ineq is None else tol_ineq
    H, G = constraint_values(problem, trajectory)
    nodes = trajectory.grid.nodes
    eq = []
    for i in range(problem.p):
        k = int(np.argmax(np.abs(H[:, i])))
        eq.append(WorstNode(i, k, float(nodes[k]), float(H[k, i])))
    ineq = []
    for j in range(problem.m):
        k = int(np.argmin(G[:, j]))
        ineq.append(WorstNode(j, k, float(nodes[k]), float(G[k, j])))
    return FeasibilityReport(
        max_abs_h=max((abs(w.value) for w in eq), default=0.0),
        min_g=min((w.value for w in ineq), default=math.inf),
        equality=tuple(eq),
        inequality=tuple(ineq),
        tol_eq=float(tol_eq),
        tol_ineq=float(tol_ineq),
    )


# ===== Problem files =====

_SECTIONS = {"problem", "equality", "inequality", "candidate"}
_DECODE_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class Candidate:
    sources: Tuple[str, ...]
    exprs: Tuple[Expr, ...]


_HEADER = re.compile(r"^\s*\[\[?\s*([A-Za-z_][A-Za-z_0-9]*)\s*\]\]?\s*(?:#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*=")


def _line_index(text: str) -> Dict[Tuple[str, int, Optional[str]], int]:
    """
    (section, entry, key) -> line of `key = ...` inside the entry-th table
    of that section; key None gives the header line. [[equality]] and
    [[inequality]] entries count from 0 in file order.
    """
    index: Dict[Tuple[str, int, Optional[str]], int] = {}
    counts: Dict[str, int] = {}
    section, entry = None, 0
    for i, line in enumerate(text.splitlines(), start=1):
        header = _HEADER.match(line)
        if header:
            section = header.group(1)
            entry = counts.get(section, 0)
            counts[section] = entry + 1
            index[(section, entry, None)] = i
            continue
        key = _KEY.match(line)
        if key and section is not None:
            index.setdefault((section, entry, key.group(1)), i)
    return index


def _key_line(text: str, key: str) -> Optional[int]:
    """Line of `key = ...` or of a `[key]` / `[[key]]` header."""
    pattern = re.compile(rf"^\s*(?:{re.escape(key)}\s*=|\[\[?{re.escape(key)}\]\]?)")
    for i, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return i
    return None


def _parse_in_file(source, n: int, label: str, line: Optional[int]) -> Expr:
    if not isinstance(source, str):
        raise ProblemFormatError(f"{label} must be a string", line)
    try:
        return parse_expr(source, n)
    except ExprSyntaxError as err:
        raise ProblemFormatError(f"{label}: {err}", line) from err


def load_problem(text: str) -> Tuple[Problem, Optional[Candidate]]:
    """Parse problem-file text into a Problem and its optional candidate."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        if line is None:
            m = _DECODE_LINE.search(str(err))
            line = int(m.group(1)) if m else None
        raise ProblemFormatError(str(err), line) from err

    lines = _line_index(text)
    unknown = set(doc) - _SECTIONS
    if unknown:
        key = sorted(unknown)[0]
        raise ProblemFormatError(f"unknown section '{key}'", _key_line(text, key))
    head = doc.get("problem")
    if not isinstance(head, dict):
        raise ProblemFormatError("missing [problem] section")
    for key, kind in (("name", str), ("n", int), ("T", (int, float)), ("objective", str)):
        if key not in head:
            raise ProblemFormatError(
                f"[problem] is missing '{key}'", lines.get(("problem", 0, None))
            )
        if not isinstance(head[key], kind) or isinstance(head[key], bool):
            raise ProblemFormatError(
                f"[problem] {key} has the wrong type",
                lines.get(("problem", 0, key)) or _key_line(text, key),
            )
    extra = set(head) - {"name", "n", "T", "objective"}
    if extra:
        key = sorted(extra)[0]
        raise ProblemFormatError(
            f"unknown key '{key}' in [problem]", lines.get(("problem", 0, key))
        )
    n = head["n"]
    if n < 1:
        raise ProblemFormatError("n must be positive", lines.get(("problem", 0, "n")))

    def exprs_of(section):
        items = doc.get(section, [])
        if not isinstance(items, list):
            raise ProblemFormatError(
                f"{section} must be an array of tables ([[{section}]])",
                _key_line(text, section),
            )
        out = []
        for i, item in enumerate(items):
            if not isinstance(item, dict) or set(item) != {"expr"}:
                raise ProblemFormatError(
                    f"[[{section}]] entry {i + 1} must hold exactly 'expr'",
                    lines.get((section, i, None)),
                )
            out.append(item["expr"])
        return out

    eq_src = exprs_of("equality")
    ineq_src = exprs_of("inequality")
    if len(eq_src) > n:
        raise DimensionError(f"{len(eq_src)} equality constraints exceed n = {n}")

    def entry_line(section, k):
        return lines.get((section, k, "expr")) or lines.get((section, k, None))

    phi = _parse_in_file(
        head["objective"], n, "objective", lines.get(("problem", 0, "objective"))
    )
    h = tuple(
        _parse_in_file(s, n, f"equality {i + 1}", entry_line("equality", i))
        for i, s in enumerate(eq_src)
    )
    g = tuple(
        _parse_in_file(s, n, f"inequality {j + 1}", entry_line("inequality", j))
        for j, s in enumerate(ineq_src)
    )
    problem = Problem(
        name=head["name"],
        n=n,
        T=float(head["T"]),
        phi=phi,
        h=h,
        g=g,
        sources=ProblemSources(head["objective"], tuple(eq_src), tuple(ineq_src)),
    )

    candidate = None
    if "candidate" in doc:
        cand = doc["candidate"]
        if not isinstance(cand, dict) or set(cand) != {"z"} or not isinstance(cand["z"], list):
            raise ProblemFormatError(
                "[candidate] must hold exactly z = [...]", _key_line(text, "candidate")
            )
        sources = tuple(str(s) for s in cand["z"])
        line = lines.get(("candidate", 0, "z")) or _key_line(text, "candidate")
        try:
            exprs = parse_candidate(sources, n)
        except ExprSyntaxError as err:
            raise ProblemFormatError(f"candidate: {err}", line) from err
        except DimensionError as err:
            raise DimensionError(f"line {line}: {err}") from err
        candidate = Candidate(sources, exprs)
    return problem, candidate


def read_problem_file(path: str) -> Tuple[Problem, Optional[Candidate], str]:
    """Load a problem file; also returns the sha256 of its bytes."""
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        raise ProblemFormatError(f"file is not UTF-8: {err}") from err
    problem, candidate = load_problem(text)
    return problem, candidate, hashlib.sha256(raw).hexdigest()


def save_problem(problem: Problem, candidate: Optional[Candidate] = None) -> str:
    """Problem-file text; load_problem of the result reproduces the model."""
    src = problem.sources
    if src is None:
        src = ProblemSources(
            str(problem.phi),
            tuple(str(e) for e in problem.h),
            tuple(str(e) for e in problem.g),
        )
    doc = {
        "problem": {
            "name": problem.name,
            "n": problem.n,
            "T": float(problem.T),
            "objective": src.objective,
        }
    }
    if src.equality:
        doc["equality"] = [{"expr": s} for s in src.equality]
    if src.inequality:
        doc["inequality"] = [{"expr": s} for s in src.inequality]
    if candidate is not None:
        doc["candidate"] = {"z": list(candidate.sources)}
    return tomli_w.dumps(doc)
