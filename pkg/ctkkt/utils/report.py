"""
Certificate documents: the single source for the JSON and text reports.
"""
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import jsonschema
import numpy as np

from ctkkt import __version__
from ctkkt.core.certify import UnconstrainedCertificate
from ctkkt.core.model import Problem, TimeGrid
from ctkkt.core.options import CertifyOptions
from ctkkt.core.sections import section
from ctkkt.core.solver import Certification
from ctkkt.utils.formatter import fmt_num

SCHEMA_PATH = os.path.join(
    os.path.dirname(os.path.dirname(__file__)), "schema", "certificate.schema.json"
)

VERDICT_EXIT = {
    "certified": 0,
    "cq_failed": 2,
    "first_order_failed": 3,
    "second_order_failed": 3,
    "refuted": 4,
    "infeasible": 5,
}

CAVEATS = [
    "conditions holding almost everywhere are checked on grid nodes only",
    "a negative-multiplier node set is treated as having positive measure "
    "when it contains at least one node",
    "smoothness hypotheses H2, H3, H5, H6 are assumed of the expressions",
]


def decide_verdict(cert: Certification) -> str:
    """infeasible > refuted > cq_failed > first_order_failed > second_order_failed."""
    first = cert.first_order
    if not first.feasible:
        return "infeasible"
    if cert.refutation is not None:
        return "refuted"
    if not first.cq_passed:
        return "cq_failed"
    if not first.conditions_passed:
        return "first_order_failed"
    if cert.second_order is None or not cert.second_order.passed:
        return "second_order_failed"
    return "certified"


def default_sample_nodes(grid: TimeGrid) -> Tuple[int, ...]:
    return tuple(sorted({0, (grid.N - 1) // 2, grid.N - 1}))


def sample_nodes_at(grid: TimeGrid, times: Optional[Sequence[float]]) -> Tuple[int, ...]:
    if not times:
        return default_sample_nodes(grid)
    return tuple(grid.index_of(t) for t in times)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


@dataclass(frozen=True, eq=False)
class CertificateDocument:
    problem: Problem
    sha256: str
    grid: TimeGrid
    certification: Certification
    objective: Optional[float]
    options: CertifyOptions
    sample_nodes: Tuple[int, ...] = ()
    unconstrained: Optional[UnconstrainedCertificate] = None
    solve: Optional[dict] = field(default=None)

    @property
    def verdict(self) -> str:
        return decide_verdict(self.certification)

    @property
    def exit_code(self) -> int:
        return VERDICT_EXIT[self.verdict]

    def to_dict(self) -> dict:
        cert = self.certification
        first = cert.first_order
        doc = {
            "tool": "ctkkt",
            "version": __version__,
            "problem": {
                "name": self.problem.name,
                "sha256": self.sha256,
                "n": self.problem.n,
                "p": self.problem.p,
                "m": self.problem.m,
                "T": self.problem.T,
            },
            "grid": {"N": self.grid.N, "T": self.grid.T, "rule": "trapezoid"},
            "objective": self.objective,
            "feasibility": first.feasibility.to_dict(),
            "cq": {k: r.to_dict() for k, r in first.cq.items()} if first.cq else None,
            "first_order": (
                first.to_dict(self.sample_nodes) if first.multipliers is not None else None
            ),
            "second_order": cert.second_order.to_dict() if cert.second_order else None,
            "unconstrained": self.unconstrained.to_dict() if self.unconstrained else None,
            "refutation": cert.refutation.to_dict() if cert.refutation else None,
            "verdict": self.verdict,
            "exit_code": self.exit_code,
            "options": {
                "k_min": self.options.k_min,
                "tol_eq": self.options.tol_eq,
                "tol_ineq": self.options.tol_ineq,
                "tol_sign": self.options.tol_sign,
                "eps_act": first.eps_act,
                "tol_stat": first.tol_stat,
            },
            "caveats": CAVEATS,
        }
        if self.solve is not None:
            doc["solve"] = self.solve
        return _clean(doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def to_text(self) -> str:
        d = self.to_dict()
        text = section(
            f"ctkkt {d['version']}: {d['problem']['name']}",
            {
                "verdict": d["verdict"],
                "n, p, m": f"{d['problem']['n']}, {d['problem']['p']}, {d['problem']['m']}",
                "grid": f"{d['grid']['N']} nodes on [0, {fmt_num(d['grid']['T'])}]",
                "objective": fmt_num(d["objective"]),
            },
        )
        feas = d["feasibility"]
        text += section(
            "Feasibility",
            {
                "passed": fmt_num(feas["passed"]),
                "max |h|": fmt_num(feas["max_abs_h"]),
                "min g": fmt_num(feas["min_g"]),
            },
        )
        for kind, report in (d["cq"] or {}).items():
            text += section(
                f"Constraint qualification {kind}",
                {
                    "passed": fmt_num(report["passed"]),
                    "infimum det": fmt_num(report["infimum"]),
                    "worst t": fmt_num(report["worst_t"]),
                    "min rank": fmt_num(report["min_rank"]),
                    "max sigma_1": fmt_num(report["max_sigma1"]),
                },
            )
        fo = d["first_order"]
        if fo is not None:
            text += section(
                "First order",
                {
                    "stationarity": f"{fmt_num(fo['stationarity']['max_residual'])}"
                    f" (tol {fmt_num(fo['stationarity']['tol'])})",
                    "complementarity": fmt_num(fo["complementarity"]["max_residual"]),
                    "min v": fmt_num(fo["sign"]["min_v"]),
                    "sup |u|, sup |v|": f"{fmt_num(fo['sup_u'])}, {fmt_num(fo['sup_v'])}",
                    "bound holds": fmt_num(fo["bound"]["holds"]) if fo["bound"] else "n/a",
                },
            )
            for s in fo["samples"]:
                text += f"    t = {fmt_num(s['t'])}: u = {s['u']}, v = {s['v']}\n"
        so = d["second_order"]
        if so is not None:
            text += section(
                "Second order",
                {
                    "verdict": so["verdict"],
                    "worst eigenvalue": fmt_num(so["worst_eig"]),
                    "vacuous nodes": so["vacuous_nodes"],
                    "excluded nodes": len(so["excluded_nodes"]),
                    "sensitive nodes": len(so["sensitive_nodes"]),
                },
            )
        if d["unconstrained"] is not None:
            un = d["unconstrained"]
            text += section(
                "Unconstrained",
                {
                    "max |grad phi|": fmt_num(un["max_grad_norm"]),
                    "max eigenvalue": fmt_num(un["max_eig"]),
                },
            )
        ref = d["refutation"]
        if ref is not None:
            text += section(
                "Refutation",
                {
                    "source": ref["source"],
                    "ascent integral": fmt_num(ref["ascent_integral"]),
                    "tau": fmt_num(ref["tau"]),
                    "gain": fmt_num(ref["gain"]),
                },
            )
        if self.solve is not None:
            text += section(
                "Solve",
                {
                    "failed nodes": len(d["solve"]["failed_nodes"]),
                    "output": d["solve"].get("output") or "n/a",
                },
            )
        return text


@lru_cache(maxsize=1)
def load_schema() -> dict:
    with open(SCHEMA_PATH, encoding="utf-8") as f:
        return json.load(f)


def validate_document(doc: dict) -> None:
    """Raise jsonschema.ValidationError when `doc` breaks the shipped schema."""
    jsonschema.validate(instance=doc, schema=load_schema())
