#!/usr/bin/env python3
"""
Worked Example Verification Script

Runs the two shipped worked examples end to end and checks the numbers
the certificates must reproduce. Run from the repository root.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import numpy as np

from ctkkt.core.model import build_grid, objective_value, read_problem_file, sample_trajectory
from ctkkt.core.options import CertifyOptions, SolveOptions
from ctkkt.core.solver import certified_solve, certify_trajectory
from ctkkt.utils.report import CertificateDocument, validate_document

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def _document(name):
    problem, candidate, sha = read_problem_file(str(PROBLEMS / name))
    opts = CertifyOptions()
    grid = build_grid(problem.T, opts.grid)
    traj = sample_trajectory(grid, candidate.exprs)
    cert = certify_trajectory(problem, traj, opts)
    doc = CertificateDocument(problem, sha, grid, cert, objective_value(problem, traj), opts)
    validate_document(doc.to_dict())
    return doc


def verify_example_1():
    """z = (0, 0) certifies with det = 4 and a vacuous second-order test."""
    try:
        start = time.perf_counter()
        doc = _document("ex1.ctp")
        elapsed = time.perf_counter() - start
        first = doc.certification.first_order
        h7 = first.cq["H7"]
        checks = [
            (doc.verdict == "certified", f"verdict {doc.verdict}"),
            (abs(h7.infimum - 4.0) <= 1e-9, f"H7 infimum {h7.infimum}"),
            (first.max_stationarity <= 1e-10, f"stationarity {first.max_stationarity}"),
            (first.max_complementarity == 0.0, f"complementarity {first.max_complementarity}"),
            (
                len(doc.certification.second_order.vacuous) == doc.grid.N,
                "second order not vacuous at every node",
            ),
            (elapsed < 5.0, f"took {elapsed:.2f}s"),
        ]
    except Exception as e:
        print(f"❌ ERROR: example 1 raised {type(e).__name__}: {e}")
        return False
    return _report(checks)


def verify_example_2():
    """z = (1, 1, 1) fails H7 with rank 2 at every node."""
    try:
        doc = _document("ex2.ctp")
        first = doc.certification.first_order
        h7 = first.cq["H7"]
        checks = [
            (doc.verdict == "cq_failed", f"verdict {doc.verdict}"),
            (doc.exit_code == 2, f"exit code {doc.exit_code}"),
            (h7.infimum <= 1e-12, f"H7 infimum {h7.infimum}"),
            (all(int(r) == 2 for r in h7.ranks), "rank is not 2 everywhere"),
            (first.multipliers is not None, "first-order block missing"),
        ]
    except Exception as e:
        print(f"❌ ERROR: example 2 raised {type(e).__name__}: {e}")
        return False
    return _report(checks)


def verify_solver():
    """solve recovers both optima deterministically."""
    all_ok = True
    for name, expected in (("ex1.ctp", [0.0, 0.0]), ("ex2.ctp", [1.0, 1.0, 1.0])):
        try:
            problem, _, _ = read_problem_file(str(PROBLEMS / name))
            first = certified_solve(problem, SolveOptions())
            second = certified_solve(problem, SolveOptions())
            z = first.trajectory.values
            err = float(np.max(np.abs(z - np.asarray(expected))))
            obj = objective_value(problem, first.trajectory)
            checks = [
                (err <= 1e-4, f"{name}: distance {err:.3e}"),
                (abs(obj) <= 1e-6, f"{name}: objective {obj:.3e}"),
                (np.array_equal(z, second.trajectory.values), f"{name}: runs differ"),
            ]
        except Exception as e:
            print(f"❌ ERROR: solving {name} raised {type(e).__name__}: {e}")
            all_ok = False
            continue
        all_ok = _report(checks) and all_ok
    return all_ok


def _report(checks):
    ok = True
    for passed, message in checks:
        if passed:
            continue
        print(f"❌ ERROR: {message}")
        ok = False
    if ok:
        print("✅ All checks passed")
    return ok


def main():
    """Run all verification checks."""
    print("🔍 Starting worked example verification...\n")

    all_passed = True

    print("1. Certifying example 1...")
    if not verify_example_1():
        all_passed = False

    print("\n2. Checking example 2...")
    if not verify_example_2():
        all_passed = False

    print("\n3. Solving both examples...")
    if not verify_solver():
        all_passed = False

    print("\n" + "=" * 50)

    if all_passed:
        print("🎉 SUCCESS: worked examples reproduced.")
    else:
        print("❌ FAILURE: some checks failed; see the errors above.")

    return all_passed


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
