"""
ctkkt check: certify or refute a candidate trajectory.
"""
import click
import jsonschema

from ctkkt import log
from ctkkt.core.certify import unconstrained_certificate
from ctkkt.core.decorators.errors import capture_err
from ctkkt.core.decorators.misc import exec_time
from ctkkt.core.exceptions import CtkktError, DimensionError, ExprSyntaxError
from ctkkt.core.model import (
    build_grid,
    objective_value,
    parse_candidate,
    read_problem_file,
    sample_trajectory,
)
from ctkkt.core.solver import certify_trajectory
from ctkkt.utils.cliopts import build_certify_options, certify_flags, emit
from ctkkt.utils.csvio import load_trajectory_csv
from ctkkt.utils.report import (
    CertificateDocument,
    sample_nodes_at,
    validate_document,
)

__MODULE__ = "Check"
__HELP__ = """
Certify the KKT necessary conditions for a candidate trajectory.

Runs feasibility, constraint qualifications (H4, H7, active LICQ), first
order, second order and, when certification fails, a refutation search.

Exit codes: 0 certified, 2 cq_failed, 3 first_order_failed or
second_order_failed, 4 refuted, 5 infeasible, 1 usage or I/O error.

The candidate comes from --trajectory (CSV), --candidate, or the
[candidate] table of the problem file, in that order.
"""


def load_candidate(problem, candidate, grid, candidate_text, trajectory_csv):
    if trajectory_csv:
        trajectory, _ = load_trajectory_csv(trajectory_csv, grid, problem.n)
        return trajectory
    if candidate_text is not None:
        sources = [s.strip() for s in candidate_text.split(",")]
        try:
            exprs = parse_candidate(sources, problem.n)
        except (ExprSyntaxError, DimensionError) as err:
            raise click.BadParameter(str(err), param_hint="--candidate")
        return sample_trajectory(grid, exprs)
    if candidate is None:
        raise click.UsageError(
            "no candidate trajectory: add [candidate] to the file or pass --candidate"
        )
    return sample_trajectory(grid, candidate.exprs)


def run_check(path, opts, candidate_text=None, trajectory_csv=None) -> CertificateDocument:
    problem, candidate, sha = read_problem_file(path)
    log.info(
        f"Loaded {problem.name}: n = {problem.n}, p = {problem.p}, m = {problem.m}"
    )
    grid = build_grid(problem.T, opts.grid)
    trajectory = load_candidate(problem, candidate, grid, candidate_text, trajectory_csv)
    certification = certify_trajectory(problem, trajectory, opts)
    unconstrained = None
    if problem.p == 0 and problem.m == 0:
        unconstrained = unconstrained_certificate(problem, trajectory, opts)
    return CertificateDocument(
        problem=problem,
        sha256=sha,
        grid=grid,
        certification=certification,
        objective=objective_value(problem, trajectory),
        options=opts,
        sample_nodes=sample_nodes_at(grid, opts.sample_times),
        unconstrained=unconstrained,
    )


@click.command("check", help=__HELP__)
@click.argument("problem_file", type=click.Path(dir_okay=False))
@certify_flags
@click.option("--candidate", type=str, default=None,
              help='Comma-separated expressions in t, e.g. "1,1".')
@click.option("--trajectory", "trajectory_csv", type=click.Path(dir_okay=False),
              default=None, help="Numeric candidate as CSV (t, z1..zn).")
@exec_time
@capture_err
def command(problem_file, grid, tol_stat, tol_psd, kmin, eps_act, seed, sample,
            as_json, output, candidate, trajectory_csv):
    opts = build_certify_options(grid, tol_stat, tol_psd, kmin, eps_act, seed, sample)
    doc = run_check(problem_file, opts, candidate, trajectory_csv)
    data = doc.to_dict()
    try:
        validate_document(data)
    except jsonschema.ValidationError as err:
        raise CtkktError(f"certificate breaks its schema: {err.message}") from err
    emit(doc.to_json() if as_json else doc.to_text(), output)
    log.info(f"Verdict: {doc.verdict}")
    return doc.exit_code
