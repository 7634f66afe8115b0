"""
ctkkt solve: pointwise solve, then certify the result.
"""
from dataclasses import replace

import click
import jsonschema

from ctkkt import STARTS, log
from ctkkt.core.decorators.errors import capture_err
from ctkkt.core.decorators.misc import exec_time
from ctkkt.core.exceptions import CtkktError, SolverError
from ctkkt.core.model import objective_value, read_problem_file
from ctkkt.core.options import SolveOptions
from ctkkt.core.solver import certified_solve
from ctkkt.utils.cliopts import build_certify_options, certify_flags, emit
from ctkkt.utils.csvio import write_trajectory_csv
from ctkkt.utils.report import (
    CertificateDocument,
    sample_nodes_at,
    validate_document,
)

__MODULE__ = "Solve"
__HELP__ = """
Solve the problem node by node and certify the assembled trajectory.

Each node is a multi-start augmented Lagrangian maximization; problems
that do not depend on t are solved once. The trajectory with its
multipliers is written as CSV (t, z, u, v) when --trajectory-out is given.

Exit codes: 0 solved, 6 no feasible point at some node, 1 usage or I/O.
"""


@click.command("solve", help=__HELP__)
@click.argument("problem_file", type=click.Path(dir_okay=False))
@certify_flags
@click.option("--starts", type=click.IntRange(min=0), default=STARTS, show_default=True,
              help="Random starts per node besides the warm start.")
@click.option("--trajectory-out", type=click.Path(dir_okay=False), default=None,
              help="Write the trajectory CSV here.")
@exec_time
@capture_err
def command(problem_file, grid, tol_stat, tol_psd, kmin, eps_act, seed, sample,
            as_json, output, starts, trajectory_out):
    problem, _, sha = read_problem_file(problem_file)
    copts = build_certify_options(grid, tol_stat, tol_psd, kmin, eps_act, seed, sample)
    opts = replace(SolveOptions(), grid=grid, starts=starts, seed=seed, certify=copts)
    solution = certified_solve(problem, opts)
    trajectory = solution.trajectory
    failed = [int(k) for k, bad in enumerate(solution.solve.failed) if bad]

    if trajectory_out:
        write_trajectory_csv(trajectory_out, trajectory, solution.first_order.multipliers)
        log.info(f"Trajectory written to {trajectory_out}")

    doc = CertificateDocument(
        problem=problem,
        sha256=sha,
        grid=trajectory.grid,
        certification=solution.certification,
        objective=objective_value(problem, trajectory),
        options=copts,
        sample_nodes=sample_nodes_at(trajectory.grid, copts.sample_times),
        solve={
            "failed_nodes": failed,
            "output": trajectory_out,
            "starts": starts,
            "seed": seed,
            "trajectory": {
                "t": trajectory.grid.nodes.tolist(),
                "z": trajectory.values.tolist(),
            },
        },
    )
    data = doc.to_dict()
    try:
        validate_document(data)
    except jsonschema.ValidationError as err:
        raise CtkktError(f"certificate breaks its schema: {err.message}") from err
    emit(doc.to_json() if as_json else doc.to_text(), output)
    if failed:
        log.error(f"{len(failed)} nodes without a feasible point")
        return SolverError.exit_code
    return 0
