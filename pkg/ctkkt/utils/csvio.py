"""
CSV trajectories. One row per grid node, columns t, z1..zn, u1..up, v1..vm.
"""
import csv
from typing import Optional, Tuple

import numpy as np

from ctkkt.core.exceptions import DimensionError, ProblemFormatError
from ctkkt.core.model import TimeGrid, Trajectory, trajectory_from_values


def trajectory_header(n: int, p: int = 0, m: int = 0):
    return (
        ["t"]
        + [f"z{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(p)]
        + [f"v{j + 1}" for j in range(m)]
    )


def write_trajectory_csv(path: str, trajectory: Trajectory, multipliers=None) -> None:
    p = multipliers.p if multipliers is not None else 0
    m = multipliers.m if multipliers is not None else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(trajectory_header(trajectory.n, p, m))
        for k, t, z in trajectory.points():
            row = [repr(t)] + [repr(float(x)) for x in z]
            if multipliers is not None:
                row += [repr(float(x)) for x in multipliers.u[k]]
                row += [repr(float(x)) for x in multipliers.v[k]]
            w.writerow(row)


def load_trajectory_csv(
    path: str, grid: TimeGrid, n: int
) -> Tuple[Trajectory, Optional[np.ndarray]]:
    """
    Read z (and any u, v columns as a raw block) from a CSV written by
    write_trajectory_csv. The t column must reproduce the grid nodes
    exactly; trajectories are never interpolated.
    """
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ProblemFormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if header[: n + 1] != trajectory_header(n):
        raise ProblemFormatError(
            f"expected columns {trajectory_header(n)}, got {header[: n + 1]}", 1
        )
    body = rows[1:]
    if len(body) != grid.N:
        raise DimensionError(f"{len(body)} rows for a grid of {grid.N} nodes")
    try:
        data = np.array([[float(x) for x in row] for row in body], dtype=float)
    except ValueError as err:
        raise ProblemFormatError(f"non-numeric entry: {err}") from err
    if data.shape[1] != len(header):
        raise ProblemFormatError("rows and header differ in length")
    if not np.array_equal(data[:, 0], grid.nodes):
        k = int(np.flatnonzero(data[:, 0] != grid.nodes)[0])
        raise ProblemFormatError(
            f"t = {data[k, 0]!r} does not match grid node {grid.nodes[k]!r}", k + 2
        )
    extra = data[:, n + 1:] if data.shape[1] > n + 1 else None
    return trajectory_from_values(grid, data[:, 1: n + 1]), extra
