"""
Flags shared by the check and solve commands.
"""
from dataclasses import replace
from typing import Optional

import click

from ctkkt import GRID_NODES, K_MIN, SEED, log
from ctkkt.core.options import CertifyOptions
from ctkkt.utils.formatter import parse_float_list


def certify_flags(func):
    decorators = [
        click.option("--grid", type=click.IntRange(min=2), default=GRID_NODES,
                     show_default=True, help="Number of uniform grid nodes."),
        click.option("--tol-stat", type=float, default=None,
                     help="Absolute stationarity tolerance [1e-7 (1 + K_phi)]."),
        click.option("--tol-psd", type=float, default=None,
                     help="Absolute second-order tolerance [1e-8 (1 + |H|)]."),
        click.option("--kmin", type=float, default=K_MIN, show_default=True,
                     help="Floor for the Gram determinant infimum."),
        click.option("--eps-act", type=float, default=None,
                     help="Absolute activity band [1e-6 (1 + max |g|)]."),
        click.option("--seed", type=int, default=SEED, show_default=True),
        click.option("--sample", type=str, default=None,
                     help="Comma-separated times for multiplier samples."),
        click.option("--json", "as_json", is_flag=True, help="Print the JSON certificate."),
        click.option("-o", "--output", type=click.Path(dir_okay=False), default=None,
                     help="Also write the report to this file."),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def build_certify_options(
    grid: int,
    tol_stat: Optional[float],
    tol_psd: Optional[float],
    kmin: float,
    eps_act: Optional[float],
    seed: int,
    sample: Optional[str],
) -> CertifyOptions:
    try:
        times = tuple(parse_float_list(sample)) if sample else None
    except ValueError:
        raise click.BadParameter(f"not a list of numbers: {sample!r}", param_hint="--sample")
    return replace(
        CertifyOptions(),
        grid=grid,
        tol_stat=tol_stat,
        tol_psd=tol_psd,
        k_min=kmin,
        eps_act=eps_act,
        seed=seed,
        sample_times=times,
    )


def emit(text: str, output: Optional[str] = None) -> None:
    click.echo(text)
    if output:
        with open(output, "w", encoding="utf-8") as f:
            plain = click.unstyle(text)
            f.write(plain if plain.endswith("\n") else plain + "\n")
        log.info(f"Report written to {output}")
