"""
ctkkt selftest: built-in derivative, bound and direction sweeps.
"""
import json

import click

from ctkkt import SEED
from ctkkt.core.decorators.errors import capture_err
from ctkkt.core.decorators.misc import exec_time
from ctkkt.core.selfcheck import run_selftest

__MODULE__ = "Selftest"
__HELP__ = """
Run the shipped sweeps: symbolic derivatives against finite differences,
the inverse-norm bound on random Gram matrices, and the increase-direction
conditions. Exit 0 iff all pass.
"""


@click.command("selftest", help=__HELP__)
@click.option("--seed", type=int, default=SEED, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@exec_time
@capture_err
def command(seed, as_json):
    results = run_selftest(seed)
    if as_json:
        click.echo(json.dumps([r.to_dict() for r in results], indent=2))
    else:
        for r in results:
            mark = "✅" if r.passed else "❌"
            click.echo(f"{mark} {r.name}: {r.cases} cases, {r.failures} failures, worst {r.worst:.3e}")
    return 0 if all(r.passed for r in results) else 1
