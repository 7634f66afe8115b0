import importlib
import sys

import click

from ctkkt import __version__, log
from ctkkt.modules import ALL_MODULES


@click.group(help="Certify KKT conditions for continuous-time programs.")
@click.version_option(__version__, prog_name="ctkkt")
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages.")
def cli(verbose):
    log.set_verbose(verbose)


def load_modules():
    loaded = []
    for module in ALL_MODULES:
        imported_module = importlib.import_module("ctkkt.modules." + module)
        if hasattr(imported_module, "command"):
            cli.add_command(imported_module.command)
            loaded.append(getattr(imported_module, "__MODULE__", module))
    log.debug(f"Loaded modules: {', '.join(loaded)}")


load_modules()


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="ctkkt", standalone_mode=False)
    except click.ClickException as err:
        err.show()
        return 1
    except click.Abort:
        log.error("Aborted")
        return 1
    except click.exceptions.Exit as err:
        return err.exit_code
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
