# ctkkt/core/decorators/errors.py
"""
Error handling decorator for CLI commands.
"""
import traceback
from functools import wraps

import click

from ctkkt import log
from ctkkt.core.exceptions import CtkktError


def capture_err(func):
    """Turn errors raised by a command into its exit code."""
    @wraps(func)
    def capture(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except CtkktError as err:
            log.error(f"{type(err).__name__}: {err}")
            return err.exit_code
        except OSError as err:
            log.error(f"{err.strerror or err}: {err.filename or ''}")
            return 1
        except Exception as err:
            errors = traceback.format_exc()
            log.error(f"Error in {func.__name__}: {err}\n{errors}")
            return 1

    return capture
