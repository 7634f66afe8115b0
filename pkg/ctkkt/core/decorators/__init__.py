# ctkkt/core/decorators/__init__.py
"""Decorators shared by the CLI commands."""

from .errors import capture_err
from .misc import exec_time

__all__ = ["capture_err", "exec_time"]
