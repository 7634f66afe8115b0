# ctkkt/core/__init__.py
"""Certification core: expressions, model, linear algebra and the checks."""

from . import decorators
