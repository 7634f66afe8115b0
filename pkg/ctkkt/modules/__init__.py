# ctkkt/modules/__init__.py
import pkgutil
from os.path import dirname


def list_all_modules():
    """Command modules in this package, each exporting a click `command`."""
    return sorted(
        info.name
        for info in pkgutil.iter_modules([dirname(__file__)])
        if not info.ispkg and not info.name.startswith("_")
    )


ALL_MODULES = list_all_modules()
