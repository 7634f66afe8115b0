# ctkkt/__init__.py
"""
ctkkt - certification of KKT necessary conditions for continuous-time
programs with pointwise constraints.
"""
import logging
import os
import sys
import time

# Load config first
is_config = os.path.exists("config.py")
if is_config:
    from config import *
else:
    from sample_config import *

__version__ = "1.0.0"


# Logging class
class Log:
    PREFIXES = {
        logging.DEBUG: "[*]",
        logging.INFO: "[+]",
        logging.WARNING: "[!]",
        logging.ERROR: "[ERROR]",
    }

    def __init__(self, save_to_file=False, file_name="ctkkt.log"):
        self.save_to_file = save_to_file
        self.file_name = file_name
        self.logger = logging.getLogger("ctkkt")
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        if not self.logger.handlers:
            console = logging.StreamHandler(sys.stderr)
            console.setLevel(logging.INFO)
            console.setFormatter(logging.Formatter("%(message)s"))
            self.logger.addHandler(console)

    def _emit(self, level, msg):
        self.logger.log(level, f"{self.PREFIXES[level]}: {msg}")
        if self.save_to_file:
            with open(self.file_name, "a") as f:
                f.write(
                    f"[{logging.getLevelName(level)}]"
                    f"({time.ctime(time.time())}): {msg}\n"
                )

    def debug(self, msg):
        self._emit(logging.DEBUG, msg)

    def info(self, msg):
        self._emit(logging.INFO, msg)

    def warning(self, msg):
        self._emit(logging.WARNING, msg)

    def error(self, msg):
        self._emit(logging.ERROR, msg)

    def set_verbose(self, verbose: bool):
        for handler in self.logger.handlers:
            handler.setLevel(logging.DEBUG if verbose else logging.INFO)


log = Log(SAVE_LOG, LOG_FILE)
