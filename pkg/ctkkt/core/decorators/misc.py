from functools import wraps
from time import perf_counter

from ctkkt import log
from ctkkt.utils.formatter import get_readable_time


def exec_time(func):
    @wraps(func)
    def _time_it(*args, **kwargs):
        t1 = perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            total = perf_counter() - t1
            log.info(f"{func.__name__} took {get_readable_time(total)}")

    return _time_it
