import math


def get_readable_time(seconds: float) -> str:
    """Wall time of a command: milliseconds below one second, then s and m:s."""
    if seconds < 1:
        return f"{seconds * 1000:.1f}ms"
    if seconds < 60:
        return f"{seconds:.3f}s"
    minutes, rest = divmod(int(seconds), 60)
    hours, minutes = divmod(minutes, 60)
    if hours:
        return f"{hours}h:{minutes:02d}m:{rest:02d}s"
    return f"{minutes}m:{rest:02d}s"


def fmt_num(x) -> str:
    """Report formatting: n/a for missing values, 6 significant digits."""
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def parse_float_list(text: str):
    """'1, 2.5,-3' -> [1.0, 2.5, -3.0]."""
    return [float(s) for s in text.split(",") if s.strip()]
