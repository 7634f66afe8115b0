"""
Text formatting helpers for terminal reports.
"""
import click


def bold(text: str) -> str:
    return click.style(str(text), bold=True)


def section(title: str, body: dict = None, indent: int = 0) -> str:
    """A titled block of `key: value` lines, keys padded to one column."""
    pad = " " * indent
    lines = ["", pad + bold(title)]
    if body:
        width = max(len(str(k)) for k in body)
        lines += [f"{pad}  • {str(k):<{width}} : {v}" for k, v in body.items()]
    return "\n".join(lines) + "\n"
