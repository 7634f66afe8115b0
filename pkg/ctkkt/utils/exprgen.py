"""
Random expressions for derivative sweeps. Every generated expression is
defined and smooth on all of R^n x R: log and sqrt see arguments bounded
away from zero, denominators are at least 1 and pow bases lie in [1, 3].
"""
import numpy as np

from ctkkt.core.exprdsl import (
    ONE,
    Expr,
    T_VAR,
    add,
    const,
    div,
    func,
    mul,
    neg,
    power,
    sub,
    var,
)

_EXPONENTS = (2.0, 3.0, -1.0, 0.5, 1.5, -2.0)
_SHAPES = ("add", "sub", "mul", "div", "pow", "sin", "cos", "exp", "log", "sqrt", "neg")


def _square(e: Expr) -> Expr:
    return power(e, 2.0)


def _leaf(rng: np.random.Generator, n: int) -> Expr:
    r = rng.random()
    if r < 0.2:
        return const(round(float(rng.uniform(-1.0, 1.0)), 3))
    if r < 0.3:
        return var(T_VAR)
    return var(int(rng.integers(1, n + 1)))


def random_expr(rng: np.random.Generator, n: int, depth: int = 3) -> Expr:
    if depth <= 0 or rng.random() < 0.15:
        return _leaf(rng, n)
    shape = _SHAPES[int(rng.integers(len(_SHAPES)))]
    a = random_expr(rng, n, depth - 1)
    if shape in ("add", "sub", "mul", "div"):
        b = random_expr(rng, n, depth - 1)
        if shape == "add":
            return add(a, b)
        if shape == "sub":
            return sub(a, b)
        if shape == "mul":
            return mul(a, b)
        return div(a, add(ONE, _square(b)))
    if shape == "pow":
        c = _EXPONENTS[int(rng.integers(len(_EXPONENTS)))]
        return power(add(func("cos", a), const(2.0)), c)
    if shape in ("sin", "cos"):
        return func(shape, a)
    if shape == "exp":
        return func("exp", func("sin", a))
    if shape == "log":
        return func("log", add(const(1.5), _square(a)))
    if shape == "sqrt":
        return func("sqrt", add(ONE, _square(a)))
    return neg(a)
