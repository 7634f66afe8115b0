"""
Expression language for problem files.

Expressions range over the state variables z1..zn and the time t. They are
parsed into immutable `Expr` trees which can be printed back, evaluated,
compiled to Python callables and differentiated symbolically.
"""
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

from ctkkt.core.exceptions import (
    DimensionError,
    ExprDomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    VariableRangeError,
)

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
UNARY = ("neg",) + FUNCTIONS
BINARY = ("add", "sub", "mul", "div", "pow")

_ARITY = {"const": 0, "var": 0}
_ARITY.update({k: 1 for k in UNARY})
_ARITY.update({k: 2 for k in BINARY})

# printing precedence
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_ATOM_PREC = 5
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}

T_VAR = 0


@dataclass(frozen=True)
class Expr:
    """Node of an expression tree. `var` is 0 for t and k for z_k."""

    kind: str
    children: Tuple["Expr", ...] = ()
    value: Optional[float] = None
    var: Optional[int] = None
    offset: Optional[int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown node kind {self.kind!r}")
        if len(self.children) != _ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} expects {_ARITY[self.kind]} children, "
                f"got {len(self.children)}"
            )
        if self.kind == "pow" and not self.children[1].is_const:
            raise ValueError("pow exponent must be a constant")

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    def is_value(self, v: float) -> bool:
        return self.kind == "const" and self.value == v

    def __str__(self):
        return to_text(self)


VarId = Union[int, str]


def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(k: int) -> Expr:
    return Expr("var", var=k)


ZERO = const(0.0)
ONE = const(1.0)


# ===== Simplifying constructors =====

def neg(a: Expr) -> Expr:
    if a.is_const:
        return const(-a.value)
    if a.kind == "neg":
        return a.children[0]
    return Expr("neg", (a,))


def add(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if a.is_value(0.0):
        return b
    if b.is_value(0.0):
        return a
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if b.is_value(0.0):
        return a
    if a.is_value(0.0):
        return neg(b)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    if b.is_const:
        a, b = b, a
    if a.is_const:
        if a.value == 0.0:
            return ZERO
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return neg(b)
        if b.kind == "mul" and b.children[0].is_const:
            return mul(const(a.value * b.children[0].value), b.children[1])
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const and b.value != 0.0:
        return const(a.value / b.value)
    if a.is_value(0.0):
        return ZERO
    if b.is_value(1.0):
        return a
    return Expr("div", (a, b))


def power(base: Expr, exponent: Union[Expr, float]) -> Expr:
    if not isinstance(exponent, Expr):
        exponent = const(exponent)
    if exponent.is_value(0.0):
        return ONE
    if exponent.is_value(1.0):
        return base
    if base.is_const:
        try:
            return const(math.pow(base.value, exponent.value))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Expr("pow", (base, exponent))


_FOLD = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


def func(name: str, a: Expr) -> Expr:
    if a.is_const:
        try:
            return const(_FOLD[name](a.value))
        except (ValueError, OverflowError):
            pass
    return Expr(name, (a,))


# ===== Parser =====

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_ZVAR = re.compile(r"z(\d+)")


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = []
        self.pos = 0
        self._tokenize()

    def _byte(self, i: int) -> int:
        return len(self.text[:i].encode("utf-8"))

    def _tokenize(self):
        i = 0
        text = self.text
        while i < len(text):
            if text[i:].strip() == "":
                break
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                j = i
                while j < len(text) and text[j].isspace():
                    j += 1
                raise ExprSyntaxError(
                    f"unexpected character {text[j]!r}", self._byte(j), text
                )
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), self._byte(start)))
            i = m.end()
        self.tokens.append(("end", "", self._byte(len(text))))

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(
                f"expected {value!r}, found {found}", off, self.text
            )

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, off = self.take()
            rhs = self.term()
            e = _at(add(e, rhs) if op == "+" else sub(e, rhs), off)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, off = self.take()
            rhs = self.unary()
            e = _at(mul(e, rhs) if op == "*" else div(e, rhs), off)
        return e

    def unary(self) -> Expr:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return _at(neg(self.unary()), off)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.take()
            exp_off = self.peek()[2]
            exponent = self.unary()
            if not exponent.is_const:
                raise ExprSyntaxError(
                    "exponent must be a constant expression", exp_off, self.text
                )
            return _at(power(base, exponent), off)
        return base

    def atom(self) -> Expr:
        kind, text, off = self.take()
        if kind == "num":
            return _at(const(float(text)), off)
        if kind == "ident":
            if text == "t":
                return _at(var(T_VAR), off)
            m = _ZVAR.fullmatch(text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    raise VariableRangeError(
                        f"variable {text} out of range 1..{self.n}",
                        off,
                        self.text,
                    )
                return _at(var(k), off)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _at(func(text, arg), off)
            raise UnknownIdentifierError(
                f"unknown identifier {text!r}", off, self.text
            )
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off, self.text)


def _at(e: Expr, offset: int) -> Expr:
    """Attach a source offset to a node built by the parser."""
    if e.offset is None:
        return replace(e, offset=offset)
    return e


def parse_expr(text: str, n: int) -> Expr:
    """Parse `text` over z1..zn and t."""
    if n < 1:
        raise ValueError("dimension n must be positive")
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text)
    return _Parser(text, n).parse()


# ===== Printing =====

def _prec(e: Expr) -> int:
    if e.kind in _PREC:
        return _PREC[e.kind]
    if e.kind == "const" and e.value < 0:
        return _PREC["neg"]
    return _ATOM_PREC


def _const_text(v: float) -> str:
    s = repr(float(v))
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_text(e: Expr) -> str:
    """Render `e` in the expression grammar."""
    if e.kind == "const":
        return _const_text(e.value)
    if e.kind == "var":
        return "t" if e.var == T_VAR else f"z{e.var}"
    if e.kind in FUNCTIONS:
        return f"{e.kind}({to_text(e.children[0])})"
    if e.kind == "neg":
        child = e.children[0]
        inner = to_text(child)
        if _prec(child) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    left, right = e.children
    p = _PREC[e.kind]
    ltext, rtext = to_text(left), to_text(right)
    if _prec(left) < p or (e.kind == "pow" and _prec(left) <= p):
        ltext = f"({ltext})"
    strict = e.kind in ("sub", "div")
    if _prec(right) < p or (strict and _prec(right) == p):
        rtext = f"({rtext})"
    return f"{ltext} {_SYMBOL[e.kind]} {rtext}"


# ===== Evaluation =====

def _domain(reason: str, e: Expr) -> ExprDomainError:
    return ExprDomainError(reason, node_text=to_text(e), offset=e.offset)


def eval_expr(e: Expr, z: Sequence[float], t: float) -> float:
    """Evaluate `e` at state `z` and time `t` in IEEE double."""
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        if e.var == T_VAR:
            return float(t)
        if e.var > len(z):
            raise DimensionError(
                f"z{e.var} referenced but state has length {len(z)}"
            )
        return float(z[e.var - 1])
    if k == "neg":
        return -eval_expr(e.children[0], z, t)
    if k in FUNCTIONS:
        a = eval_expr(e.children[0], z, t)
        if k == "log" and a <= 0.0:
            raise _domain("log of non-positive value", e)
        if k == "sqrt" and a < 0.0:
            raise _domain("sqrt of negative value", e)
        try:
            return _FOLD[k](a)
        except (ValueError, OverflowError) as err:
            raise _domain(f"{k} failed: {err}", e)
    a = eval_expr(e.children[0], z, t)
    if k == "pow":
        c = e.children[1].value
        try:
            return math.pow(a, c)
        except (ValueError, OverflowError, ZeroDivisionError) as err:
            raise _domain(f"power failed: {err}", e)
    b = eval_expr(e.children[1], z, t)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if b == 0.0:
        raise _domain("division by zero", e)
    return a / b


def _to_python(e: Expr) -> str:
    k = e.kind
    if k == "const":
        if math.isnan(e.value):
            return "_nan"
        if math.isinf(e.value):
            return "_inf" if e.value > 0 else "(-_inf)"
        return f"({e.value!r})"
    if k == "var":
        return "t" if e.var == T_VAR else f"z[{e.var - 1}]"
    if k == "neg":
        return f"(-{_to_python(e.children[0])})"
    if k in FUNCTIONS:
        return f"_{k}({_to_python(e.children[0])})"
    a, b = (_to_python(c) for c in e.children)
    if k == "pow":
        return f"_pow({a}, {b})"
    return f"({a} {_SYMBOL[k]} {b})"


_NAMESPACE = {f"_{name}": fn for name, fn in _FOLD.items()}
_NAMESPACE["_pow"] = math.pow
_NAMESPACE["_inf"] = math.inf
_NAMESPACE["_nan"] = math.nan
_NAMESPACE["__builtins__"] = {}


def compile_exprs(
    exprs: Sequence[Expr], labels: Optional[Sequence[str]] = None
) -> Callable[[Sequence[float], float], list]:
    """
    Compile an expression vector into one callable `f(z, t) -> list`.
    Domain failures are re-raised as ExprDomainError located by re-running
    the tree evaluator.
    """
    exprs = tuple(exprs)
    body = ", ".join(_to_python(e) for e in exprs)
    code = compile(f"lambda z, t: [{body}]", "<ctkkt-expr>", "eval")
    fast = eval(code, dict(_NAMESPACE))

    def evaluate(z, t):
        try:
            return fast(z, t)
        except (ValueError, ZeroDivisionError, OverflowError) as err:
            for i, e in enumerate(exprs):
                try:
                    eval_expr(e, z, t)
                except ExprDomainError as located:
                    if labels is not None:
                        raise located.with_label(labels[i])
                    raise
            raise ExprDomainError(str(err))
        except IndexError:
            raise DimensionError(f"state of length {len(z)} too short")

    evaluate.exprs = exprs
    return evaluate


# ===== Differentiation =====

def _var_id(v: VarId) -> int:
    if isinstance(v, int):
        return v
    if v == "t":
        return T_VAR
    m = _ZVAR.fullmatch(v)
    if not m:
        raise ValueError(f"not a variable: {v!r}")
    return int(m.group(1))


# d/du f(u) for each function, as an expression in u
_CHAIN_RULES: Dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda a: func("cos", a),
    "cos": lambda a: neg(func("sin", a)),
    "exp": lambda a: func("exp", a),
    "log": lambda a: div(ONE, a),
    "sqrt": lambda a: div(const(0.5), func("sqrt", a)),
}


def differentiate(e: Expr, v: VarId) -> Expr:
    """Exact derivative of `e` with respect to t or z_k."""
    k = _var_id(v)
    return _diff(e, k)


def _diff(e: Expr, k: int) -> Expr:
    kind = e.kind
    if kind == "const":
        return ZERO
    if kind == "var":
        return ONE if e.var == k else ZERO
    if kind == "neg":
        return neg(_diff(e.children[0], k))
    if kind in FUNCTIONS:
        a = e.children[0]
        da = _diff(a, k)
        if da.is_value(0.0):
            return ZERO
        return mul(_CHAIN_RULES[kind](a), da)
    a, b = e.children
    if kind == "pow":
        c = b.value
        if float(c).is_integer():
            da = _diff(a, k)
            return mul(mul(const(c), power(a, c - 1.0)), da)
        # non-integer exponent: b^c = exp(c*log(b)), defined for b > 0
        return _diff(func("exp", mul(b, func("log", a))), k)
    da, db = _diff(a, k), _diff(b, k)
    if kind == "add":
        return add(da, db)
    if kind == "sub":
        return sub(da, db)
    if kind == "mul":
        return add(mul(da, b), mul(a, db))
    # quotient rule
    if db.is_value(0.0):
        return div(da, b)
    return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))


def gradient(e: Expr, n: int) -> Tuple[Expr, ...]:
    return tuple(_diff(e, k) for k in range(1, n + 1))


def hessian(e: Expr, n: int) -> Tuple[Tuple[Expr, ...], ...]:
    """Symmetric n x n Hessian; the lower triangle mirrors the upper."""
    grad = gradient(e, n)
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            rows[i][j] = rows[j][i] = _diff(grad[i], j + 1)
    return tuple(tuple(r) for r in rows)


def variables(e: Expr) -> frozenset:
    """Variable ids referenced by `e` (0 stands for t)."""
    if e.kind == "var":
        return frozenset((e.var,))
    out = frozenset()
    for c in e.children:
        out |= variables(c)
    return out


def depends_on_t(e: Expr) -> bool:
    return T_VAR in variables(e)
