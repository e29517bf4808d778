"""Expression language: parser, printer, evaluation and exact calculus."""

import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from sympy.printing.precedence import PRECEDENCE
from sympy.printing.str import StrPrinter

import config
from errors import LeafspaceError
from quadrature import Region, nested_quad

logger = logging.getLogger(__name__)


class ExpressionSyntaxError(LeafspaceError):
    """Text is not in the expression grammar."""

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}" + (f" in {text!r}" if text else ""))
        self.position = position
        self.text = text


class UndeclaredVariableError(LeafspaceError):
    """A variable is used that the context does not declare, or is left unassigned."""

    def __init__(self, name: str, message: str = None):
        super().__init__(message or f"undeclared variable {name!r}")
        self.name = name


class NonFiniteError(LeafspaceError):
    """Evaluation produced a pole, log of zero or another non-finite value."""

    def __init__(self, subtree: str, point: Mapping = None):
        where = ""
        if point:
            where = " at " + ", ".join(f"{k}={v:.6g}" for k, v in point.items())
        super().__init__(f"non-finite value of {subtree}{where}")
        self.subtree = subtree


class UnsupportedOperationError(LeafspaceError):
    """The operation is outside what the expression layer supports."""


@lru_cache(maxsize=None)
def chart_symbol(i: int) -> sp.Symbol:
    return sp.Symbol(f"x{i}", real=True)


@lru_cache(maxsize=None)
def simplex_symbol(i: int) -> sp.Symbol:
    return sp.Symbol(f"t{i}", real=True)


def chart_symbols(q: int) -> Tuple[sp.Symbol, ...]:
    """Chart variables x1..xq."""
    return tuple(chart_symbol(i) for i in range(1, q + 1))


def simplex_symbols(k: int, start: int = 1) -> Tuple[sp.Symbol, ...]:
    """Simplex parameters t_start..tk."""
    return tuple(simplex_symbol(i) for i in range(start, k + 1))


@dataclass(frozen=True)
class VariableContext:
    """Declared variables: x1..xq and, when simplex_dim is set, t0..t_{simplex_dim}."""
    q: int
    simplex_dim: Optional[int] = None

    @property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        names = chart_symbols(self.q)
        if self.simplex_dim is not None:
            names += simplex_symbols(self.simplex_dim, start=0)
        return names

    def lookup(self, name: str) -> sp.Symbol:
        for symbol in self.symbols:
            if symbol.name == name:
                return symbol
        raise UndeclaredVariableError(name)


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to its variable context."""
    expr: sp.Expr
    context: VariableContext
    tol: float = config.DEFAULT_TOL

    def __str__(self):
        return format_expr(self.expr)

    def with_expr(self, expr: sp.Expr) -> "Expression":
        return Expression(expr, self.context, self.tol)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

FUNCTIONS = {
    "exp": sp.exp,
    "log": sp.log,
    "abs": sp.Abs,
    "sin": sp.sin,
    "cos": sp.cos,
}

_TOKEN = re.compile(
    r"(?P<number>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN.match(text, pos)
        if not match:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), pos))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over the expression grammar, with unary signs."""

    def __init__(self, text: str, context: VariableContext):
        self.text = text
        self.context = context
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, value: str):
        kind, text, pos = self.current
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos, self.text)
        return self.advance()

    def parse(self) -> sp.Expr:
        result = self.expr()
        kind, text, pos = self.current
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", pos, self.text)
        return result

    def expr(self) -> sp.Expr:
        result = self.term()
        while self.current[1] in ("+", "-") and self.current[0] == "op":
            op = self.advance()[1]
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> sp.Expr:
        result = self.unary()
        while self.current[1] in ("*", "/") and self.current[0] == "op":
            op = self.advance()[1]
            rhs = self.unary()
            result = result * rhs if op == "*" else result / rhs
        return result

    def unary(self) -> sp.Expr:
        if self.current[0] == "op" and self.current[1] in ("+", "-"):
            op = self.advance()[1]
            operand = self.unary()
            return -operand if op == "-" else operand
        return self.factor()

    def factor(self) -> sp.Expr:
        base = self.base()
        if self.current[0] == "op" and self.current[1] == "^":
            self.advance()
            sign = 1
            if self.current[0] == "op" and self.current[1] in ("+", "-"):
                sign = -1 if self.advance()[1] == "-" else 1
            kind, text, pos = self.current
            if kind != "number" or not text.isdigit():
                raise ExpressionSyntaxError("exponent must be an integer", pos, self.text)
            self.advance()
            return sp.Pow(base, sign * int(text))
        return base

    def base(self) -> sp.Expr:
        kind, text, pos = self.current
        if kind == "number":
            self.advance()
            return sp.Rational(text)
        if kind == "ident":
            self.advance()
            if text in FUNCTIONS:
                self.expect("(")
                argument = self.expr()
                self.expect(")")
                return FUNCTIONS[text](argument)
            return self.context.lookup(text)
        if kind == "op" and text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", pos, self.text)


def parse_expr(text: str, context: VariableContext, tol: float = None) -> Expression:
    """Parse text into an Expression with exact rational literals.

    Args:
        text: Expression text
        context: Declared chart and simplex variables
        tol: Tolerance carried to integral evaluation

    Returns:
        Parsed Expression
    """
    expr = _Parser(text, context).parse()
    return Expression(sp.sympify(expr), context, tol or config.DEFAULT_TOL)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

class _GrammarPrinter(StrPrinter):
    """Prints in the parser's grammar: '^' powers and abs()."""

    def _print_Pow(self, expr, rational=False):
        base, exponent = expr.as_base_exp()
        if exponent.is_Integer and exponent < 0:
            positive = sp.Pow(base, -exponent, evaluate=False)
            return "1/%s" % self.parenthesize(positive, PRECEDENCE["Mul"], strict=True)
        if exponent.is_Integer:
            return "%s^%s" % (self.parenthesize(base, PRECEDENCE["Pow"], strict=True), self._print(exponent))
        return "%s^(%s)" % (self.parenthesize(base, PRECEDENCE["Pow"], strict=True), self._print(exponent))

    def _print_Abs(self, expr):
        return "abs(%s)" % self._print(expr.args[0])

    def _print_Exp1(self, expr):
        return "exp(1)"


_PRINTER = _GrammarPrinter({"order": "none"})


def format_expr(expr: Union[Expression, sp.Expr]) -> str:
    """Render an expression in the input grammar."""
    if isinstance(expr, Expression):
        expr = expr.expr
    return _PRINTER.doprint(expr)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _outer_integrals(expr: sp.Basic) -> List[sp.Integral]:
    if isinstance(expr, sp.Integral):
        return [expr]
    found = []
    for arg in expr.args:
        for node in _outer_integrals(arg):
            if node not in found:
                found.append(node)
    return found


def _bound_symbols(node: sp.Integral) -> Tuple[sp.Symbol, ...]:
    return tuple(limit[0] for limit in node.limits)


def _compile_integral(node: sp.Integral, symbols: Tuple[sp.Symbol, ...], tol: float):
    bound = _bound_symbols(node)
    outer = tuple(s for s in symbols if s not in bound)
    integrand = _compiled(node.function, outer + bound, tol)
    ranges = []
    for i, (_, lo, hi) in enumerate(node.limits):
        args = bound[i + 1:] + outer
        lo_fn = sp.lambdify(args, lo, modules="numpy")
        hi_fn = sp.lambdify(args, hi, modules="numpy")
        ranges.append(lambda *a, lo_fn=lo_fn, hi_fn=hi_fn: (float(lo_fn(*a)), float(hi_fn(*a))))
    n = len(bound)
    description = format_expr(node)

    def run(*values):
        outer_values = tuple(v for s, v in zip(symbols, values) if s not in bound)

        def func(*xs):
            return float(integrand(*xs[n:], *xs[:n]))

        return nested_quad(func, ranges, args=outer_values, tol=tol, region=description)

    return run


@lru_cache(maxsize=8192)
def _compiled(expr: sp.Expr, symbols: Tuple[sp.Symbol, ...], tol: float):
    """Numeric callable of expr over symbols; integral nodes are integrated adaptively."""
    integrals = _outer_integrals(expr)
    if not integrals:
        fn = sp.lambdify(symbols, expr, modules="numpy")
        return lambda *values: fn(*(np.float64(v) for v in values))

    placeholders = tuple(sp.Dummy(f"I{i}") for i in range(len(integrals)))
    outer = expr.xreplace(dict(zip(integrals, placeholders)))
    outer_fn = sp.lambdify(symbols + placeholders, outer, modules="numpy")
    parts = [_compile_integral(node, symbols, tol) for node in integrals]

    def fn(*values):
        inner = [np.float64(part(*values)) for part in parts]
        return outer_fn(*(np.float64(v) for v in values), *inner)

    return fn


def _raw_value(expr: sp.Expr, symbols, values, tol) -> float:
    with np.errstate(all="ignore"):
        try:
            return float(_compiled(expr, symbols, tol)(*values))
        except (ZeroDivisionError, OverflowError, ValueError):
            return math.nan


def _locate_nonfinite(expr: sp.Expr, symbols, values, tol) -> sp.Expr:
    if isinstance(expr, sp.Integral) or not expr.args:
        return expr
    for arg in expr.args:
        if not isinstance(arg, sp.Expr) or not arg.free_symbols <= set(symbols):
            continue
        if not math.isfinite(_raw_value(arg, symbols, values, tol)):
            return _locate_nonfinite(arg, symbols, values, tol)
    return expr


def evaluate_expr(expr: sp.Expr, point: Mapping[sp.Symbol, float], tol: float = None) -> float:
    """Evaluate a sympy expression at a point given per symbol.

    Args:
        expr: Expression, possibly with integral nodes
        point: Values for every free symbol of expr
        tol: Absolute tolerance for integral nodes

    Returns:
        Finite float value
    """
    tol = tol or config.DEFAULT_TOL
    expr = sp.sympify(expr)
    symbols = tuple(sorted(expr.free_symbols, key=lambda s: s.name))
    missing = [s.name for s in symbols if s not in point]
    if missing:
        raise UndeclaredVariableError(missing[0], f"no value for variable {missing[0]!r}")
    values = tuple(float(point[s]) for s in symbols)
    value = _raw_value(expr, symbols, values, tol)
    if not math.isfinite(value):
        culprit = _locate_nonfinite(expr, symbols, values, tol)
        raise NonFiniteError(format_expr(culprit), {s.name: v for s, v in zip(symbols, values)})
    return value


def evaluate(e: Union[Expression, sp.Expr], point: Union[Mapping, Sequence[float]], tol: float = None) -> float:
    """Evaluate an expression at a point.

    Args:
        e: Expression (or bare sympy expression)
        point: Mapping from variable name or symbol to value, or a sequence
            aligned with the context variables x1..xq, t0..tk
        tol: Overrides the expression's stored tolerance

    Returns:
        Value of e at point
    """
    if isinstance(e, Expression):
        expr, tol = e.expr, tol or e.tol
        symbols = e.context.symbols
    else:
        expr = sp.sympify(e)
        symbols = tuple(sorted(expr.free_symbols, key=lambda s: s.name))
    if isinstance(point, Mapping):
        by_name = {(k.name if isinstance(k, sp.Symbol) else k): v for k, v in point.items()}
        values = {s: by_name[s.name] for s in expr.free_symbols if s.name in by_name}
    else:
        values = dict(zip(symbols, point))
    return evaluate_expr(expr, values, tol)


# ---------------------------------------------------------------------------
# Calculus
# ---------------------------------------------------------------------------

def _absorb_sign(expr: sp.Expr) -> sp.Expr:
    # d|u| = sign(u) du; rewrite so that d log|u| comes out as u'/u
    return expr.replace(sp.sign, lambda u: u / sp.Abs(u))


def diff_expr(expr: sp.Expr, symbol: sp.Symbol) -> sp.Expr:
    """Exact partial derivative of a sympy expression.

    Integral nodes whose bound variables include symbol are rejected; free
    variables pass under the integral sign.
    """
    for node in expr.atoms(sp.Integral):
        if symbol in _bound_symbols(node):
            raise UnsupportedOperationError(
                f"cannot differentiate in {symbol} under an integral over {symbol}"
            )
    return _absorb_sign(sp.diff(expr, symbol))


def differentiate(e: Expression, v: Union[str, sp.Symbol]) -> Expression:
    """Partial derivative of e in the declared variable v."""
    symbol = e.context.lookup(v.name if isinstance(v, sp.Symbol) else v)
    return e.with_expr(diff_expr(e.expr, symbol))


def substitute(expr: sp.Expr, bindings: Mapping[sp.Symbol, sp.Expr]) -> sp.Expr:
    """Simultaneous substitution of free variables."""
    if not bindings:
        return expr
    if expr.has(sp.Integral):
        return expr.subs(dict(bindings), simultaneous=True)
    return expr.xreplace(dict(bindings))


def compose_substitute(e: Expression, bindings: Mapping[Union[str, sp.Symbol], Expression]) -> Expression:
    """Substitute expressions for the chart variables of e, simultaneously.

    Args:
        e: Expression to rewrite
        bindings: Chart variable to replacement expression

    Returns:
        Rewritten expression in the bindings' context
    """
    resolved: Dict[sp.Symbol, sp.Expr] = {}
    target_context = e.context
    for key, value in bindings.items():
        symbol = e.context.lookup(key.name if isinstance(key, sp.Symbol) else key)
        if isinstance(value, Expression):
            target_context = value.context
            resolved[symbol] = value.expr
        else:
            resolved[symbol] = sp.sympify(value)
    for symbol in chart_symbols(e.context.q):
        if symbol in e.expr.free_symbols and symbol not in resolved:
            raise UndeclaredVariableError(symbol.name, f"no binding for chart variable {symbol.name!r}")
    return Expression(substitute(e.expr, resolved), target_context, e.tol)


def integral_node(expr: sp.Expr, region: Region, variables: Sequence[sp.Symbol]) -> sp.Expr:
    """A lazy definite-integral node of expr over region in variables."""
    variables = tuple(variables)
    for node in expr.atoms(sp.Integral):
        if set(_bound_symbols(node)) & set(variables):
            raise UnsupportedOperationError("nested integral over the same variable")
    if not variables:
        return expr
    if expr == 0:
        return sp.Integer(0)
    return sp.Integral(expr, *region.limits(variables))


def integrate_region(e: Union[Expression, sp.Expr], region: Region, variables: Sequence, tol: float = None) -> float:
    """Integrate e over region in the given variables.

    Args:
        e: Integrand
        region: Box, simplex, cube or oriented interval
        variables: Integration variables (symbols or names), one per region axis
        tol: Absolute error target

    Returns:
        Integral value
    """
    expr = e.expr if isinstance(e, Expression) else sp.sympify(e)
    tol = tol or (e.tol if isinstance(e, Expression) else config.DEFAULT_TOL)
    if tol <= 0:
        raise UnsupportedOperationError("tolerance must be positive")
    symbols = tuple(v if isinstance(v, sp.Symbol) else sp.Symbol(v, real=True) for v in variables)
    node = integral_node(expr, region, symbols)
    extra = node.free_symbols
    if extra:
        name = sorted(s.name for s in extra)[0]
        raise UndeclaredVariableError(name, f"integrand leaves {name!r} unassigned")
    return evaluate_expr(node, {}, tol)
