"""Closed-form expressions for parametric families in JSON configs.

Expressions such as ``"2**(i-1)/3**i"`` or ``"(n+2)*2**-n"`` are parsed with
:mod:`ast` and evaluated over a whitelist of operators and functions.
Integer literals are promoted to :class:`fractions.Fraction`, so rational
expressions stay exact; transcendental functions return floats.
"""

from __future__ import annotations

import ast
import math
from fractions import Fraction
from functools import lru_cache

_FUNCS = {
    "log": math.log,
    "log2": math.log2,
    "exp": math.exp,
    "sqrt": math.sqrt,
    "abs": abs,
    "min": min,
    "max": max,
    "floor": math.floor,
    "ceil": math.ceil,
    "hypot": math.hypot,
}
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    pass


def _coerce(value):
    if isinstance(value, bool):
        raise ExpressionError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    return value


class Expression:
    """A parsed expression in a fixed set of variable names."""

    def __init__(self, source: str | int | float, variables: tuple[str, ...] = ("i",)):
        self.source = str(source)
        self.variables = variables
        try:
            self._tree = ast.parse(self.source, mode="eval").body
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"operator not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"literal not allowed in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError(f"function not allowed in {self.source!r}")
            if node.keywords:
                raise ExpressionError("keyword arguments are not allowed")
            for arg in node.args:
                self._check(arg)
        else:
            raise ExpressionError(f"unsupported syntax in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            a = self._eval(node.left, env)
            b = self._eval(node.right, env)
            if isinstance(node.op, ast.Pow) and isinstance(b, Fraction) and b.denominator == 1:
                b = int(b)
            return _BINOPS[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return _coerce(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return _coerce(env[node.id])
            return _CONSTS[node.id]
        args = [self._eval(a, env) for a in node.args]
        return _coerce(_FUNCS[node.func.id](*args))

    def __call__(self, *values):
        if len(values) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} argument(s)")
        return self._eval(self._tree, dict(zip(self.variables, values)))

    def __repr__(self):
        return f"Expression({self.source!r})"


@lru_cache(maxsize=None)
def compile_expr(source: str, variables: tuple[str, ...] = ("i",)) -> Expression:
    return Expression(source, variables)


def parse_number(value) -> Fraction | float:
    """JSON number or string such as ``"2/3"``/``"inf"``; rationals stay exact."""
    if isinstance(value, bool):
        raise ExpressionError("booleans are not numbers")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return compile_expr(value, ())()
    raise ExpressionError(f"not a number: {value!r}")
