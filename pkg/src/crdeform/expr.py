"""Exact polynomial / rational-series expressions over named variable blocks.

Syntax: integers, ``/`` for rationals (or division by a series with nonzero
constant term), ``i`` for the imaginary unit, ``+ - *``, ``^`` or ``**`` with
nonnegative integer exponents, parentheses, and variables such as ``z.1`` or a
bare block name when the block has a single variable.  Decimal literals are
rejected.
"""

from __future__ import annotations

import ast
import re

from .errors import InputError
from .series import GaussianRational, TruncatedSeries, VariableBlocks, reciprocal

__all__ = ["ExprError", "parse_series", "parse_number", "reject_floats"]


class ExprError(InputError):
    """Syntax or semantic error in an expression, with an optional position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


_FLOAT = re.compile(r"(?<![\w.])(\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|(?<![\w.])\d+[eE][+-]?\d+")
_DOTTED = re.compile(r"\b([A-Za-z_][A-Za-z_0-9]*)\.(\d+)\b")


def reject_floats(text: str, line: int | None = None, col0: int = 0):
    m = _FLOAT.search(text)
    if m:
        lit = m.group(0)
        hint = _rational_hint(lit)
        raise ExprError(f"non-exact literal {lit!r}; use {hint}", line, col0 + m.start() + 1)


def _rational_hint(lit: str) -> str:
    from fractions import Fraction

    try:
        f = Fraction(lit)
    except ValueError:  # pragma: no cover - regex guarantees a decimal
        return "a fraction p/q"
    return str(f) if f.denominator != 1 else str(f.numerator)


def _prepare(text: str) -> str:
    return _DOTTED.sub(lambda m: f"{m.group(1)}__{m.group(2)}", text).replace("^", "**")


class _Eval:
    def __init__(self, blocks: VariableBlocks | None, trunc: int, line, col0, text):
        self.blocks, self.trunc, self.line, self.col0, self.text = blocks, trunc, line, col0, text

    def err(self, node, msg):
        col = getattr(node, "col_offset", None)
        raise ExprError(msg, self.line, None if col is None else self.col0 + col + 1)

    def const(self, v):
        if self.blocks is None:
            return GaussianRational.coerce(v)
        return TruncatedSeries.constant(self.blocks, self.trunc, v)

    def is_const(self, v):
        return isinstance(v, GaussianRational) or (isinstance(v, TruncatedSeries)
                                                   and all(not any(e) for e in v.terms))

    def value_of_const(self, v) -> GaussianRational:
        return v if isinstance(v, GaussianRational) else v.constant_term()

    def visit(self, node):
        if isinstance(node, ast.Expression):
            return self.visit(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, int):
                self.err(node, f"unsupported literal {node.value!r}")
            return self.const(node.value)
        if isinstance(node, ast.Name):
            return self.name(node)
        if isinstance(node, ast.UnaryOp):
            v = self.visit(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
            self.err(node, "unsupported unary operator")
        if isinstance(node, ast.BinOp):
            a, b = self.visit(node.left), self.visit(node.right)
            op = node.op
            if isinstance(op, ast.Add):
                return a + b
            if isinstance(op, ast.Sub):
                return a - b
            if isinstance(op, ast.Mult):
                return a * b
            if isinstance(op, ast.Div):
                if self.is_const(b):
                    c = self.value_of_const(b)
                    if not c:
                        self.err(node, "division by zero")
                    return a * c.inverse()
                if not b.constant_term():
                    self.err(node, "division by a series vanishing at the origin")
                return a * reciprocal(b)
            if isinstance(op, ast.Pow):
                if not self.is_const(b):
                    self.err(node, "exponent must be a constant")
                e = self.value_of_const(b)
                if e.im or e.re.denominator != 1 or e.re < 0:
                    self.err(node, "exponent must be a nonnegative integer")
                return a ** int(e.re)
            self.err(node, "unsupported operator")
        self.err(node, f"unsupported syntax {type(node).__name__}")

    def name(self, node):
        nm = node.id
        if nm in ("i", "I"):
            return self.const(GaussianRational(0, 1))
        var = nm.replace("__", ".")
        if self.blocks is None:
            self.err(node, f"unexpected variable {var!r} in a number")
        try:
            idx = self.blocks.index(var)
        except InputError:
            self.err(node, f"unknown variable {var!r}; expected one of {self.blocks.names()}")
        return TruncatedSeries.variable(self.blocks, self.trunc, idx)


def _parse(text: str, blocks, trunc, line, col0):
    if not text.strip():
        raise ExprError("empty expression", line, col0 + 1)
    reject_floats(text, line, col0)
    src = _prepare(text.strip())
    lead = len(text) - len(text.lstrip())
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        col = None if exc.offset is None else col0 + lead + exc.offset
        raise ExprError(f"syntax error in {text.strip()!r}", line, col) from None
    return _Eval(blocks, trunc, line, col0 + lead, text).visit(tree)


def parse_series(text: str, blocks: VariableBlocks, trunc: int,
                 line: int | None = None, col0: int = 0) -> TruncatedSeries:
    """Parse an expression into a series over ``blocks`` truncated at ``trunc``."""
    out = _parse(text, blocks, trunc, line, col0)
    return out


def parse_number(text: str, line: int | None = None, col0: int = 0) -> GaussianRational:
    """Exact Gaussian rational such as ``-3/4``, ``1/4+1/8*i``."""
    return _parse(text, None, 0, line, col0)
