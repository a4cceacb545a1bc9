"""Text grammar for expressions.

Infix notation with ``+ - * / ^`` (``**`` is accepted as a synonym for ``^``),
integer literals, identifiers and the functions ``exp``, ``ln``, ``arctan``
and ``int(integrand, var)`` (an unevaluated antiderivative).  Fractions such as
``1/2`` are ordinary divisions of integer literals and evaluate exactly.

``parse(to_text(e)) == e`` holds structurally for every expression this
package produces.
"""

from __future__ import annotations

import re

import sympy as sp
from sympy.printing.str import StrPrinter


class ParseError(ValueError):
    """Raised for malformed expression text."""


class UnknownFunctionError(ParseError):
    pass


class UndeclaredSymbolError(ParseError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCTIONS = {"exp": sp.exp, "ln": sp.log, "arctan": sp.atan}


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        val = m.group(kind)
        if val == "**":
            val = "^"
        out.append((kind, val))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := '-' unary | '+' unary | power
    # power  := atom ('^' unary)?        (right associative)
    # atom   := num | ident | ident '(' args ')' | '(' expr ')'

    def __init__(self, text: str, symbols: dict[str, sp.Symbol] | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols

    def peek(self) -> tuple[str, str]:
        return self.toks[self.i]

    def take(self, val: str | None = None) -> tuple[str, str]:
        tok = self.toks[self.i]
        if val is not None and tok[1] != val:
            raise ParseError(f"expected {val!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self) -> sp.Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise ParseError(f"trailing input at token {self.peek()[1]!r}")
        return e

    def expr(self) -> sp.Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> sp.Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> sp.Expr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return sp.Pow(base, self.unary())
        return base

    def atom(self) -> sp.Expr:
        kind, val = self.take()
        if kind == "num":
            return sp.Integer(int(val))
        if kind == "ident":
            if self.peek()[1] == "(":
                return self.call(val)
            return self.symbol(val)
        if val == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected token {val!r}")

    def call(self, name: str) -> sp.Expr:
        self.take("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.take(")")
        if name in _FUNCTIONS:
            if len(args) != 1:
                raise ParseError(f"{name}() takes one argument")
            return _FUNCTIONS[name](args[0])
        if name == "int":
            if len(args) != 2 or not isinstance(args[1], sp.Symbol):
                raise ParseError("int() takes (integrand, variable)")
            return sp.Integral(args[0], args[1])
        raise UnknownFunctionError(f"unknown function {name!r}")

    def symbol(self, name: str) -> sp.Symbol:
        if name in ("exp", "ln", "arctan", "int"):
            raise ParseError(f"{name} is reserved")
        if self.symbols is None:
            return sp.Symbol(name)
        if name not in self.symbols:
            raise UndeclaredSymbolError(f"undeclared symbol {name!r}")
        return self.symbols[name]


def parse(text: str, symbols: dict[str, sp.Symbol] | None = None) -> sp.Expr:
    """Parse expression text.

    With ``symbols`` given, identifiers outside it raise :class:`ParseError`.
    """
    return _Parser(text, symbols).parse()


class _Printer(StrPrinter):
    def _print_Pow(self, expr, rational=False):
        base, ex = expr.args
        if ex.is_Rational and ex.is_negative:
            return "1/" + self._print(sp.Pow(base, -ex, evaluate=False))
        b = self._print(base)
        if not (base.is_Symbol or (base.is_Integer and base.is_nonnegative)
                or isinstance(base, (sp.Function, sp.Integral))):
            b = f"({b})"
        e = self._print(ex)
        if not (ex.is_Symbol or (ex.is_Integer and ex.is_positive)):
            e = f"({e})"
        return f"{b}^{e}"

    def _print_log(self, expr):
        return f"ln({self._print(expr.args[0])})"

    def _print_atan(self, expr):
        return f"arctan({self._print(expr.args[0])})"

    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Integral(self, expr):
        (var,) = expr.variables
        if any(len(lim) > 1 for lim in expr.limits):
            raise ValueError("only indefinite integrals are printable")
        return f"int({self._print(expr.function)}, {self._print(var)})"

    def _print_Float(self, expr):
        raise ValueError("floating-point values are not part of the grammar")


_PRINTER = _Printer({"order": None})


def to_text(e: sp.Expr) -> str:
    return _PRINTER.doprint(sp.sympify(e))
