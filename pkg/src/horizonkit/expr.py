"""Minimal arithmetic expression language for chart component functions.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = [ "-" | "+" ] power ;
    power   = atom [ "^" unary ] ;
    atom    = number | name | func "(" expr ")" | "(" expr ")" ;
    func    = "sin" | "cos" | "exp" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "-" | "+" ] digits ] ;
    name    = letter { letter | digit | "_" } ;

Expressions evaluate on floats, numpy arrays or :class:`~horizonkit.geometry.jets.Jet`
objects, and differentiate symbolically (``diff``) with light constant folding.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ParseError

FUNCTIONS = ("sin", "cos", "exp")


class Expr:
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def evaluate(self, env: Mapping[str, object]):
        raise NotImplementedError

    def variables(self) -> set[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def diff(self, var):
        return ZERO

    def evaluate(self, env):
        return self.value

    def variables(self):
        return set()

    def __str__(self):
        v = self.value
        if float(v).is_integer():
            return str(int(v))
        return repr(v)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ParseError(f"unbound variable {self.name!r}") from None

    def variables(self):
        return {self.name}

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def evaluate(self, env):
        return self.left.evaluate(env) + self.right.evaluate(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))

    def evaluate(self, env):
        return self.left.evaluate(env) * self.right.evaluate(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"{self.left}*{self.right}"


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def diff(self, var):
        num = add(mul(self.left.diff(var), self.right), neg(mul(self.left, self.right.diff(var))))
        return div(num, power(self.right, Num(2.0)))

    def evaluate(self, env):
        return self.left.evaluate(env) / self.right.evaluate(env)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left})/({self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr

    def diff(self, var):
        if isinstance(self.exponent, Num):
            n = self.exponent.value
            return mul(mul(Num(n), power(self.base, Num(n - 1))), self.base.diff(var))
        # d(b^e) = b^e (e' log b + e b'/b); log is not in the grammar, so require numeric exponents
        raise ParseError("only numeric exponents are supported")

    def evaluate(self, env):
        b = self.base.evaluate(env)
        e = self.exponent.evaluate(env)
        if float(e).is_integer():
            return b ** int(e)
        return b**e

    def variables(self):
        return self.base.variables() | self.exponent.variables()

    def __str__(self):
        return f"({self.base})^{self.exponent}"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def diff(self, var):
        inner = self.arg.diff(var)
        if self.func == "sin":
            outer = call("cos", self.arg)
        elif self.func == "cos":
            outer = neg(call("sin", self.arg))
        else:
            outer = self
        return mul(outer, inner)

    def evaluate(self, env):
        x = self.arg.evaluate(env)
        if hasattr(x, self.func) and not isinstance(x, np.ndarray):
            return getattr(x, self.func)()
        return getattr(np, self.func)(x)

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        return f"{self.func}({self.arg})"


ZERO = Num(0.0)
ONE = Num(1.0)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Num(float(x))


# Smart constructors fold constants so repeated differentiation stays small.
def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def neg(a: Expr) -> Expr:
    return mul(Num(-1.0), a)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(b, Num):
        a, b = b, a
    if isinstance(a, Num) and isinstance(b, Mul) and isinstance(b.left, Num):
        return mul(Num(a.value * b.left.value), b.right)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Num):
        if b.value == 0:
            raise ZeroDivisionError("division by constant zero")
        return mul(Num(1.0 / b.value), a)
    if a == ZERO:
        return ZERO
    return Div(a, b)


def power(a: Expr, e: Expr) -> Expr:
    if isinstance(e, Num):
        if e.value == 0:
            return ONE
        if e.value == 1:
            return a
        if isinstance(a, Num):
            return Num(a.value**e.value)
    return Pow(a, e)


def call(func: str, a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(float(getattr(math, func)(a.value)))
    return Call(func, a)


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"bad character at {pos} in {text!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name))
        else:
            tokens.append(("op", op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, op=None):
        tok = self.peek()
        if op is not None and tok != ("op", op):
            raise ParseError(f"expected {op!r} in {self.text!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        if self.i != len(self.tokens):
            raise ParseError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            r = self.term()
            e = add(e, r) if op == "+" else add(e, neg(r))
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            r = self.unary()
            e = mul(e, r) if op == "*" else div(e, r)
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Num(val)
        if kind == "name":
            if val in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return call(val, arg)
            return Var(val)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected token {val!r} in {self.text!r}")


def parse(text: str | float | int) -> Expr:
    if isinstance(text, (int, float)):
        return Num(float(text))
    return _Parser(str(text)).parse()
