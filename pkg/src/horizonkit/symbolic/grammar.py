"""Plain-text grammar for abstract-index tensor expressions and identity files.

EBNF::

    file      = { line } ;
    line      = [ name ":" chain ] [ "#" comment ] ;
    chain     = expr "==" expr { "==" expr } ;
    expr      = [ "+" | "-" ] term { ( "+" | "-" ) term } ;
    term      = factor { "*" factor } ;
    factor    = rational | primary [ indices ] ;
    primary   = NAME [ "(" expr { "," expr } ")" ] | "(" expr ")" ;
    indices   = "[" index { "," index } "]" ;
    index     = [ "^" ] NAME ;
    rational  = INT [ "/" INT ] ;

Tensors without an index list are slot-ordered objects; applying ``[...]``
names their slots (``^`` marks an upper index) and repeated names contract.

Base tensors: ``g`` (metric), ``V`` (the vector field, as a covector),
``R`` (Riemann, ``R[a,b,c,^d]``), ``Ric``, ``S`` (scalar curvature).

Operators (``X`` any unindexed object):

========================  ==================================================
``Nabla(X)``              covariant derivative, new slot first
``Box(X)``                ``-nabla^e nabla_e X``
``Div(X)``                ``nabla^e X_{e...}``
``LieV(g)``, ``LieV(Ric)``  Lie derivative along ``V`` (kept as an atom)
``Lie(X, g)``             ``nabla_a X_b + nabla_b X_a`` for a vector ``X``
``Lie(X, Ric)``           ``X^e nabla_e Ric_ab + Ric_eb nabla_a X^e + Ric_ae nabla_b X^e``
``Riem(u)``               ``R_a^c_b^d u_cd``
``RicSharp(X)``           ``Ric_a^b X_b`` or ``Ric_a^c u_cb``
``Sym(u)``                ``(u_ab + u_ba)/2``
``Sharp(X)``, ``Flat(X)``  all slots up / down
========================  ==================================================
"""
from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from ..errors import ParseError, StructuralError, UnsupportedHeadError
from .calculus import nabla
from .core import HEADS, Index, Monomial, TensorExpr, fresh_labels, rename_monomial

BASE = {"g": 2, "V": 1, "R": 4, "Ric": 2, "S": 0}
LIE_HEADS = {"g": "LieVg", "Ric": "LieVRic", "R": "LieVR"}
OPERATORS = ("Nabla", "Box", "Div", "LieV", "Lie", "Riem", "RicSharp", "Sym", "Sharp", "Flat")


@dataclass(frozen=True)
class Slotted:
    """An expression together with an ordered list of unnamed (placeholder) slots."""

    expr: TensorExpr
    slots: tuple[Index, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.slots)


@dataclass
class Term:
    coeff: Fraction
    value: Slotted


@dataclass
class Identity:
    name: str
    sides: list[list[Term]]
    text: str = ""
    line: int = 0

    def side_expr(self, i: int) -> TensorExpr:
        return sum_terms(self.sides[i])


def sum_terms(terms: list[Term]) -> TensorExpr:
    out = None
    for t in terms:
        if t.value.slots:
            raise StructuralError("top-level terms must carry index lists")
        e = t.value.expr.scaled(t.coeff)
        out = e if out is None else out + e
    return out if out is not None else TensorExpr.zero()


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9_]*)|(==|[-+*/^()\[\],:]))")


def _tokenize(text: str) -> list[tuple[str, object]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r} at column {pos} in {text!r}")
        num, name, op = m.groups()
        out.append(("int", int(num)) if num else ("name", name) if name else ("op", op))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self._ph = itertools.count()
        self._written: list[Counter] = []

    # -- token helpers
    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None)

    def accept(self, op: str) -> bool:
        if self.peek() == ("op", op):
            self.i += 1
            return True
        return False

    def expect(self, op: str):
        if not self.accept(op):
            raise ParseError(f"expected {op!r} but found {self.peek()[1]!r} in {self.text!r}")

    def placeholder(self, up: bool = False) -> Index:
        return Index(f"#{next(self._ph)}", up)

    # -- grammar
    def chain(self) -> list[list[Term]]:
        sides = [self.expr()]
        while self.accept("=="):
            sides.append(self.expr())
        if len(sides) < 2:
            raise ParseError(f"identity needs '==' in {self.text!r}")
        return sides

    def expr(self) -> list[Term]:
        sign = Fraction(1)
        if self.accept("-"):
            sign = Fraction(-1)
        else:
            self.accept("+")
        terms = [self.term(sign)]
        while self.peek() in (("op", "+"), ("op", "-")):
            s = Fraction(1) if self.take_op() == "+" else Fraction(-1)
            terms.append(self.term(s))
        return terms

    def take_op(self) -> str:
        kind, val = self.peek()
        self.i += 1
        return val

    def term(self, sign: Fraction) -> Term:
        coeff = sign
        value: Slotted | None = None
        self._written.append(Counter())
        while True:
            kind, val = self.peek()
            if kind == "int":
                self.i += 1
                num = Fraction(val)
                if self.accept("/"):
                    kind, den = self.peek()
                    if kind != "int":
                        raise ParseError(f"expected integer denominator in {self.text!r}")
                    self.i += 1
                    if den == 0:
                        raise ParseError("zero denominator")
                    num /= den
                coeff *= num
            else:
                f = self.factor()
                value = f if value is None else self.product(value, f)
            if not self.accept("*"):
                break
        over = sorted(k for k, n in self._written.pop().items() if n > 2)
        if over:
            raise StructuralError(f"index {over[0]!r} written more than twice in one term of {self.text!r}")
        if value is None:
            value = Slotted(TensorExpr.scalar(1))
        return Term(coeff, value)

    def factor(self) -> Slotted:
        kind, val = self.peek()
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            v = self.combine(inner)
        elif kind == "name":
            self.i += 1
            v = self.primary(val)
        else:
            raise ParseError(f"unexpected token {val!r} in {self.text!r}")
        if self.peek() == ("op", "["):
            v = self.indices(v)
        return v

    def indices(self, v: Slotted) -> Slotted:
        self.expect("[")
        idx = []
        while True:
            up = self.accept("^")
            kind, name = self.peek()
            if kind != "name":
                raise ParseError(f"expected index name in {self.text!r}")
            self.i += 1
            idx.append(Index(name, up))
            if not self.accept(","):
                break
        self.expect("]")
        if self._written:
            self._written[-1].update(i.label for i in idx)
        return apply_indices(v, idx)

    def args(self) -> list[list[Term]]:
        self.expect("(")
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        self.expect(")")
        return out

    def primary(self, name: str) -> Slotted:
        if name in BASE:
            slots = tuple(self.placeholder() for _ in range(BASE[name]))
            return Slotted(TensorExpr.atom(name, *slots), slots)
        if name not in OPERATORS:
            raise ParseError(f"unknown tensor or operator {name!r} in {self.text!r}")
        if name in ("LieV", "Lie"):
            return self.lie(name)
        (arg,) = self.args()
        x = self.combine(arg)
        return getattr(self, "op_" + name.lower())(x)

    def lie(self, name: str) -> Slotted:
        self.expect("(")
        if name == "Lie":
            vec = self.combine(self.expr())
            self.expect(",")
        kind, target = self.peek()
        if kind != "name":
            raise ParseError(f"Lie derivative target must be a tensor name in {self.text!r}")
        self.i += 1
        self.expect(")")
        if name == "LieV":
            if target not in LIE_HEADS:
                raise UnsupportedHeadError(f"Lie derivative of {target!r} is not supported")
            slots = tuple(self.placeholder() for _ in range(HEADS[LIE_HEADS[target]].rank))
            return Slotted(TensorExpr.atom(LIE_HEADS[target], *slots), slots)
        if vec.rank != 1:
            raise StructuralError("Lie(X, T) needs a vector X")
        if target == "g":
            return self.lie_metric(vec)
        if target == "Ric":
            return self.lie_ricci(vec)
        raise UnsupportedHeadError(f"Lie derivative of {target!r} is not supported")

    # -- slot algebra
    def combine(self, terms: list[Term]) -> Slotted:
        out = None
        for t in terms:
            v = Slotted(t.value.expr.scaled(t.coeff), t.value.slots)
            out = v if out is None else self.add(out, v)
        return out

    def add(self, x: Slotted, y: Slotted) -> Slotted:
        if x.rank != y.rank:
            raise StructuralError(f"cannot add objects of rank {x.rank} and {y.rank}")
        mapping = {s.label: t for s, t in zip(y.slots, x.slots)}
        return Slotted(x.expr + relabel(y.expr, mapping), x.slots)

    def product(self, x: Slotted, y: Slotted) -> Slotted:
        return Slotted(x.expr * y.expr, x.slots + y.slots)

    def contract(self, x: Slotted, i: int, j: int) -> Slotted:
        used = x.expr.labels()
        lab = fresh_labels(used, 1, prefer="efhkmnpqrsuvwxyz")[0]
        si, sj = x.slots[i], x.slots[j]
        mapping = {si.label: Index(lab, si.up), sj.label: Index(lab, not si.up)}
        slots = tuple(s for k, s in enumerate(x.slots) if k not in (i, j))
        return Slotted(relabel(x.expr, mapping), slots)

    def permute(self, x: Slotted, order) -> Slotted:
        return Slotted(x.expr, tuple(x.slots[k] for k in order))

    def swap_names(self, x: Slotted, i: int, j: int) -> Slotted:
        """Exchange which slots carry the i-th and j-th placeholder names (a transpose)."""
        si, sj = x.slots[i], x.slots[j]
        expr = relabel(x.expr, {si.label: Index(sj.label, si.up), sj.label: Index(si.label, sj.up)})
        return Slotted(expr, x.slots)

    def nabla(self, x: Slotted, idx: Index | None = None) -> Slotted:
        idx = idx or self.placeholder()
        return Slotted(nabla(x.expr, idx), (idx,) + x.slots)

    # -- operators
    def op_nabla(self, x):
        return self.nabla(x)

    def op_box(self, x):
        lab = fresh_labels(x.expr.labels(), 1, prefer="efhkmnpqrsuvwxyz")[0]
        inner = nabla(x.expr, Index(lab, False))
        outer = nabla(inner, Index(lab, True))
        return Slotted(outer.scaled(-1), x.slots)

    def op_div(self, x):
        if x.rank < 1:
            raise StructuralError("divergence of a scalar")
        first = x.slots[0]
        d = Index(first.label, not first.up)
        return Slotted(nabla(x.expr, d), x.slots[1:])

    def op_riem(self, u):
        if u.rank != 2:
            raise StructuralError("Riem acts on 2-tensors")
        r = self.primary("R")
        # R_{a c b d} u^{c d}: slots (a, c, b, d, u0, u1)
        return self.contract(self.contract(self.product(r, u), 1, 4), 2, 3)

    def op_ricsharp(self, x):
        ric = self.primary("Ric")
        if x.rank not in (1, 2):
            raise StructuralError("RicSharp acts on vectors and 2-tensors")
        return self.contract(self.product(ric, x), 1, 2)

    def op_sym(self, u):
        if u.rank != 2:
            raise StructuralError("Sym acts on 2-tensors")
        return Slotted(self.add(u, self.swap_names(u, 0, 1)).expr.scaled(Fraction(1, 2)), u.slots)

    def op_sharp(self, x):
        return self._variance(x, True)

    def op_flat(self, x):
        return self._variance(x, False)

    def _variance(self, x, up):
        mapping = {s.label: Index(s.label, up) for s in x.slots}
        return Slotted(relabel(x.expr, mapping), tuple(Index(s.label, up) for s in x.slots))

    def lie_metric(self, vec: Slotted) -> Slotted:
        d = self.nabla(vec)
        return self.add(d, self.swap_names(d, 0, 1))

    def lie_ricci(self, vec: Slotted) -> Slotted:
        ric = lambda: self.primary("Ric")  # noqa: E731
        t1 = self.contract(self.product(vec, self.nabla(ric())), 0, 1)
        t2 = self.permute(self.contract(self.product(ric(), self.nabla(vec)), 0, 3), (1, 0))
        t3 = self.contract(self.product(ric(), self.nabla(vec)), 1, 3)
        return self.add(self.add(t1, t2), t3)


def relabel(e: TensorExpr, mapping: dict[str, Index]) -> TensorExpr:
    def idx(i: Index) -> Index:
        return mapping.get(i.label, i)

    terms = [Monomial(t.coeff, tuple(a.replace_slots(idx(i) for i in a.slots) for a in t.atoms)) for t in e.terms]
    free = [idx(i) for i in e.free]
    if len({i.label for i in free}) < len(free):
        free = None
    return TensorExpr(terms, free if not terms else None)


def apply_indices(v: Slotted, idx: list[Index]) -> Slotted:
    if len(idx) != v.rank:
        raise StructuralError(f"object of rank {v.rank} given {len(idx)} indices")
    names = {i.label for i in idx}
    terms = []
    for t in v.expr.terms:
        clash = [lab for lab in t.dummies() if lab in names]
        if clash:
            t = rename_monomial(t, dict(zip(clash, fresh_labels(t.labels() | names, len(clash)))))
        terms.append(t)
    expr = TensorExpr(terms, v.expr.free if not terms else None)
    mapping = {s.label: i for s, i in zip(v.slots, idx)}
    out = relabel(expr, mapping)
    if not out.terms:
        counts = {}
        for i in idx:
            counts[i.label] = counts.get(i.label, 0) + 1
        out = TensorExpr.zero([i for i in idx if counts[i.label] == 1])
    return Slotted(out, ())


def parse_terms(text: str) -> list[Term]:
    p = _Parser(text)
    terms = p.expr()
    if p.i != len(p.toks):
        raise ParseError(f"trailing input {p.peek()[1]!r} in {text!r}")
    return terms


def parse_tensor(text: str) -> TensorExpr:
    """Parse a fully indexed tensor expression."""
    return sum_terms(parse_terms(text))


def parse_identity(text: str, name: str = "", line: int = 0) -> Identity:
    body = text
    if ":" in text and "==" in text and text.index(":") < text.index("=="):
        name, body = text.split(":", 1)
        name = name.strip()
    p = _Parser(body)
    sides = p.chain()
    if p.i != len(p.toks):
        raise ParseError(f"trailing input {p.peek()[1]!r} in {text!r}")
    return Identity(name, sides, body.strip(), line)


def parse_identity_file(text: str) -> dict[str, Identity]:
    out: dict[str, Identity] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            ident = parse_identity(line, line=n)
        except ParseError as exc:
            raise ParseError(f"line {n}: {exc}") from None
        if not ident.name:
            raise ParseError(f"line {n}: identity needs a name")
        out[ident.name] = ident
    return out
