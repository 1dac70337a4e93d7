"""Abstract-index tensor polynomials.

An expression is a sum of monomials; a monomial is a rational coefficient
times a product of atoms.  An atom is a head tensor (metric, vector ``V``,
Riemann ``R``, Ricci ``Ric``, scalar curvature ``S`` or an unexpanded Lie
derivative) carrying ``nderiv`` covariant derivatives.  Slots are ordered
derivative slots first (outermost first), then the head's own slots, so
``Atom("R", 1, (e, a, b, c, d))`` is ``nabla_e R_{abcd}``.

Repeated labels within a monomial are contractions; all contractions use the
metric, so the up/down position of a dummy pair is immaterial once metrics
are absorbed.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

from ..errors import StructuralError


@dataclass(frozen=True, order=True)
class Index:
    label: str
    up: bool = False

    def __str__(self):
        return ("^" if self.up else "") + self.label

    def with_up(self, up: bool) -> "Index":
        return Index(self.label, up)


class HeadInfo(NamedTuple):
    rank: int
    symmetry: str  # "none" | "sym" | "riemann"
    order: int


HEADS: dict[str, HeadInfo] = {
    "g": HeadInfo(2, "sym", 0),
    "V": HeadInfo(1, "none", 1),
    "S": HeadInfo(0, "none", 2),
    "Ric": HeadInfo(2, "sym", 3),
    "R": HeadInfo(4, "riemann", 4),
    "LieVg": HeadInfo(2, "sym", 5),
    "LieVRic": HeadInfo(2, "sym", 6),
    "LieVR": HeadInfo(4, "none", 7),
}

# Signed slot permutations generating the symmetric group of each head.
_RIEMANN_GROUP = (
    ((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((1, 0, 3, 2), 1),
    ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1), ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1),
)


def head_group(head: str) -> tuple[tuple[tuple[int, ...], int], ...]:
    info = HEADS[head]
    if info.symmetry == "riemann":
        return _RIEMANN_GROUP
    if info.symmetry == "sym":
        return (((0, 1), 1), ((1, 0), 1))
    return ((tuple(range(info.rank)), 1),)


@dataclass(frozen=True)
class Atom:
    head: str
    nderiv: int
    slots: tuple[Index, ...]
    symmetrized: bool = False

    def __post_init__(self):
        if self.head not in HEADS:
            raise StructuralError(f"unknown tensor head {self.head!r}")
        if len(self.slots) != HEADS[self.head].rank + self.nderiv:
            raise StructuralError(f"atom {self.head} with {self.nderiv} derivatives has wrong arity")
        if self.symmetrized and self.nderiv < 2:
            object.__setattr__(self, "symmetrized", False)

    @property
    def deriv_slots(self) -> tuple[Index, ...]:
        return self.slots[: self.nderiv]

    @property
    def base_slots(self) -> tuple[Index, ...]:
        return self.slots[self.nderiv:]

    @property
    def type_key(self):
        return (HEADS[self.head].order, self.head, self.nderiv, self.symmetrized)

    def replace_slots(self, slots) -> "Atom":
        return Atom(self.head, self.nderiv, tuple(slots), self.symmetrized)

    def __str__(self):
        s = ""
        if self.nderiv:
            ds = " ".join(str(i) for i in self.deriv_slots)
            s = f"D({ds})" if self.symmetrized else f"D[{ds}]"
        base = ",".join(str(i) for i in self.base_slots)
        return f"{s}{self.head}[{base}]" if base else f"{s}{self.head}"


def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


@dataclass(frozen=True)
class Monomial:
    coeff: Fraction
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeff", Fraction(self.coeff))

    def occurrences(self) -> Counter:
        return Counter(i.label for a in self.atoms for i in a.slots)

    def labels(self) -> set[str]:
        return {i.label for a in self.atoms for i in a.slots}

    def free(self) -> frozenset[Index]:
        occ = self.occurrences()
        return frozenset(i for a in self.atoms for i in a.slots if occ[i.label] == 1)

    def dummies(self) -> set[str]:
        return {k for k, v in self.occurrences().items() if v == 2}

    def validate(self, strict_variance: bool = True) -> None:
        occ = self.occurrences()
        for label, n in occ.items():
            if n > 2:
                raise StructuralError(f"index {label!r} occurs {n} times in monomial {self}")
            if n == 2 and strict_variance:
                ups = [i.up for a in self.atoms for i in a.slots if i.label == label]
                if ups[0] == ups[1]:
                    raise StructuralError(
                        f"dummy index {label!r} must occur once up and once down in monomial {self}")

    def scaled(self, c) -> "Monomial":
        return Monomial(self.coeff * Fraction(c), self.atoms)

    def __str__(self):
        body = " ".join(str(a) for a in self.atoms) or "1"
        return f"{_fmt_coeff(self.coeff)}*{body}"


class TensorExpr:
    """Immutable sum of monomials sharing one free-index set."""

    __slots__ = ("terms", "free")

    def __init__(self, terms: Iterable[Monomial] = (), free: Iterable[Index] | None = None,
                 strict_variance: bool = False):
        terms = tuple(t for t in terms if t.coeff != 0)
        for t in terms:
            t.validate(strict_variance)
        frees = {t.free() for t in terms}
        if free is not None:
            free = frozenset(free)
            frees.add(free)
        if len(frees) > 1:
            sig = sorted(frees, key=lambda f: sorted(map(str, f)))
            bad = [t for t in terms if t.free() != sig[0]]
            raise StructuralError(
                f"terms have different free indices: {[sorted(map(str, f)) for f in sig]}; "
                f"offending monomial {bad[0] if bad else terms[0]}")
        self.terms = terms
        self.free = frees.pop() if frees else frozenset()

    @classmethod
    def atom(cls, head: str, *slots: Index, nderiv: int = 0) -> "TensorExpr":
        return cls([Monomial(Fraction(1), (Atom(head, nderiv, tuple(slots)),))])

    @classmethod
    def zero(cls, free: Iterable[Index] = ()) -> "TensorExpr":
        return cls((), free)

    @classmethod
    def scalar(cls, c) -> "TensorExpr":
        return cls([Monomial(Fraction(c), ())])

    def is_zero(self) -> bool:
        return not self.terms

    def labels(self) -> set[str]:
        out = {i.label for i in self.free}
        for t in self.terms:
            out |= t.labels()
        return out

    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        return TensorExpr(self.terms + other.terms, self.free if not other.terms else None) \
            if self.terms or other.terms else TensorExpr((), self.free | other.free)

    def __neg__(self) -> "TensorExpr":
        return TensorExpr([t.scaled(-1) for t in self.terms], self.free)

    def __sub__(self, other: "TensorExpr") -> "TensorExpr":
        return self + (-other)

    def scaled(self, c) -> "TensorExpr":
        return TensorExpr([t.scaled(c) for t in self.terms], self.free)

    def __mul__(self, other):
        if not isinstance(other, TensorExpr):
            return self.scaled(other)
        return product(self, other)

    __rmul__ = scaled

    def __eq__(self, other):
        if not isinstance(other, TensorExpr):
            return NotImplemented
        return self.free == other.free and Counter(self.terms) == Counter(other.terms)

    def __hash__(self):
        return hash((self.free, frozenset(Counter(self.terms).items())))

    def __len__(self):
        return len(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for i, t in enumerate(self.terms):
            c = t.coeff
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = " ".join(str(a) for a in t.atoms) or "1"
            txt = body if mag == 1 and t.atoms else f"{_fmt_coeff(mag)}*{body}" if t.atoms else _fmt_coeff(mag)
            parts.append(("-" if sign == "-" else "") + txt if i == 0 else f" {sign} {txt}")
        return "".join(parts)

    def __repr__(self):
        return f"TensorExpr({self})"


# -- label utilities -------------------------------------------------------

def fresh_labels(used: set[str], count: int, prefer: str = "mnpqrsuvwxyzcdefghijkl") -> list[str]:
    out = []
    for ch in prefer:
        if len(out) == count:
            return out
        if ch not in used:
            out.append(ch)
    k = 1
    while len(out) < count:
        for ch in prefer:
            lab = f"{ch}{k}"
            if lab not in used and lab not in out:
                out.append(lab)
                if len(out) == count:
                    break
        k += 1
    return out


def rename_monomial(m: Monomial, mapping: dict[str, str]) -> Monomial:
    atoms = tuple(a.replace_slots(Index(mapping.get(i.label, i.label), i.up) for i in a.slots) for a in m.atoms)
    return Monomial(m.coeff, atoms)


def rename(e: TensorExpr, mapping: dict[str, str]) -> TensorExpr:
    free = [Index(mapping.get(i.label, i.label), i.up) for i in e.free]
    return TensorExpr([rename_monomial(t, mapping) for t in e.terms], free)


def product(x: TensorExpr, y: TensorExpr) -> TensorExpr:
    """Product of expressions; shared free labels contract, clashing dummies are renamed."""
    terms = []
    xfree = {i.label for i in x.free}
    yfree = {i.label for i in y.free}
    for s in x.terms:
        for t in y.terms:
            clash = [lab for lab in s.dummies() if lab in yfree]
            if clash:
                new = fresh_labels(s.labels() | t.labels() | xfree | yfree, len(clash))
                s = rename_monomial(s, dict(zip(clash, new)))
            used = s.labels() | xfree | yfree
            clash = [lab for lab in t.dummies() if lab in used]
            if clash:
                new = fresh_labels(used | t.labels(), len(clash))
                t = rename_monomial(t, dict(zip(clash, new)))
            terms.append(Monomial(s.coeff * t.coeff, s.atoms + t.atoms))
    if not terms:
        shared = {i.label for i in x.free} & {i.label for i in y.free}
        free = [i for i in x.free | y.free if i.label not in shared]
        return TensorExpr((), free)
    return TensorExpr(terms)


def collect(terms: Iterable[Monomial]) -> dict[tuple[Atom, ...], Fraction]:
    acc: dict[tuple[Atom, ...], Fraction] = {}
    for t in terms:
        acc[t.atoms] = acc.get(t.atoms, Fraction(0)) + t.coeff
    return {k: v for k, v in acc.items() if v != 0}


def permutations_with_parity(n: int):
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        yield perm, (-1) ** inv
