"""Covariant-derivative rewrites on tensor monomials.

Curvature conventions: ``(nabla_x nabla_y - nabla_y nabla_x) w_c = R_{xyc}^d w_d``
and ``Ric_{ac} = R_{abc}^b``.  Consequently a lower slot picks up
``+R_{xys}^m U_m`` under a commutator and an upper slot picks up
``-R_{xym}^s U^m``.

Internally rewrites work on "raw" terms, lists of ``(coefficient, atoms)``
pairs, which avoids re-validating free indices after every step.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction
from typing import Iterable

from ..errors import StructuralError, UnsupportedHeadError, UsageError
from .core import (Atom, Index, Monomial, TensorExpr, fresh_labels, head_group,
                   rename_monomial)

Raw = list[tuple[Fraction, tuple[Atom, ...]]]

ONE = Fraction(1)


def to_raw(e: TensorExpr) -> Raw:
    return [(t.coeff, t.atoms) for t in e.terms]


def from_raw(raw: Raw, free: Iterable[Index]) -> TensorExpr:
    acc: dict[tuple[Atom, ...], Fraction] = {}
    for c, atoms in raw:
        acc[atoms] = acc.get(atoms, Fraction(0)) + c
    return TensorExpr([Monomial(c, a) for a, c in acc.items() if c != 0], free)


def labels_of(atoms: Iterable[Atom]) -> set[str]:
    return {i.label for a in atoms for i in a.slots}


def desymmetrize(atom: Atom) -> list[tuple[Fraction, Atom]]:
    """Expand a derivative-symmetrized atom into the average of its orderings."""
    if not atom.symmetrized:
        return [(ONE, atom)]
    k = atom.nderiv
    w = Fraction(1, math.factorial(k))
    out = []
    for perm in itertools.permutations(range(k)):
        slots = tuple(atom.slots[i] for i in perm) + atom.base_slots
        out.append((w, Atom(atom.head, k, slots)))
    return out


def nabla_atom(atom: Atom, idx: Index) -> list[tuple[Fraction, Atom]]:
    if atom.head == "g":
        return []
    return [(c, Atom(a.head, a.nderiv + 1, (idx,) + a.slots)) for c, a in desymmetrize(atom)]


def leibniz(raw: Raw, idx: Index) -> Raw:
    """Apply ``nabla_idx`` to every term; the label must be fresh or free."""
    out: Raw = []
    for c, atoms in raw:
        for j, atom in enumerate(atoms):
            for w, new in nabla_atom(atom, idx):
                out.append((c * w, atoms[:j] + (new,) + atoms[j + 1:]))
    return out


def nabla(e: TensorExpr, idx: Index) -> TensorExpr:
    """Covariant derivative of an expression with a new outermost slot ``idx``."""
    free_labels = {i.label for i in e.free}
    raw: Raw = []
    for t in e.terms:
        if idx.label in t.dummies():
            new = fresh_labels(t.labels() | free_labels | {idx.label}, 1)[0]
            t = rename_monomial(t, {idx.label: new})
        raw.extend(leibniz([(t.coeff, t.atoms)], idx))
    if idx.label in free_labels:
        free = [i for i in e.free if i.label != idx.label]
    else:
        free = list(e.free) + [idx]
    return from_raw(raw, free)


def commutator_terms(u: Atom, x: Index, y: Index, used: set[str]) -> Raw:
    """``[nabla_x, nabla_y] U`` as Riemann times ``U`` terms, one per slot of ``U``."""
    m = fresh_labels(used | labels_of([u]) | {x.label, y.label}, 1)[0]
    out: Raw = []
    for s, sigma in enumerate(u.slots):
        if sigma.up:
            r = Atom("R", 0, (x, y, Index(m, False), sigma))
            v = u.replace_slots(u.slots[:s] + (Index(m, True),) + u.slots[s + 1:])
            out.append((-ONE, (r, v)))
        else:
            r = Atom("R", 0, (x, y, sigma, Index(m, True)))
            v = u.replace_slots(u.slots[:s] + (Index(m, False),) + u.slots[s + 1:])
            out.append((ONE, (r, v)))
    return out


def swap_adjacent(atom: Atom, i: int, used: set[str]) -> tuple[Atom, Raw]:
    """Swap derivative slots ``i`` and ``i+1``: ``atom = swapped + corrections``."""
    if atom.symmetrized:
        raise UsageError("cannot swap derivatives of a symmetrized atom")
    k = atom.nderiv
    if not 0 <= i < k - 1:
        raise UsageError(f"derivative positions {i}, {i + 1} out of range for {atom}")
    d = atom.slots
    swapped = atom.replace_slots(d[:i] + (d[i + 1], d[i]) + d[i + 2:])
    inner = Atom(atom.head, k - i - 2, d[i + 2:])
    raw = commutator_terms(inner, d[i], d[i + 1], used | labels_of([atom]))
    for idx in reversed(d[:i]):
        raw = leibniz(raw, idx)
    return swapped, raw


def replace_atom(c: Fraction, atoms: tuple[Atom, ...], j: int, repl: Raw) -> Raw:
    return [(c * w, atoms[:j] + new + atoms[j + 1:]) for w, new in repl]


def symmetrize_atom(atom: Atom, used: set[str]) -> Raw:
    """Rewrite an atom as its derivative-symmetrized form plus commutator terms."""
    k = atom.nderiv
    out: Raw = [(ONE, (Atom(atom.head, k, atom.slots, True),))]
    w = Fraction(1, math.factorial(k))
    for perm in itertools.permutations(range(k)):
        # atom - atom_perm, accumulated along a bubble path of adjacent swaps
        order = list(range(k))
        cur = atom
        for p in range(k):
            q = order.index(perm[p])
            while q > p:
                cur, corr = swap_adjacent(cur, q - 1, used)
                out.extend((w * c, a) for c, a in corr)
                order[q - 1], order[q] = order[q], order[q - 1]
                q -= 1
    return out


def commute_nabla(e: TensorExpr, outer: Index | str, inner: Index | str) -> TensorExpr:
    """Swap two adjacent derivative slots, inserting the Ricci-identity curvature terms."""
    ol = outer.label if isinstance(outer, Index) else outer
    il = inner.label if isinstance(inner, Index) else inner
    raw: Raw = []
    hit = False
    for t in e.terms:
        done = False
        for j, atom in enumerate(t.atoms):
            labs = [s.label for s in atom.deriv_slots]
            if ol in labs and il in labs:
                p, q = labs.index(ol), labs.index(il)
                if q != p + 1:
                    raise UsageError(f"{ol!r} and {il!r} are not adjacent derivatives (outer then inner) in {atom}")
                parts = desymmetrize(atom)
                for w, a in parts:
                    labs_a = [s.label for s in a.deriv_slots]
                    pa = labs_a.index(ol)
                    if labs_a[pa + 1:pa + 2] != [il]:
                        raw.extend(replace_atom(t.coeff * w, t.atoms, j, [(ONE, (a,))]))
                        continue
                    swapped, corr = swap_adjacent(a, pa, t.labels())
                    raw.extend(replace_atom(t.coeff * w, t.atoms, j, [(ONE, (swapped,))] + corr))
                done = hit = True
                break
        if not done:
            raw.append((t.coeff, t.atoms))
    if not hit:
        raise UsageError(f"no atom has adjacent derivative slots {ol!r}, {il!r}")
    return from_raw(raw, e.free)


# -- Lie derivative expansion ---------------------------------------------

def _lie_base(head: str, a: Index, b: Index, used: set[str]) -> Raw:
    if head == "LieVg":
        return [(ONE, (Atom("V", 1, (a, b)),)), (ONE, (Atom("V", 1, (b, a)),))]
    if head == "LieVRic":
        e = fresh_labels(used | {a.label, b.label}, 1)[0]
        up, dn = Index(e, True), Index(e, False)
        return [
            (ONE, (Atom("V", 0, (up,)), Atom("Ric", 1, (dn, a, b)))),
            (ONE, (Atom("Ric", 0, (dn, b)), Atom("V", 1, (a, up)))),
            (ONE, (Atom("Ric", 0, (a, dn)), Atom("V", 1, (b, up)))),
        ]
    raise UnsupportedHeadError(f"Lie derivative of head {head!r} is not supported")


def expand_lie_raw(raw: Raw, zero_heads: frozenset = frozenset()) -> Raw:
    out: Raw = []
    for c, atoms in raw:
        pending = [(c, atoms)]
        while pending:
            c2, at = pending.pop()
            j = next((j for j, a in enumerate(at) if a.head.startswith("LieV")), None)
            if j is None:
                out.append((c2, at))
                continue
            atom = at[j]
            if atom.head not in ("LieVg", "LieVRic"):
                raise UnsupportedHeadError(f"Lie derivative of head {atom.head!r} is not supported")
            if "V" in zero_heads:
                continue
            used = labels_of(at)
            repl: Raw = []
            for w, a in desymmetrize(atom):
                base = _lie_base(a.head, *a.base_slots, used)
                for idx in reversed(a.deriv_slots):
                    base = leibniz(base, idx)
                repl.extend((w * cc, aa) for cc, aa in base)
            pending.extend(replace_atom(c2, at, j, repl))
    return out


def expand_lie_metric(e: TensorExpr, zero_heads: Iterable[str] = ()) -> TensorExpr:
    """Replace ``L_V g`` and ``L_V Ric`` atoms by their covariant-derivative expansions."""
    return from_raw(expand_lie_raw(to_raw(e), frozenset(zero_heads)), e.free)


# -- contractions and the contracted Bianchi identity ---------------------

_SELF_TRACE = {
    # contracted base-slot positions of R -> (sign, remaining slot positions) for Ric
    (1, 3): (1, (0, 2)),
    (0, 2): (1, (1, 3)),
    (0, 3): (-1, (1, 2)),
    (1, 2): (-1, (0, 3)),
}


def self_trace(atom: Atom) -> Raw | None:
    """Base-slot self-contraction of R or Ric; ``None`` when no trace is present."""
    base = atom.base_slots
    d = atom.deriv_slots
    if atom.head == "R":
        for p in range(4):
            for q in range(p + 1, 4):
                if base[p].label == base[q].label:
                    if (p, q) in ((0, 1), (2, 3)):
                        return []
                    sign, rest = _SELF_TRACE[(p, q)]
                    new = Atom("Ric", atom.nderiv, d + tuple(base[r] for r in rest), atom.symmetrized)
                    return [(Fraction(sign), (new,))]
    if atom.head == "Ric" and base[0].label == base[1].label:
        return [(ONE, (Atom("S", atom.nderiv, d, atom.symmetrized),))]
    return None


def divergence_position(atom: Atom) -> tuple[int, int] | None:
    """(derivative position, base position) of a derivative contracted into the base."""
    if atom.head not in ("R", "Ric"):
        return None
    k = atom.nderiv
    for p in range(k - 1, -1, -1):
        for q, s in enumerate(atom.base_slots):
            if s.label == atom.slots[p].label:
                return p, q
    return None


def bianchi_divergence(atom: Atom) -> Raw:
    """Innermost-derivative divergence of R or Ric via the contracted Bianchi identities.

    ``nabla^e R_{dabe} = nabla_a R_{bd} - nabla_d R_{ab}`` and
    ``nabla^a R_{ab} = 1/2 nabla_b S``.
    """
    k = atom.nderiv
    outer = atom.slots[: k - 1]
    base = atom.base_slots
    q = next(q for q, s in enumerate(base) if s.label == atom.slots[k - 1].label)
    if atom.head == "Ric":
        other = base[1 - q]
        return [(Fraction(1, 2), (Atom("S", k, outer + (other,)),))]
    for perm, sign in head_group("R"):
        if perm[3] == q:
            d, a, b = (base[perm[i]] for i in range(3))
            s = Fraction(sign)
            return [
                (s, (Atom("Ric", k, outer + (a, b, d)),)),
                (-s, (Atom("Ric", k, outer + (d, a, b)),)),
            ]
    raise AssertionError("unreachable")


def divergence_step(c: Fraction, atoms: tuple[Atom, ...], j: int, heads=("R", "Ric")) -> Raw | None:
    """One step toward eliminating a divergence of atom ``j``; ``None`` if not applicable."""
    atom = atoms[j]
    if atom.head not in heads:
        return None
    pos = divergence_position(atom)
    if pos is None:
        return None
    if atom.symmetrized:
        return replace_atom(c, atoms, j, [(w, (a,)) for w, a in desymmetrize(atom)])
    p, _ = pos
    k = atom.nderiv
    if p < k - 1:
        swapped, corr = swap_adjacent(atom, p, labels_of(atoms))
        return replace_atom(c, atoms, j, [(ONE, (swapped,))] + corr)
    return replace_atom(c, atoms, j, bianchi_divergence(atom))


def apply_contracted_bianchi(e: TensorExpr) -> TensorExpr:
    """Rewrite every divergence of a Riemann atom into derivatives of Ricci."""
    done: Raw = []
    pending = to_raw(e)
    while pending:
        c, atoms = pending.pop()
        for j in range(len(atoms)):
            step = divergence_step(c, atoms, j, heads=("R",))
            if step is not None:
                pending.extend(step)
                break
        else:
            done.append((c, atoms))
    return from_raw(done, e.free)


def absorb_metric(c: Fraction, atoms: tuple[Atom, ...]) -> Raw | None:
    """Remove one metric factor that is contracted with something; ``None`` if none is."""
    occ = Counter(i.label for a in atoms for i in a.slots)
    for j, g in enumerate(atoms):
        if g.head != "g":
            continue
        if g.nderiv:
            return []
        s0, s1 = g.slots
        if s0.label == s1.label:
            raise StructuralError("trace of the metric is dimension dependent and not supported")
        for mine, other in ((s1, s0), (s0, s1)):
            if occ[mine.label] == 2:
                rest = atoms[:j] + atoms[j + 1:]
                new = tuple(a.replace_slots(other if i.label == mine.label else i for i in a.slots) for a in rest)
                return [(c, new)]
    return None
