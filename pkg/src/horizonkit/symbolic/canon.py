"""Canonical forms of tensor polynomials.

Canonicalization proceeds in three stages.

1. Rewriting to a normal shape: metrics are absorbed, self-traces of ``R``
   and ``Ric`` become ``Ric`` and ``S``, divergences of curvature are removed
   with the contracted Bianchi identities, and every atom with two or more
   derivatives is replaced by its derivative-symmetrized version plus the
   commutator terms this produces.
2. Each monomial is mapped to the lexicographically least representative of
   its orbit under atom reordering, slot symmetries and dummy relabelling.
   A monomial whose orbit contains itself with both signs is zero.
3. The cyclic identity ``R_{a[bcd]} = 0`` is imposed by exact linear algebra:
   the relations generated by every Riemann atom of the touched monomials
   are row-reduced with the largest monomial as pivot, and the expression is
   reduced modulo their span.  The result depends only on the span, so it is
   unique.
"""
from __future__ import annotations

import itertools
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from ..errors import StructuralError
from .calculus import (Raw, absorb_metric, divergence_step, replace_atom, self_trace,
                       symmetrize_atom, to_raw)
from .core import Atom, Index, Monomial, TensorExpr, fresh_labels, head_group

FLAT = frozenset({"R", "Ric", "S", "LieVRic", "LieVR"})
VACUUM = frozenset({"Ric", "S", "LieVRic"})
SYMBOL_TABLES = {"generic": frozenset(), "flat": FLAT, "vacuum": VACUUM}

_MAX_STEPS = 200_000


def symbol_table(name_or_heads) -> frozenset:
    if isinstance(name_or_heads, str):
        try:
            return SYMBOL_TABLES[name_or_heads]
        except KeyError:
            raise StructuralError(f"unknown symbol table {name_or_heads!r}") from None
    return frozenset(name_or_heads or ())


def _rewrite_once(c: Fraction, atoms: tuple[Atom, ...], zero: frozenset) -> Raw | None:
    if any(a.head in zero for a in atoms):
        return []
    step = absorb_metric(c, atoms)
    if step is not None:
        return step
    for j, a in enumerate(atoms):
        tr = self_trace(a)
        if tr is not None:
            return replace_atom(c, atoms, j, tr)
    for j in range(len(atoms)):
        step = divergence_step(c, atoms, j)
        if step is not None:
            return step
    used = {i.label for a in atoms for i in a.slots}
    for j, a in enumerate(atoms):
        if a.nderiv >= 2 and not a.symmetrized:
            return replace_atom(c, atoms, j, symmetrize_atom(a, used))
    return None


def normalize_raw(raw: Raw, zero: frozenset = frozenset()) -> Raw:
    """Apply the stage-1 rewrites until every monomial is in normal shape."""
    done: Raw = []
    pending = list(raw)
    steps = 0
    while pending:
        steps += 1
        if steps > _MAX_STEPS:
            raise StructuralError("rewriting did not terminate")
        c, atoms = pending.pop()
        out = _rewrite_once(c, atoms, zero)
        if out is None:
            done.append((c, atoms))
        else:
            pending.extend(out)
    return done


# -- orbit minimization ----------------------------------------------------

@lru_cache(maxsize=None)
def _variants(atom: Atom) -> tuple[tuple[int, tuple[Index, ...]], ...]:
    k = atom.nderiv
    dperms = itertools.permutations(range(k)) if atom.symmetrized else [tuple(range(k))]
    out = []
    for dp in dperms:
        for gp, sign in head_group(atom.head):
            slots = tuple(atom.slots[i] for i in dp) + tuple(atom.slots[k + j] for j in gp)
            out.append((sign, slots))
    return tuple(out)


Key = tuple[Atom, ...]


@lru_cache(maxsize=200_000)
def canonical_monomial(atoms: tuple[Atom, ...], free: frozenset[str]) -> tuple[int, Key] | None:
    """Least orbit representative of a monomial as ``(sign, atoms)``; ``None`` if it vanishes."""
    order = sorted(range(len(atoms)), key=lambda j: atoms[j].type_key)
    types = [atoms[j].type_key for j in order]
    n = len(atoms)
    best: list = [None, set(), None]  # sequence, signs, chosen slots

    def tok(idx: Index, dmap: dict) -> tuple:
        if idx.label in free:
            return (0, idx.label, idx.up)
        if idx.label not in dmap:
            dmap[idx.label] = len(dmap)
        return (1, dmap[idx.label])

    def dfs(pos: int, remaining: tuple[int, ...], dmap: dict, seq: tuple, sign: int, chosen: tuple):
        if pos == n:
            if best[0] is None or seq < best[0]:
                best[0], best[1], best[2] = seq, {sign}, chosen
            elif seq == best[0]:
                best[1].add(sign)
            return
        seen = set()
        for j in remaining:
            a = atoms[j]
            if a.type_key != types[pos] or a in seen:
                continue
            seen.add(a)
            rest = tuple(r for r in remaining if r != j)
            for s, slots in _variants(a):
                dm = dict(dmap)
                toks = tuple(tok(i, dm) for i in slots)
                cand = seq + toks
                if best[0] is not None and cand > best[0][: len(cand)]:
                    continue
                dfs(pos + 1, rest, dm, cand, sign * s, chosen + ((a, slots),))

    dfs(0, tuple(range(n)), {}, (), 1, ())
    if len(best[1]) > 1:
        return None
    pool = fresh_labels(set(free), len(_dummy_labels(atoms)), prefer="abcdefghijklmnopqrstuvwxyz")
    names: dict[str, str] = {}
    seen_once: set[str] = set()
    out = []
    for a, slots in best[2]:
        new = []
        for i in slots:
            if i.label in free:
                new.append(i)
                continue
            if i.label not in names:
                names[i.label] = pool[len(names)]
            lab = names[i.label]
            new.append(Index(lab, lab in seen_once))
            seen_once.add(lab)
        out.append(Atom(a.head, a.nderiv, tuple(new), a.symmetrized))
    return best[1].pop(), tuple(out)


def _dummy_labels(atoms) -> set[str]:
    occ = Counter(i.label for a in atoms for i in a.slots)
    return {k for k, v in occ.items() if v == 2}


def order_key(atoms: Key) -> tuple:
    return tuple((a.type_key, tuple((i.label, i.up) for i in a.slots)) for a in atoms)


# -- first Bianchi identity -------------------------------------------------

def _cyclic_relation(key: Key, free: frozenset[str]) -> list[dict[Key, Fraction]]:
    rels = []
    for j, a in enumerate(key):
        if a.head != "R":
            continue
        k = a.nderiv
        s0, s1, s2, s3 = a.base_slots
        row: dict[Key, Fraction] = {}
        for base in ((s0, s1, s2, s3), (s0, s2, s3, s1), (s0, s3, s1, s2)):
            atom = Atom("R", k, a.deriv_slots + base, a.symmetrized)
            res = canonical_monomial(key[:j] + (atom,) + key[j + 1:], free)
            if res is None:
                continue
            sign, ck = res
            row[ck] = row.get(ck, Fraction(0)) + sign
        row = {m: v for m, v in row.items() if v != 0}
        if row:
            rels.append(row)
    return rels


def _bianchi_reduce(vec: dict[Key, Fraction], free: frozenset[str]) -> dict[Key, Fraction]:
    todo = [m for m in vec if any(a.head == "R" for a in m)]
    if not todo:
        return vec
    seen = set(todo)
    rels: list[dict[Key, Fraction]] = []
    while todo:
        m = todo.pop()
        for row in _cyclic_relation(m, free):
            rels.append(row)
            for mm in row:
                if mm not in seen:
                    seen.add(mm)
                    todo.append(mm)
    pivots: dict[Key, dict[Key, Fraction]] = {}
    for row in rels:
        row = dict(row)
        while row:
            lead = max(row, key=order_key)
            if lead in pivots:
                _axpy(row, pivots[lead], -row[lead] / pivots[lead][lead])
            else:
                pivots[lead] = row
                break
    out = dict(vec)
    while True:
        hits = [m for m in out if m in pivots]
        if not hits:
            return out
        lead = max(hits, key=order_key)
        piv = pivots[lead]
        _axpy(out, piv, -out[lead] / piv[lead])


def _axpy(y: dict, x: dict, a: Fraction) -> None:
    for k, v in x.items():
        nv = y.get(k, Fraction(0)) + a * v
        if nv == 0:
            y.pop(k, None)
        else:
            y[k] = nv


# -- public entry points ----------------------------------------------------

def canonical_terms(raw: Raw, free: frozenset[Index], zero: frozenset = frozenset()) -> dict[Key, Fraction]:
    free_labels = frozenset(i.label for i in free)
    vec: dict[Key, Fraction] = {}
    for c, atoms in normalize_raw(raw, zero):
        res = canonical_monomial(atoms, free_labels)
        if res is None:
            continue
        sign, key = res
        vec[key] = vec.get(key, Fraction(0)) + sign * c
    vec = {k: v for k, v in vec.items() if v != 0}
    return _bianchi_reduce(vec, free_labels)


def canonicalize(e: TensorExpr, symbols: str | Iterable[str] = "generic") -> TensorExpr:
    """Canonical form of ``e``; equal tensors map to identical expressions.

    ``symbols`` names a symbol table ("generic", "flat", "vacuum") or lists
    heads to treat as identically zero.
    """
    for t in e.terms:
        t.validate(strict_variance=False)
    vec = canonical_terms(to_raw(e), e.free, symbol_table(symbols))
    terms = [Monomial(vec[k], k) for k in sorted(vec, key=order_key)]
    return TensorExpr(terms, e.free)


def equivalent(x: TensorExpr, y: TensorExpr, symbols="generic") -> bool:
    return canonicalize(x - y, symbols).is_zero()
