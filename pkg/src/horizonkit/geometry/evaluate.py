"""Numerical evaluation of symbolic tensor expressions on a chart.

This is the bridge used to check symbolic rewrites against the numerical
curvature code: an expression and its rewritten form must evaluate to the
same array at every sample point.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from ..errors import UnsupportedHeadError
from ..symbolic.core import Atom, Index, TensorExpr
from .curvature import LocalGeometry, lie_derivative
from .fields import ChartMetric, TensorFieldNum
from .jets import Jet

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class ExpressionEvaluator:
    """Values of atoms (fully covariant) for one metric, vector field and point batch."""

    def __init__(self, metric: ChartMetric, v: TensorFieldNum, points, max_deriv: int):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        order = max_deriv + 4
        self.geo = LocalGeometry(metric, self.points, order)
        self.vj = v.jet(self.points, order)
        self._cache: dict[tuple[str, int], list[Jet]] = {}

    def _base(self, head: str) -> Jet:
        geo = self.geo
        if head == "V":
            return geo.lower(self.vj)
        if head == "R":
            return geo.riemann
        if head == "Ric":
            return geo.ricci
        if head == "S":
            return geo.scalar
        if head == "LieVg":
            return lie_derivative(self.vj, geo.g, (False, False))
        if head == "LieVRic":
            return lie_derivative(self.vj, geo.ricci, (False, False))
        if head == "LieVR":
            return lie_derivative(self.vj, geo.riemann, (False,) * 4)
        raise UnsupportedHeadError(head)

    def derivatives(self, head: str, k: int) -> np.ndarray:
        key = (head, k)
        if key not in self._cache:
            base = self._base(head)
            self._cache[key] = self.geo.nabla_n(base, k)
        return self._cache[key][k].value

    def atom_value(self, atom: Atom) -> np.ndarray:
        if atom.head == "g":
            g = self.geo.g.value
            if atom.nderiv:
                return np.zeros(g.shape[:-2] + (g.shape[-1],) * (2 + atom.nderiv))
            return g
        val = self.derivatives(atom.head, atom.nderiv)
        if atom.symmetrized:
            k = atom.nderiv
            nb = val.ndim - len(atom.slots)
            acc = np.zeros_like(val)
            for perm in itertools.permutations(range(k)):
                axes = list(range(val.ndim))
                axes[nb:nb + k] = [nb + p for p in perm]
                acc += np.transpose(val, axes)
            val = acc / math.factorial(k)
        return val

    def evaluate(self, e: TensorExpr, order: list[Index] | None = None) -> np.ndarray:
        """Array of ``e`` with free indices in ``order`` (default: sorted by label)."""
        order = sorted(e.free, key=lambda i: i.label) if order is None else list(order)
        ginv = self.geo.ginv.value
        n = self.geo.dim
        shape = self.points.shape[:-1] + (n,) * len(order)
        total = np.zeros(shape)
        for t in e.terms:
            letters = iter(_LETTERS)
            operands, specs = [], []
            first: dict[str, str] = {}
            out_letter: dict[str, str] = {}
            occ = Counter(i.label for a in t.atoms for i in a.slots)
            for a in t.atoms:
                spec = ""
                for idx in a.slots:
                    x = next(letters)
                    spec += x
                    if occ[idx.label] == 2:
                        if idx.label in first:
                            operands.append(ginv)
                            specs.append(first[idx.label] + x)
                        else:
                            first[idx.label] = x
                    elif idx.up:
                        y = next(letters)
                        operands.append(ginv)
                        specs.append(x + y)
                        out_letter[idx.label] = y
                    else:
                        out_letter[idx.label] = x
                operands.append(self.atom_value(a))
                specs.append(spec)
            out = "".join(out_letter[i.label] for i in order)
            if not operands:
                total = total + float(t.coeff)
                continue
            sub = ",".join("..." + s for s in specs) + "->..." + out
            total = total + float(t.coeff) * np.einsum(sub, *operands, optimize=True)
        return total


def evaluate_expression(e: TensorExpr, metric: ChartMetric, v: TensorFieldNum, points,
                        order: list[Index] | None = None) -> np.ndarray:
    k = max((a.nderiv for t in e.terms for a in t.atoms), default=0)
    return ExpressionEvaluator(metric, v, points, k).evaluate(e, order)
