"""The scalar transport equation along the generators and the maximum principle.

If ``nabla_V a + beta a = 0`` for a symmetric form ``a`` on E, then its norm
``y = sum a(e_i, e_j)^2`` obeys ``y' = -2 beta y`` along the generator flow.  On
a closed generator a nonzero solution cannot return to its starting value, so
the only periodic solution is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import BlockError, DomainError

BLOCK_TOL = 1e-10
PASS_TOL = 1e-10
MAX_STEP_RATE = 0.005  # bound on 2|beta| h per RK4 step
MIN_STEPS = 1024


@dataclass
class TransportProblem:
    """A tensor on E (x) E along the horizon together with its transport rate.

    ``a`` holds frame components (dt, V, e_2..e_n) of shape ``(N, n+1, n+1)``;
    only the trailing E block may be nonzero.  ``length`` is the parameter
    length of a closed generator of V (``None`` for non-closed generators).
    """

    a: np.ndarray
    beta: float | Callable[[np.ndarray], np.ndarray] = 1.0
    length: float | None = 2 * math.pi
    tol: float = PASS_TOL

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if self.a.ndim == 2:
            self.a = self.a[None]
        outside = np.abs(self.a[..., :2, :]).max(initial=0.0)
        outside = max(outside, np.abs(self.a[..., :, :2]).max(initial=0.0))
        if outside > BLOCK_TOL:
            raise BlockError(f"tensor has components along dt or V ({outside:.3e})")

    def norm(self) -> np.ndarray:
        """Pointwise ``g(a, a) = sum_ij a(e_i, e_j)^2``."""
        return np.einsum("...ij,...ij->...", self.a[..., 2:, 2:], self.a[..., 2:, 2:])

    def rate(self, s) -> np.ndarray:
        if callable(self.beta):
            return np.asarray(self.beta(s), dtype=float)
        return np.full_like(np.asarray(s, dtype=float), float(self.beta))


@dataclass
class OdeSolution:
    s: np.ndarray
    y: np.ndarray
    checks: dict = field(default_factory=dict)

    def at_end(self) -> float:
        return float(self.y[-1])


def _steps(p: TransportProblem, length: float) -> int:
    probe = np.linspace(0.0, length, 257)
    bmax = float(np.abs(p.rate(probe)).max()) if length > 0 else 0.0
    n = MIN_STEPS
    if bmax > 0:
        n = max(n, int(math.ceil(2 * bmax * length / MAX_STEP_RATE)))
    return n


def solve_norm_ode(p: TransportProblem, y0: float, length: float) -> OdeSolution:
    """RK4 for ``y' = -2 beta(s) y`` on ``[0, length]`` with ``y(0) = y0``."""
    if y0 < 0:
        raise DomainError(f"the norm of a tensor cannot be negative (got {y0})")
    if length < 0:
        raise DomainError("generator length must be non-negative")
    n = _steps(p, length)
    h = length / n
    s = np.linspace(0.0, length, n + 1)
    y = np.empty(n + 1)
    y[0] = y0
    f = lambda si, yi: -2.0 * p.rate(si) * yi  # noqa: E731
    for i in range(n):
        si, yi = s[i], y[i]
        k1 = f(si, yi)
        k2 = f(si + h / 2, yi + h / 2 * k1)
        k3 = f(si + h / 2, yi + h / 2 * k2)
        k4 = f(si + h, yi + h * k3)
        y[i + 1] = yi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return OdeSolution(s, y, {"steps": n})


def max_principle_verdict(p: TransportProblem) -> dict:
    """PASS iff the tensor vanishes; otherwise report the periodicity defect.

    A nonzero tensor obeying the transport equation decays by ``exp(-2 beta l)``
    around a closed generator of length ``l`` and so cannot be single valued.
    """
    norm = p.norm()
    ymax = float(norm.max()) if norm.size else 0.0
    if ymax <= p.tol:
        return {"verdict": "PASS", "max_norm": ymax, "defect": 0.0}
    out = {"verdict": "FAIL", "max_norm": ymax}
    if p.length is not None:
        sol = solve_norm_ode(p, ymax, p.length)
        out["verdict"] = "FAIL-PERIODICITY"
        out["defect"] = abs(sol.at_end() - ymax)
        out["length"] = p.length
    return out
