"""Spacetime specification files and their validation.

A spec file is JSON with these keys (expressions use :mod:`horizonkit.expr`):

``schema``                1
``name``, ``description`` strings
``coordinates``           chart coordinate names
``metric``                square matrix of component expressions
``horizon``               ``{"coordinate": name}``; the horizon is ``{name = 0}``
``periods``               ``{name: period}`` for the compact horizon directions
``domain``                ``{name: [lo, hi]}`` for every non-periodic coordinate
``extends``               true if the chart covers both sides of the horizon
``time_orientation``      a timelike vector field declared future pointing
``generator``             raw generator field, tangent to the horizon
``generator_orbit_length`` parameter length of a closed orbit of the raw generator
``killing``               exact Killing field or null
``ricci``                 closed-form Ricci tensor
``vacuum``                whether ``ricci`` vanishes identically
``candidates``            named perturbations of the propagated generator, as
                          components in the adapted coordinates (null time ``t``
                          followed by the horizon coordinates)
``alternate_killing``     named Killing fields that are not horizon generators
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .. import expr as ex
from ..errors import CorruptSpecError, HorizonKitError, UnknownSpacetimeError
from ..geometry.curvature import LocalGeometry, lie_derivative
from ..geometry.fields import ChartMetric, TensorFieldNum, two_tensor, vector_field

REQUIRED = ("name", "coordinates", "metric", "horizon", "periods", "domain", "time_orientation",
            "generator", "ricci", "vacuum")

RICCI_TOL = 1e-8
KILLING_TOL = 1e-10


@dataclass
class SpacetimeSpec:
    name: str
    description: str
    coords: tuple[str, ...]
    metric: ChartMetric
    horizon_index: int
    periods: dict[str, float]
    domain: dict[str, tuple[float, float]]
    extends: bool
    time_orientation: TensorFieldNum
    generator: TensorFieldNum
    generator_orbit_length: float | None
    killing: TensorFieldNum | None
    ricci: TensorFieldNum
    vacuum: bool
    candidates: dict[str, tuple[ex.Expr, ...]] = field(default_factory=dict)
    alternate_killing: dict[str, TensorFieldNum] = field(default_factory=dict)
    source: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def horizon_coords(self) -> list[int]:
        """Chart indices of the coordinates along the horizon, in chart order."""
        return [i for i in range(self.dim) if i != self.horizon_index]

    @property
    def adapted_names(self) -> tuple[str, ...]:
        return ("t",) + tuple(self.coords[i] for i in self.horizon_coords)

    @cached_property
    def horizon_periods(self) -> np.ndarray:
        return np.array([self.periods[self.coords[i]] for i in self.horizon_coords])

    def transverse_range(self) -> tuple[float, float]:
        return self.domain[self.coords[self.horizon_index]]

    def sample_points(self, count: int, seed: int = 0) -> np.ndarray:
        """Uniform random chart points inside the declared domain."""
        rng = np.random.default_rng(seed)
        pts = np.empty((count, self.dim))
        for i, name in enumerate(self.coords):
            if name in self.periods:
                pts[:, i] = rng.uniform(0.0, self.periods[name], count)
            else:
                lo, hi = self.domain[name]
                pts[:, i] = rng.uniform(lo, hi, count)
        return pts

    def candidate_field(self, name: str) -> tuple[ex.Expr, ...]:
        try:
            return self.candidates[name]
        except KeyError:
            raise UnknownSpacetimeError(f"{self.name} has no candidate field {name!r}") from None

    def killing_field(self, name: str | None = None) -> TensorFieldNum:
        if name is None:
            if self.killing is None:
                raise UnknownSpacetimeError(f"{self.name} declares no Killing field")
            return self.killing
        try:
            return self.alternate_killing[name]
        except KeyError:
            raise UnknownSpacetimeError(f"{self.name} has no Killing field {name!r}") from None


def available() -> list[str]:
    root = resources.files("horizonkit.catalog").joinpath("data")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read(name: str) -> dict:
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        if name not in available():
            raise UnknownSpacetimeError(f"unknown spacetime {name!r}; available: {', '.join(available())}")
        text = resources.files("horizonkit.catalog").joinpath("data").joinpath(f"{name}.json").read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptSpecError(f"{name}: invalid JSON ({exc})") from None


def from_dict(d: dict) -> SpacetimeSpec:
    missing = [k for k in REQUIRED if k not in d]
    if missing:
        raise CorruptSpecError(f"spec is missing keys: {', '.join(missing)}")
    if d.get("schema", 1) != 1:
        raise CorruptSpecError(f"unsupported schema {d.get('schema')!r}")
    coords = tuple(d["coordinates"])
    n = len(coords)
    try:
        metric = ChartMetric.from_expressions(coords, d["metric"], name=d["name"])
        vec = lambda comps: vector_field(coords, comps)  # noqa: E731
        horizon_index = coords.index(d["horizon"]["coordinate"])
        adapted = ("t",) + tuple(c for i, c in enumerate(coords) if i != horizon_index)
        candidates = {}
        for key, comps in d.get("candidates", {}).items():
            exprs = tuple(ex.parse(c) for c in comps)
            stray = set().union(*(e.variables() for e in exprs)) - set(adapted)
            if len(exprs) != n or stray:
                raise CorruptSpecError(f"candidate {key!r} must have {n} components in {adapted}")
            candidates[key] = exprs
        spec = SpacetimeSpec(
            name=d["name"],
            description=d.get("description", ""),
            coords=coords,
            metric=metric,
            horizon_index=horizon_index,
            periods={k: float(v) for k, v in d["periods"].items()},
            domain={k: (float(v[0]), float(v[1])) for k, v in d["domain"].items()},
            extends=bool(d.get("extends", False)),
            time_orientation=vec(d["time_orientation"]),
            generator=vec(d["generator"]),
            generator_orbit_length=d.get("generator_orbit_length"),
            killing=vec(d["killing"]) if d.get("killing") is not None else None,
            ricci=two_tensor(coords, d["ricci"]),
            vacuum=bool(d["vacuum"]),
            candidates=candidates,
            alternate_killing={k: vec(v) for k, v in d.get("alternate_killing", {}).items()},
            source=d,
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptSpecError(f"{d.get('name', '?')}: {exc}") from None
    for name in coords:
        if name != coords[horizon_index] and name not in spec.periods:
            raise CorruptSpecError(f"horizon coordinate {name!r} needs a period (the horizon must be compact)")
        if name not in spec.periods and name not in spec.domain:
            raise CorruptSpecError(f"coordinate {name!r} has neither a period nor a domain")
    if spec.transverse_range()[0] >= 0.0 and spec.extends:
        raise CorruptSpecError("an extending chart must contain negative values of the horizon coordinate")
    return spec


def check_invariants(spec: SpacetimeSpec, points: np.ndarray) -> dict[str, float]:
    """Largest deviations of the declared Ricci tensor and Killing fields."""
    geo = LocalGeometry(spec.metric, points, 2)
    ric = spec.ricci.jet(points, 0).value
    out = {"ricci": float(np.abs(geo.ricci.value - ric).max())}
    g1 = spec.metric.jet(points, 1)
    fields = {"killing": spec.killing} if spec.killing is not None else {}
    fields.update({f"killing[{k}]": w for k, w in spec.alternate_killing.items()})
    for key, w in fields.items():
        lie = lie_derivative(w.jet(points, 1), g1, (False, False)).value
        out[key] = float(np.abs(lie).max())
    if spec.vacuum:
        out["ricci_vacuum"] = float(np.abs(geo.ricci.value).max())
    return out


def validate(spec: SpacetimeSpec, count: int = 128, seed: int = 0) -> dict[str, float]:
    points = spec.sample_points(count, seed)
    try:
        spec.metric.check(points)
    except HorizonKitError as exc:
        raise CorruptSpecError(f"{spec.name}: {exc}") from None
    report = check_invariants(spec, points)
    for key, value in report.items():
        tol = KILLING_TOL if key.startswith("killing") else RICCI_TOL
        if value > tol:
            raise CorruptSpecError(f"{spec.name}: declared {key} is off by {value:.3e} (tolerance {tol:g})")
    return report


def load(name: str, check: bool = True) -> SpacetimeSpec:
    """Load a catalog entry (or a spec file path) and re-check its invariants."""
    spec = from_dict(_read(name))
    if check:
        validate(spec)
    return spec
