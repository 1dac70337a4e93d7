"""Command-line driver: ``hk <command> [example] [options]``.

Every run writes a JSON report (``schema: 1``) and prints a short summary.
Exit status is 0 when every verdict passes, 1 on a verdict failure and 2 on
a usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import GeometryError, HorizonKitError, UnknownSpacetimeError

SCHEMA = 1
MAX_ORDER = 6
COMMANDS = ("identities", "frame", "jet", "killing", "ode-demo")
NEEDS_EXAMPLE = ("frame", "jet", "killing")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(HorizonKitError):
    pass


@dataclass
class RunConfig:
    command: str
    example: str | None = None
    order: int = 3
    tol: float | None = None
    grid: int | None = None
    seed: int = 0
    out: str | None = None
    candidate: str | None = None
    field: str | None = None
    epsilon: float = 0.5

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in NEEDS_EXAMPLE and not self.example:
            raise ConfigError(f"{self.command} needs an example name")
        if not 0 <= self.order <= MAX_ORDER:
            raise ConfigError(f"order must lie in 0..{MAX_ORDER}")
        if self.tol is not None and not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError("tolerance must be positive")
        if self.grid is not None and self.grid < 4:
            raise ConfigError("grid must be at least 4")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        return self

    def default_out(self) -> str:
        stem = self.command if not self.example else f"{self.command}-{self.example}"
        return f"hk-{stem}.json"


# -- commands ---------------------------------------------------------------

def run_identities(cfg: RunConfig) -> tuple[dict, bool]:
    from .geometry.curvature import numeric_sweep
    from .symbolic import prove_identity_A1, prove_identity_A2

    tol = cfg.tol if cfg.tol is not None else 1e-6
    a1 = prove_identity_A1()
    a2 = prove_identity_A2(sub_proofs=True)
    sweep = numeric_sweep(seed=cfg.seed)
    worst = max(sweep["max_rel_residual"].values())
    verdicts = {
        "A1": a1.verdict,
        "A2": a2.verdict,
        **{f"A2/{s.name}": s.verdict for s in a2.sub_proofs},
        "numeric": "PASS" if worst <= tol else "FAIL",
    }
    report = {"proofs": {"A1": a1.to_dict(), "A2": a2.to_dict()}, "numeric": sweep,
              "tolerance": tol, "verdicts": verdicts}
    ok = a1.proved and a2.proved and all(s.proved for s in a2.sub_proofs) and worst <= tol
    return report, ok


def run_frame(cfg: RunConfig) -> tuple[dict, bool]:
    from .catalog import load
    from .frame import frame_audit

    spec = load(cfg.example)
    try:
        report = frame_audit(spec, cfg.grid, cfg.epsilon)
    except GeometryError as exc:
        return {"example": spec.name, "error": type(exc).__name__, "message": str(exc),
                "verdicts": {"horizon": "FAIL"}}, False
    return report, all(v == "PASS" for v in report["verdicts"].values())


def run_jet(cfg: RunConfig) -> tuple[dict, bool]:
    from .catalog import load
    from .jets.verifier import BASE_TOL, jet_audit

    spec = load(cfg.example)
    if cfg.candidate:
        spec.candidate_field(cfg.candidate)
    tol = cfg.tol if cfg.tol is not None else BASE_TOL
    try:
        report = jet_audit(spec, cfg.order, cfg.grid, cfg.candidate, tol)
    except GeometryError as exc:
        return {"example": spec.name, "error": type(exc).__name__, "message": str(exc),
                "verdicts": {"horizon": "FAIL"}}, False
    return report, all(v == "PASS" for v in report["verdicts"].values())


def run_killing(cfg: RunConfig) -> tuple[dict, bool]:
    from .catalog import killing_causal_audit, load

    spec = load(cfg.example)
    if cfg.field:
        spec.killing_field(cfg.field)
    try:
        report = killing_causal_audit(spec, cfg.field, cfg.epsilon, cfg.grid)
    except GeometryError as exc:
        return {"example": spec.name, "field": cfg.field or "declared", "error": type(exc).__name__,
                "message": str(exc), "verdicts": {"causal": "FAIL"}}, False
    report["verdicts"] = {"causal": report["verdict"]}
    return report, report["verdict"] == "PASS"


def run_ode_demo(cfg: RunConfig) -> tuple[dict, bool]:
    from .jets import TransportProblem, max_principle_verdict, solve_norm_ode

    tol = cfg.tol if cfg.tol is not None else 1e-8
    rng = np.random.default_rng(cfg.seed)
    decay = []
    for beta in (1.0, 2.0, 5.0):
        p = TransportProblem(np.zeros((1, 4, 4)), beta=beta, length=4 * math.pi)
        sol = solve_norm_ode(p, 1.0, p.length)
        exact = np.exp(-2 * beta * sol.s)
        decay.append({"beta": beta, "max_abs_error": float(np.abs(sol.y - exact).max()),
                      "steps": sol.checks["steps"]})
    unit = np.zeros((1, 4, 4))
    unit[0, 2, 2] = 1.0
    periodic = max_principle_verdict(TransportProblem(unit, beta=1.0, length=2 * math.pi))
    expected = 1.0 - math.exp(-4 * math.pi)
    rejected = []
    for _ in range(20):
        a = np.zeros((8, 4, 4))
        b = rng.normal(size=(8, 2, 2))
        a[..., 2:, 2:] = b + np.swapaxes(b, -1, -2)
        beta = float(rng.choice([-1, 1]) * rng.uniform(0.25, 4.0))
        rejected.append(max_principle_verdict(TransportProblem(a, beta=beta))["verdict"] != "PASS")
    zero = max_principle_verdict(TransportProblem(np.zeros((8, 4, 4))))
    checks = {
        "decay_matches_exponential": max(d["max_abs_error"] for d in decay) <= tol,
        "periodicity_defect": abs(periodic["defect"] - expected) <= tol,
        "nonzero_rejected": all(rejected),
        "zero_accepted": zero["verdict"] == "PASS",
    }
    report = {
        "decay": decay,
        "periodicity": {**periodic, "expected_defect": expected,
                        "error": abs(periodic["defect"] - expected)},
        "nonzero_candidates": {"count": len(rejected), "rejected": int(sum(rejected))},
        "zero_candidate": zero,
        "tolerance": tol,
        "checks": checks,
        "verdicts": {"max_principle": "PASS" if all(checks.values()) else "FAIL"},
    }
    return report, all(checks.values())


RUNNERS = {"identities": run_identities, "frame": run_frame, "jet": run_jet,
           "killing": run_killing, "ode-demo": run_ode_demo}


# -- plumbing ---------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def render(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def summary(cfg: RunConfig, report: dict, ok: bool) -> str:
    head = cfg.command if not cfg.example else f"{cfg.command} {cfg.example}"
    lines = [f"hk {head}: {'PASS' if ok else 'FAIL'}"]
    for name, v in report.get("verdicts", {}).items():
        lines.append(f"  {name}: {v}")
    for flag in report.get("hypothesis_flags", []) or []:
        lines.append(f"  hypothesis flag: {flag}")
    if "message" in report:
        lines.append(f"  {report['error']}: {report['message']}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hk", description="Horizon geometry audits and identity proofs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("example", nargs="?")
    p.add_argument("--order", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--candidate", help="named generator perturbation (jet)")
    p.add_argument("--field", help="named alternate Killing field (killing)")
    p.add_argument("--epsilon", type=float, help="slab thickness in null time")
    return p


def make_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        try:
            values = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
        known = set(RunConfig.__dataclass_fields__) - {"command"}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("example", "order", "tol", "grid", "seed", "out", "candidate", "field", "epsilon"):
        v = getattr(ns, key)
        if v is not None:
            values[key] = v
    try:
        return RunConfig(command=ns.command, **values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = make_config(ns)
        report, ok = RUNNERS[cfg.command](cfg)
    except (ConfigError, UnknownSpacetimeError) as exc:
        print(f"hk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    full = {"schema": SCHEMA, "command": cfg.command, "config": asdict(cfg),
            "timestamp": datetime.now(timezone.utc).isoformat(), "pass": ok, **report}
    out = Path(cfg.out or cfg.default_out())
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render(full))
    print(summary(cfg, report, ok))
    print(f"  report: {out}")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
