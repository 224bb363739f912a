"""Command-line entry point ``rik``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import SCENARIOS, ScenarioConfig, emit_report, run_scenario
from .majorization import CERT_TOL, hlp_leq
from .measure import StepFunction
from .operators import certify_substochastic, operator_from_json
from .sampling import random_grid_function
from .spaces import NormSpec


def _load(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"rik: cannot read {path}: {exc}")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rik", description="Rearrangement-invariant space toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        s = sub.add_parser(name, help=f"run the {name} scenario")
        s.add_argument("--config", help="scenario config JSON")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    c = sub.add_parser("check", help="certify an operator JSON as substochastic")
    c.add_argument("operator")
    c.add_argument("--probes", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=float, default=CERT_TOL)
    n = sub.add_parser("norm", help="evaluate a norm of a step function")
    n.add_argument("spec")
    n.add_argument("function")
    m = sub.add_parser("major", help="decide f < g (Hardy-Littlewood-Polya)")
    m.add_argument("f")
    m.add_argument("g")
    m.add_argument("--tol", type=float, default=0.0)
    return p


def _run_scenario(args) -> int:
    data = _load(args.config) if args.config else {}
    data["scenario"] = args.command
    try:
        cfg = ScenarioConfig.from_json(data, seed=args.seed, output=args.out)
    except (ValueError, KeyError) as exc:
        raise SystemExit(f"rik: invalid config: {exc}")
    report = run_scenario(cfg)
    for path in emit_report(report, args.format, args.out):
        print(f"wrote {path}")
    for v in report.verdicts:
        status = "PASS" if v.passed else "FAIL"
        extra = f" ({v.detail})" if v.detail else ""
        print(f"{status} {v.name} margin={float(v.margin):.3e}{extra}")
    return 0 if report.passed else 1


def _check(args) -> int:
    op = operator_from_json(_load(args.operator))
    cells = max((g.cells for g in op.grids()), default=64)
    rng = np.random.default_rng(args.seed)
    probes = [random_grid_function(rng, cells, signed=bool(i % 2)) for i in range(args.probes)]
    cert = certify_substochastic(op, probes, args.tol)
    print(json.dumps(cert.to_json(), indent=2))
    return 0 if cert.passed else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command in SCENARIOS:
        return _run_scenario(args)
    if args.command == "check":
        return _check(args)
    if args.command == "norm":
        spec = NormSpec.from_json(_load(args.spec))
        x = StepFunction.from_json(_load(args.function))
        print(repr(float(spec.norm(x))))
        return 0
    f = StepFunction.from_json(_load(args.f))
    g = StepFunction.from_json(_load(args.g))
    cert = hlp_leq(f, g, args.tol)
    print(json.dumps(cert.to_json(), indent=2))
    return 0 if cert.holds else 1


if __name__ == "__main__":
    sys.exit(main())
