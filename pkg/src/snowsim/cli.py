"""Command-line front end.

analyze   reproduce the parameter table, quoted tail bounds, and error
          budgets with exact rational arithmetic (decimal output strings are
          rendered from rationals, never through binary floating point)
simulate  run a preset or config over one or more seeds, writing traces
          (JSON lines) and metrics (CSV)
replay    re-run the invariant monitors over stored traces

Exit codes: 0 clean, 1 any mismatch or monitor violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import analysis
from .simnet import SimConfig, check_all, metrics_csv, parse_jsonl, run

__all__ = ["main", "preset_names", "load_preset"]


def preset_names() -> list[str]:
    root = resources.files("snowsim") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir()
                  if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    ref = resources.files("snowsim") / "presets" / f"{name}.json"
    if not ref.is_file():
        raise FileNotFoundError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(ref.read_text())


def _dec(x: Fraction, digits: int) -> str:
    return analysis.to_decimal_string(x, digits)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    digits = args.precision
    if args.target == "table1":
        schedule = analysis.beta_schedule()
        mismatches = 0
        eps_labels = ["1e-22", "1e-14", "1e-6"]
        print("alpha2  " + "  ".join(f"beta(eps<{e})" for e in eps_labels))
        for alpha2 in sorted(schedule, reverse=True):
            got = schedule[alpha2]
            want = analysis.REFERENCE_BETA_SCHEDULE[alpha2]
            mark = "" if got == want else f"   MISMATCH reference={want}"
            print(f"{alpha2:6d}  " + "  ".join(f"{b:12d}" for b in got) + mark)
            if got != want:
                mismatches += 1
        print(f"{48 - 3 * mismatches}/48 matches")
        return 0 if mismatches == 0 else 1
    if args.target == "bounds":
        ok = True
        for name, value, op, bound, holds in analysis.check_quoted_bounds():
            status = "pass" if holds else "FAIL"
            print(f"[{status}] {name}: {_dec(value, digits)} {op} "
                  f"{_dec(bound, digits)}")
            ok = ok and holds
        return 0 if ok else 1
    # budget
    if (args.processors, args.years, args.rps) == (10_000, 1000, 5):
        horizon = analysis.DEPLOYMENT_HORIZON
    else:
        horizon = analysis.DeploymentHorizon(
            processors=args.processors, years=args.years,
            rounds_per_second=args.rps,
            rounds=analysis.horizon_rounds(args.years, args.rps))
    ok = True
    for name, budget, target, holds in analysis.deployment_budget_report(horizon):
        status = "pass" if holds else "FAIL"
        print(f"[{status}] {name}: {_dec(budget.cumulative_bound, digits)} "
              f"< {_dec(target, digits)}")
        ok = ok and holds
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# simulate / replay
# ---------------------------------------------------------------------------

def _load_config_doc(args) -> dict:
    if args.preset:
        return load_preset(args.preset)
    return json.loads(Path(args.config).read_text())


def cmd_simulate(args) -> int:
    doc = _load_config_doc(args)
    if args.halt_on_violation:
        doc["halt_on_violation"] = True
    base_seed = doc.get("seed", 0)
    seeds = [base_seed + i for i in range(args.seeds)]
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    all_metrics = []
    total_violations = 0
    for seed in seeds:
        doc["seed"] = seed
        config = SimConfig.from_dict(doc)
        trace, metrics = run(config)
        all_metrics.append(metrics)
        total_violations += metrics.violations
        if metrics.violations:
            for v in check_all(trace):
                print(f"seed {seed}: [{v['monitor']}] t={v['t']} {v['detail']}")
        if out_dir:
            trace.write(out_dir / f"trace-{seed}.jsonl")
    if out_dir:
        (out_dir / "metrics.csv").write_text(metrics_csv(all_metrics))
    decided = sum(m.decided_count for m in all_metrics)
    print(f"{len(seeds)} run(s): {decided} decisions, "
          f"{total_violations} violation(s)")
    return 1 if total_violations else 0


def cmd_replay(args) -> int:
    total = 0
    for path in args.traces:
        try:
            trace = parse_jsonl(Path(path).read_text())
        except (OSError, ValueError) as exc:
            print(f"{path}: unreadable trace: {exc}", file=sys.stderr)
            return 2
        violations = check_all(trace)
        total += len(violations)
        print(f"{path}: {len(violations)} violation(s)")
        for v in violations:
            print(f"  [{v['monitor']}] t={v['t']} {v['detail']}")
    return 1 if total else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="snowsim")
    sub = ap.add_subparsers(dest="command", required=True)

    az = sub.add_parser("analyze", help="exact tables, bounds and budgets")
    az.add_argument("target", choices=["table1", "bounds", "budget"])
    az.add_argument("--precision", type=int, default=12,
                    help="significant digits in decimal output")
    az.add_argument("--processors", type=int, default=10_000)
    az.add_argument("--years", type=int, default=1000)
    az.add_argument("--rps", type=int, default=5,
                    help="rounds per second for the budget horizon")
    az.set_defaults(fn=cmd_analyze)

    sim = sub.add_parser("simulate", help="run a preset or config file")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=None, help="named built-in scenario")
    src.add_argument("--config", help="path to a config JSON document")
    sim.add_argument("--seeds", type=int, default=1,
                     help="number of consecutive seeds, starting at the "
                          "config's seed")
    sim.add_argument("--out", help="directory for traces and metrics")
    sim.add_argument("--halt-on-violation", action="store_true")
    sim.set_defaults(fn=cmd_simulate)

    rp = sub.add_parser("replay", help="re-check monitors over stored traces")
    rp.add_argument("traces", nargs="+")
    rp.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
