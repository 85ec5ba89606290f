"""Command-line entry points.

``run``        -- execute an experiment plan, write speedup artifacts
``check``      -- run the ordering checker on a saved trace file
``oracle``     -- exhaustively classify crash points of a scenario
``sweep-copy`` -- copy-size study (CPU vs offloaded persistent copy)

Every subcommand exits 0 exactly when its check passes.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness, scenarios
from .checker import check_file, check_trace
from .oracle import CrashOracle


def _cmd_run(args) -> int:
    plan = harness.load_plan(args.plan) if args.plan else harness.ExperimentPlan(
        seeds=list(range(1, args.seeds + 1)), n_txns=args.txns)
    rows = harness.run_experiment(plan)
    os.makedirs(args.out, exist_ok=True)
    harness.write_csv(rows, os.path.join(args.out, "speedups.csv"))
    text = harness.report(rows)
    with open(os.path.join(args.out, "report.txt"), "w") as f:
        f.write(text)
    print(text, end="")
    return 0 if not harness.ordering_violations(rows) else 1


def _cmd_check(args) -> int:
    result = check_file(args.trace)
    if result.ok:
        print(f"{args.trace}: ok")
        return 0
    for v in result.violations:
        print(f"{args.trace}: {v}")
    return 1


def _cmd_oracle(args) -> int:
    if os.path.exists(args.scenario):
        sc = scenarios.load_scenario_file(args.scenario)
    else:
        sc = scenarios.get_scenario(args.scenario)
    oracle = CrashOracle(sc.program(), sc.config())
    rep = oracle.enumerate()
    res = check_trace(oracle.machine.trace)
    print(f"{sc.name}: {rep}; checker "
          + ("ok" if res.ok else f"found {len(res.violations)} violation(s)"))
    if rep.all_consistent != res.ok:
        print(f"{sc.name}: checker and oracle disagree")
        return 1
    if rep.all_consistent != sc.expect_consistent:
        kind = "consistent" if sc.expect_consistent else "broken"
        print(f"{sc.name}: expected a {kind} protocol, oracle says otherwise")
        return 1
    return 0


def _cmd_sweep(args) -> int:
    points = harness.copy_sweep(calibrate=not args.no_calibrate)
    print(f"{'size':>8s} {'cpu_ns':>10s} {'ndp_ns':>10s} {'speedup':>8s}")
    for p in points:
        print(f"{p.size:8d} {p.cpu_ns:10.1f} {p.ndp_ns:10.1f} {p.speedup:8.3f}")
    if args.csv:
        harness.copy_sweep_csv(points, args.csv)
    ratios = [p.speedup for p in points]
    monotone = all(a < b for a, b in zip(ratios, ratios[1:]))
    lo_ok = abs(ratios[0] - 1.13) <= 0.30 * 1.13
    hi_ok = abs(ratios[-1] - 5.57) <= 0.30 * 5.57
    print(f"monotone={monotone} small-copy={ratios[0]:.3f} "
          f"large-copy={ratios[-1]:.3f}")
    return 0 if monotone and lo_ok and hi_ok else 1


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="ndpsim",
        description="near-data crash-consistency simulator and verifier")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run an experiment plan")
    p.add_argument("--plan", help="TOML experiment plan")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--seeds", type=int, default=3,
                   help="seed count when no plan file is given")
    p.add_argument("--txns", type=int, default=16,
                   help="transactions per workload when no plan file is given")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("check", help="check a saved trace for ordering violations")
    p.add_argument("trace")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("oracle", help="exhaustive crash classification of a scenario")
    p.add_argument("scenario", help="built-in scenario name or TOML file")
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("sweep-copy", help="CPU vs offloaded copy latency sweep")
    p.add_argument("--csv", help="also write a CSV table")
    p.add_argument("--no-calibrate", action="store_true",
                   help="use the raw default cost model")
    p.set_defaults(fn=_cmd_sweep)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
