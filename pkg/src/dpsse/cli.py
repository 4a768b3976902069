"""Command line entry point ``dpsse``.

Exit codes: 0 success, 1 invalid input (case, plan or parameters),
2 a run failed or did not converge.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import DPSSEError
from .harness import METHODS, ExperimentPlan, run_experiments
from .io import load_case
from .measurements import check_observability
from .metrics import summaries_to_csv
from .stopping import MODES

EXIT_OK, EXIT_INVALID, EXIT_RUN = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpsse", description="Distributed DC state estimation benchmark")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one method on one case")
    run.add_argument("--case", required=True, help="case JSON file or bundled name (case4, case14, case118)")
    run.add_argument("--method", required=True, choices=METHODS)
    run.add_argument("--stopping", default="wosc", choices=MODES)
    run.add_argument("--epsilon", type=float, default=1e-6)
    run.add_argument("--t-delay", type=float, default=0.5)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--max-iter", type=int, default=None)
    run.add_argument("--out", default="results")
    run.add_argument("--alpha", type=float, default=1.0)
    run.add_argument("--tau", type=float, default=None)
    run.add_argument("--tau-fraction", type=float, default=0.5)
    run.add_argument("--omega-x", type=float, default=1e4)
    run.add_argument("--c", type=float, default=1.0)
    run.add_argument("--timing", default="wall", choices=("wall", "off"))

    mx = sub.add_parser("matrix", help="run the experiment matrix described by a plan file")
    mx.add_argument("--plan", required=True)
    mx.add_argument("--out", default=None)

    val = sub.add_parser("validate", help="load a case and check observability")
    val.add_argument("--case", required=True)
    return ap


def _report(rows, out) -> int:
    sys.stdout.write(summaries_to_csv(rows))
    print(f"wrote {Path(out) / 'table.csv'}", file=sys.stderr)
    bad = [r for r in rows if r.status != "converged"]
    for r in bad:
        print(f"{r.case} {r.method} {r.mode}: {r.status} {r.error}".rstrip(), file=sys.stderr)
    return EXIT_RUN if bad else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cf = load_case(args.case)
            rep = check_observability(cf.problem().H, cf.problem().R)
            print(f"{cf.case.name}: {cf.case.n_buses} buses, {len(cf.case.branches)} branches, "
                  f"{cf.partition.n_areas} areas, {len(cf.measurements)} measurements, "
                  f"rank {rep.rank}/{rep.n_states}")
            if not rep.observable:
                print("not observable", file=sys.stderr)
                return EXIT_INVALID
            return EXIT_OK
        if args.command == "run":
            plan = ExperimentPlan(
                cases=[args.case], methods=[args.method], modes=[args.stopping], alpha=args.alpha,
                tau=args.tau, tau_fraction=args.tau_fraction, omega_x=args.omega_x, c=args.c,
                epsilon=args.epsilon, t_delay=args.t_delay, seed=args.seed, max_iter=args.max_iter,
                out=args.out, timing=args.timing,
            )
        else:
            plan = ExperimentPlan.from_json(args.plan)
            if args.out is not None:
                plan.out = args.out
    except (DPSSEError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        rows = run_experiments(plan)
    except DPSSEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return _report(rows, plan.out)


if __name__ == "__main__":
    sys.exit(main())
