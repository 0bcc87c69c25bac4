"""Command-line entry points: tabulate, margin, simulate, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .electiondata import Contest, parse_cvrs
from .margins import (
    MarginReport,
    hamming_margin_bruteforce,
    load_external_margin,
    plurality_cvr_margin,
)
from .simharness import ExperimentConfig, run_experiment
from .socialchoice import tabulate, tabulate_plurality


def _load_inputs(args):
    contest = Contest.load(args.contest)
    return contest, parse_cvrs(args.cvrs, contest)


def cmd_tabulate(args) -> int:
    contest, cvrs = _load_inputs(args)
    outcome = tabulate(cvrs.votes(), contest)
    print(json.dumps({
        "contest": contest.id,
        "winners": sorted(outcome.winners),
        "tie": outcome.tie_flag,
    }))
    return 0


def cmd_margin(args) -> int:
    contest, cvrs = _load_inputs(args)
    if args.external:
        report = load_external_margin(args.external, n_cards=cvrs.n)
    elif contest.kind == "plurality":
        tallies, _ = tabulate_plurality(cvrs.votes(), contest)
        report = plurality_cvr_margin(tallies, contest, n_cards=cvrs.n)
    else:
        report = hamming_margin_bruteforce(cvrs, contest, max_radius=args.max_radius)
    print(json.dumps({
        "V": report.V,
        "N": report.N,
        "v": float(report.v),
        "kind": report.kind,
        "source": report.source,
        "degenerate": report.degenerate,
    }))
    return 0


def cmd_simulate(args) -> int:
    with open(args.config) as f:
        config = ExperimentConfig.from_json(json.load(f))
    if args.jobs:
        config = ExperimentConfig(
            grid=config.grid, methods=config.methods, replications=config.replications,
            alpha=config.alpha, master_seed=config.master_seed,
            mismatch_estimator=config.mismatch_estimator,
            comparison_estimator=config.comparison_estimator, jobs=args.jobs,
        )
    result = run_experiment(config, out_dir=args.out)
    for cell in result.cells:
        status = f"skipped ({cell.skipped})" if cell.skipped else (
            f"mean_n={cell.mean_n:.1f} full_count={cell.full_count_fraction:.3f}"
        )
        print(f"{cell.spec.point_id()} [{cell.method}] {status}")
    if args.out:
        print(f"wrote {Path(args.out) / 'summary.csv'}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, demo=args.demo)
    if args.demo:
        print(f"demo session: {app.state.demo_session_id}")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cardaudit", description="Card-level election audit toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tabulate", help="tabulate a contest from CVRs")
    t.add_argument("--contest", required=True, help="contest JSON file")
    t.add_argument("--cvrs", required=True, help="CVR NDJSON file")
    t.set_defaults(func=cmd_tabulate)

    m = sub.add_parser("margin", help="compute or load a CVR margin")
    m.add_argument("--contest", required=True)
    m.add_argument("--cvrs", required=True)
    m.add_argument("--max-radius", type=int, default=4, help="brute-force search radius cap")
    m.add_argument("--external", help="JSON file with an externally computed bound {V_minus, source}")
    m.set_defaults(func=cmd_margin)

    s = sub.add_parser("simulate", help="run a replicated audit experiment")
    s.add_argument("--config", required=True, help="experiment config JSON")
    s.add_argument("--out", help="output directory for summary/table/raw files")
    s.add_argument("--jobs", type=int, default=0, help="parallel workers (overrides config)")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("serve", help="run the live audit HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)
    v.add_argument("--data-dir", help="session persistence directory")
    v.add_argument("--demo", action="store_true", help="seed a synthetic demo session at startup")
    v.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
