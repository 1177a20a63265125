"""Command-line entry point: ``bftw run | verify | derive-params``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import harness
from .committees import WitnessSystem, verify_witness_system
from .params import derive_params


def _cmd_run(args) -> int:
    try:
        cfg = harness.load_config(args.config, args.override or (), args.seeds)
        report = harness.run_experiment(cfg, args.workers)
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = args.out or cfg.output
    try:
        text = harness.emit_report(report, args.format, out)
    except OSError as e:
        print(str(e), file=sys.stderr)
        return 2
    if out is None:
        sys.stdout.write(text)
    elif not args.quiet:
        sys.stdout.write(harness.report_table(report))
    return report.exit_code


def _cmd_verify(args) -> int:
    try:
        with open(args.path) as fh:
            ws = WitnessSystem.from_json(fh.read())
    except (OSError, ValueError, KeyError) as e:
        print(f"cannot load witness system: {e}", file=sys.stderr)
        return 2
    rep = verify_witness_system(ws)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return 0 if rep.ok else 1


def _cmd_derive(args) -> int:
    try:
        p = derive_params(args.n, args.t, b=args.b, lam=args.lam, c=args.c, sigma=args.sigma)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(p.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bftw", description="witness-committee BFT simulator")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seeds", help="inclusive range a..b; replaces the config's seeds")
    r.add_argument("--override", action="append", metavar="KEY=VALUE",
                   help="dotted config key, e.g. adversary.strategy=flood (repeatable)")
    r.add_argument("--out", help="report path; defaults to the config's output field")
    r.add_argument("--format", choices=("json", "table"), default="json")
    r.add_argument("--workers", type=int, default=None,
                   help=f"parallel seeds (default: ${harness.WORKERS_ENV} or 1)")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(fn=_cmd_run)

    v = sub.add_parser("verify", help="check a witness-system json file")
    v.add_argument("path")
    v.set_defaults(fn=_cmd_verify)

    d = sub.add_parser("derive-params", help="print derived protocol parameters")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--t", type=int, required=True)
    d.add_argument("--lambda", dest="lam", type=float, default=0.0)
    d.add_argument("--c", type=float, default=1.0)
    d.add_argument("--b", type=float, default=0.0)
    d.add_argument("--sigma", type=int, default=None)
    d.set_defaults(fn=_cmd_derive)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
