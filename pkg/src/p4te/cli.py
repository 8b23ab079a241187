"""Command line: ``p4te run``, ``p4te sweep`` and ``p4te report``.

Exit codes: 0 on success, 1 for configuration errors, 2 when a runtime
invariant check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import SCHEMES, apply_overrides, load_config
from .experiment import aggregate, load_summaries, run_cell, sweep, write_aggregate, write_cell
from .network import InvariantViolation
from .topology import ConfigError

log = logging.getLogger("p4te")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="INI config file; defaults apply to missing keys")
    p.add_argument("--scheme", choices=SCHEMES, help="upward path policy")
    p.add_argument("--workload", metavar="NAME", help="websearch, datamining, incast, or a CDF name")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p4te", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one (scheme, load, seed) cell")
    _common(run)
    run.add_argument("--load", type=float, metavar="F", help="offered core load in (0, 1]")

    sw = sub.add_parser("sweep", help="simulate schemes x loads x seeds and aggregate")
    _common(sw)
    sw.add_argument("--load", type=float, action="append", metavar="F", help="load level (repeatable)")
    sw.add_argument("--seeds", metavar="LIST", help="comma-separated seeds")
    sw.add_argument("--schemes", metavar="LIST", help="comma-separated schemes")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    rep = sub.add_parser("report", help="aggregate existing run outputs")
    rep.add_argument("--out", metavar="DIR", required=True)
    rep.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config(args: argparse.Namespace):
    cfg = load_config(args.config)
    pairs = list(args.overrides)
    if args.scheme:
        pairs.append(f"experiment.scheme={args.scheme}")
    if args.workload:
        pairs.append(f"workload.name={args.workload}")
    if args.seed is not None:
        pairs.append(f"experiment.seed={args.seed}")
    if args.out:
        pairs.append(f"experiment.out={args.out}")
    if getattr(args, "seeds", None):
        pairs.append(f"experiment.seeds={args.seeds}")
    if getattr(args, "schemes", None):
        pairs.append(f"experiment.schemes={args.schemes}")
    load = getattr(args, "load", None)
    if isinstance(load, list):
        pairs.append("experiment.loads=" + ",".join(map(str, load)))
    elif load is not None:
        pairs.append(f"workload.load={load}")
    return apply_overrides(cfg, pairs)


def _print_summary(s: dict) -> None:
    print(f"{s['workload']} {s['scheme']} load={s['load']:g} seed={s['seed']}: "
          f"flows={s['completed']}/{s['flows']} short={s['mean_fct_short']:.4f}s "
          f"large={s['mean_fct_large']:.4f}s retx={s['retransmissions']} drops={s['drops']}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    cell = run_cell(cfg)
    d = write_cell(Path(cfg.experiment.out), cell, cfg)
    _print_summary(cell.summary)
    log.info("wrote %s in %.1fs", d, time.perf_counter() - t0)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = Path(cfg.experiment.out)
    cells = sweep(cfg, out=out, jobs=max(1, args.jobs))
    for c in cells:
        _print_summary(c.summary)
    print(f"aggregate written to {out / 'aggregate.csv'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    agg = aggregate(load_summaries(out))
    write_aggregate(out, agg)
    for a in agg:
        print(f"{a['workload']} {a['scheme']} load={a['load']:g} seeds={len(a['seeds'])}: "
              f"short={a['mean_fct_short']:.4f}s large={a['mean_fct_large']:.4f}s "
              f"retx={a['retransmissions']:.1f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on bad usage; keep 2 for invariant failures
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
