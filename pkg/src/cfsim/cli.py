"""Command-line front end: ``cfsim run | sweep | dump-assignment | dump-supports``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from contextlib import contextmanager

from cfsim.config import ConfigError, SimConfig, load_config
from cfsim.harness import (
    FULL_FADINGS,
    FULL_LAYOUTS,
    build_assignment,
    build_layout,
    emit,
    render,
    run_scenario,
    summarize,
    sweep,
)

log = logging.getLogger("cfsim")


def _csv_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _common(p):
    p.add_argument("--config", help="JSON configuration file (defaults if omitted)")
    p.add_argument("--scheme", help="NonOverloaded, SiaOpa, RopaRandom or RopaWgf")
    p.add_argument("--estimator", help="PM, SP or Ideal")
    p.add_argument("--seed", type=int)
    p.add_argument("-K", "--num-ues", dest="num_ues", type=int)


def _mc(p):
    p.add_argument("--layouts", type=int, dest="num_layouts")
    p.add_argument("--fadings", type=int, dest="num_fadings")
    p.add_argument("--paper-scale", action="store_true",
                   help=f"use {FULL_LAYOUTS} layouts x {FULL_FADINGS} fading draws")
    p.add_argument("--workers", type=int, help="process count (capped by CFSIM_THREADS)")
    p.add_argument("--out", help="output file (default: CSV on stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format (default: from --out suffix, else csv)")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_time_s as 0 so files are byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfsim", description="Cell-free massive MIMO uplink simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _common(p)
    _mc(p)

    p = sub.add_parser("sweep", help="simulate a parameter sweep")
    _common(p)
    _mc(p)
    p.add_argument("--axis", required=True, help="K, tau_p, LM, scheme or estimator")
    p.add_argument("--values", required=True, type=_csv_list,
                   help="comma-separated values; LM values look like 25x16")
    p.add_argument("--schemes", type=_csv_list, help="comma-separated schemes to cross with the axis")
    p.add_argument("--estimators", type=_csv_list, help="comma-separated estimators to cross with the axis")

    for name, text in (("dump-assignment", "write k, leader, pilot, outage, cluster per UE"),
                       ("dump-supports", "write l, k, |S|, support indices per RU-UE pair")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--layout", type=int, default=0, dest="layout_index")
        p.add_argument("--out", help="output CSV (default: stdout)")
    return parser


def config_from_args(args) -> SimConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("scheme", "estimator", "seed", "num_ues", "num_layouts", "num_fadings")}
    if getattr(args, "paper_scale", False):
        overrides.update(num_layouts=FULL_LAYOUTS, num_fadings=FULL_FADINGS)
    if args.config:
        return load_config(args.config, **overrides)
    return SimConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror}") from exc
        with fh:
            yield fh


def _emit(rows, args):
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    if args.out:
        emit(rows, fmt, args.out, timing=not args.no_timing)
        log.info("wrote %d rows to %s", len(rows), args.out)
    else:
        sys.stdout.write(render(rows, fmt, timing=not args.no_timing))


def cmd_run(args):
    config = config_from_args(args)
    _emit(summarize(run_scenario(config, args.workers), config), args)


def cmd_sweep(args):
    config = config_from_args(args)
    _emit(sweep(config, args.axis, args.values, args.schemes, args.estimators, args.workers), args)


def cmd_dump_assignment(args):
    config = config_from_args(args)
    layout, supports = build_layout(config, args.layout_index)
    a = build_assignment(config, layout, supports, args.layout_index)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "leader", "pilot", "outage", "cluster"])
        for k in range(a.num_ues):
            w.writerow([k, a.leader[k], a.pilot[k], int(a.outage[k]), " ".join(map(str, a.clusters[k]))])


def cmd_dump_supports(args):
    config = config_from_args(args)
    _, supports = build_layout(config, args.layout_index)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "k", "size", "indices"])
        for l in range(supports.shape[0]):
            for k in range(supports.shape[1]):
                idx = supports[l, k].nonzero()[0]
                w.writerow([l, k, idx.size, " ".join(map(str, idx))])


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "dump-assignment": cmd_dump_assignment,
    "dump-supports": cmd_dump_supports,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"cfsim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
