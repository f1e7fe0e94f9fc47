"""Command line entry point.

    rotconsensus check <config>
    rotconsensus spectrum <config>
    rotconsensus sweep <config> -o <dir>
    rotconsensus simulate <config> -o <dir>
    rotconsensus reproduce all -o <dir>
    rotconsensus list

``<config>`` is a JSON file or the name of a shipped scenario.  Exit codes:
0 success, 1 usage or config error, 2 numerical failure.
"""
import argparse
import logging
import sys

from . import emit
from .exceptions import ConfigError, RotConsensusError
from .scenarios import (
    check_payload,
    Scenario,
    reproduce_all,
    resolve_config,
    run_experiment,
    shipped_config_names,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="rotconsensus",
        description="Stability checks, sweeps and simulations for consensus under rotated local frames.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="print the stability report as JSON")
    p.add_argument("config")

    p = sub.add_parser("spectrum", help="print sigma(-H L~) as CSV (re, im)")
    p.add_argument("config")

    for name, text in (("sweep", "write sweep.csv"), ("simulate", "write trace.csv and trace.json")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("reproduce", help="run shipped scenarios")
    p.add_argument("which", nargs="+", help="'all' or shipped scenario names")
    p.add_argument("-o", "--out", required=True)

    sub.add_parser("list", help="list shipped scenarios")
    return parser


def _run(args):
    if args.command == "list":
        print("\n".join(shipped_config_names()))
        return
    if args.command == "reproduce":
        names = None if args.which == ["all"] else args.which
        if names:
            unknown = sorted(set(names) - set(shipped_config_names()))
            if unknown:
                raise ConfigError(f"unknown shipped scenarios: {', '.join(unknown)}")
        results = reproduce_all(args.out, names)
        for name, res in results.items():
            trace = res.traces.get("trace")
            report = res.reports.get("check")
            bits = [name]
            if report is not None:
                bits.append(f"verdict={report.verdict}")
            if trace is not None:
                bits.append(f"simulation={trace.classification}")
            print(" ".join(bits))
        return

    cfg = resolve_config(args.config)
    if args.command == "check":
        scn = Scenario(cfg)
        sys.stdout.write(emit.json_text(check_payload(scn, scn.check())))
    elif args.command == "spectrum":
        sys.stdout.write(emit.spectrum_csv(Scenario(cfg).check().spectrum))
    elif args.command == "sweep":
        if cfg.sweep is None:
            raise ConfigError(f"{cfg.name}: config has no sweep section")
        run_experiment(cfg, args.out, analyses=["sweep"])
    elif args.command == "simulate":
        if cfg.simulation is None:
            raise ConfigError(f"{cfg.name}: config has no simulation section")
        res = run_experiment(cfg, args.out, analyses=["simulate"])
        print(res.traces["trace"].classification)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RotConsensusError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
