"""``flatdiss {spectrum,steady,sweep,dynamics}`` entry point."""

import argparse
import sys

from .errors import ConfigError, SolverError
from .experiments import RUNNERS, load_config

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="flatdiss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, runner in RUNNERS.items():
        p = sub.add_parser(name, help=(runner.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", help="key = value file")
        p.add_argument("--L", dest="L", help="unit cells; the chain has 2L+1 sites")
        p.add_argument("--u")
        p.add_argument("--v")
        p.add_argument("--l", dest="l", help="dissipation range")
        p.add_argument("--alpha", help="phase in radians, e.g. pi/2")
        p.add_argument("--gamma")
        p.add_argument("--solver", help="linear or dense")
        p.add_argument("--out", dest="output_dir")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("L", "u", "v", "l", "alpha", "gamma", "solver", "output_dir")}
    try:
        config = load_config(args.config, overrides)
        bundle = RUNNERS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{args.command}: wrote {len(bundle.tables)} tables to {bundle.directory}")
    if not bundle.ok:
        for failure in bundle.manifest.get("failures", []):
            print(f"failed: {failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
