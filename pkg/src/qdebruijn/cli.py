"""Command-line entry point: ``qdebruijn run <config>...`` and ``qdebruijn list``."""

import argparse
import sys

from . import __version__, scenarios
from .errors import ConfigError, NumericalError, QdbError, ValidationError

EXIT_PASS = 0
EXIT_IDENTITY = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    p = argparse.ArgumentParser(prog="qdebruijn", description="Run entropy-rate identity scenarios.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one or more scenario files (or bundled scenario names)")
    run.add_argument("configs", nargs="+", metavar="config")
    run.add_argument("--output-dir", default="qdebruijn-out", help="directory for CSV and text reports")
    run.add_argument("--strict", action="store_true", help="treat unknown config keys as errors")
    run.add_argument("--fd-step", type=float, default=None, help="override the finite-difference step")
    run.add_argument("--cutoff", type=int, default=None, help="override the Fock cutoff")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--quiet", action="store_true", help="only print failures and errors")
    sub.add_parser("list", help="list bundled scenarios")
    return p


def _run_one(spec, args, out):
    path = scenarios.resolve_path(spec)
    cfg = scenarios.load_config(path, strict=args.strict)
    cfg = scenarios.apply_overrides(cfg, args.fd_step, args.cutoff, args.seed)
    report = scenarios.run_scenario(cfg)
    written = scenarios.emit_report(report, args.output_dir, cfg.output_path)
    if not args.quiet or not report.passed:
        out.write(scenarios.format_text(report))
        out.write(f"wall_time: {report.wall_time:.2f} s\n")
        out.write("wrote: " + ", ".join(str(w) for w in written) + "\n")
    return EXIT_PASS if report.passed else EXIT_IDENTITY


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in scenarios.bundled_scenarios():
            print(name)
        return EXIT_PASS
    worst = EXIT_PASS
    for spec in args.configs:
        try:
            code = _run_one(spec, args, sys.stdout)
        except ConfigError as exc:
            print(f"{spec}: {exc}", file=sys.stderr)
            code = EXIT_CONFIG
        except ValidationError as exc:
            print(f"{spec}: error: {exc}", file=sys.stderr)
            code = EXIT_CONFIG
        except NumericalError as exc:
            print(f"{spec}: numerical error: {exc}", file=sys.stderr)
            code = EXIT_NUMERICAL
        except QdbError as exc:
            print(f"{spec}: error: {exc}", file=sys.stderr)
            code = EXIT_NUMERICAL
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
