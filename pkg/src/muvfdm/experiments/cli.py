"""Command line entry point ``muvfdm``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure.
"""

import argparse
import sys

import numpy as np

from ..exceptions import ConfigError, NumericalHardError
from .checks import run_checks
from .config import ScenarioConfig, load_config
from .engine import run_sweep
from .results import emit_results

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

# defaults of each recipe; a config file and flags override them
RECIPES = {
    "sum-rate": {"csit": "perfect", "schemes": ("dpc", "ribf", "mf")},
    "csit-sweep": {"csit": "both", "schemes": ("ribf",), "beta_grid": (1.0, 2.0, 3.0)},
    "compare-separation": {"csit": "both", "schemes": ("ribf", "separation"),
                           "mbs_interference_on_sues": True, "K": 6, "gamma_tx": 12},
    "check": {"csit": "perfect", "schemes": ("ribf",), "trials": 20},
}

HELP = {
    "sum-rate": "perfect-CSIT sum rates of DPC bound, RIBF and MF over SNR",
    "csit-sweep": "imperfect/perfect rate ratios over training length and load",
    "compare-separation": "MU-VFDM with MBS interference vs disjoint-band baseline",
    "check": "property suite: null residuals, signal path, normalization",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _snr_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid SNR list {text!r}") from None


def build_parser():
    parser = _Parser(prog="muvfdm", description="MU-VFDM two-tier precoding simulator")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in RECIPES:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="scenario file with a [scenario] section")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--snr", type=_snr_list, help="comma separated SNR grid in dB")
        if name != "check":
            p.add_argument("--out", default="-", help="output path, '-' for stdout")
            p.add_argument("--format", choices=("csv", "json"),
                           help="output format (default from --out suffix, else csv)")
            p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def resolve_config(args):
    base = dict(RECIPES[args.command])
    if args.config:
        cfg = load_config(args.config, base=base)
    else:
        cfg = ScenarioConfig(**base)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.snr is not None:
        overrides["snr_grid"] = args.snr
    return cfg.replace(**overrides) if overrides else cfg


def _run(args):
    cfg = resolve_config(args)
    if args.command == "check":
        report = run_checks(cfg)
        for line in report.lines():
            print(line)
        return EXIT_OK if report.ok else EXIT_NUMERIC
    result = run_sweep(cfg, threads=max(1, args.threads))
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    text = emit_results(result, fmt, args.out)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        print(f"wrote {len(result.points)} points to {args.out}", file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalHardError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
