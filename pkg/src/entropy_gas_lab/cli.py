"""Command-line entry point.

    entropy-gas-lab <markov|clt|free|gas> [--config FILE] [--preset NAME]
                    [--set KEY=VALUE ...] [--seed S] [--out DIR]

Exit codes: 0 all checks pass, 1 a check failed, 2 usage error,
3 numeric or structural error.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .config import SUBCOMMANDS, parse_config
from .errors import EntropyLabError, UsageError
from .experiments import run_experiment
from .presets import PRESETS, load_preset

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropy-gas-lab",
                                     description="Energy and entropy experiments with judged reports.")
    parser.add_argument("--list-presets", action="store_true", help="print the shipped presets and exit")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--preset", choices=sorted(n for n, (s, _) in PRESETS.items() if s == name),
                       help="shipped configuration to start from")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one key (repeatable)")
        p.add_argument("--seed", help="random seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides out_dir)")
    return parser


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out_dir"] = args.out
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name in sorted(PRESETS):
            print(f"{name}\t{PRESETS[name][0]}")
        return 0
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        overrides = _overrides(args)
        if args.preset and args.config:
            raise UsageError("use either --preset or --config, not both")
        if args.preset:
            cfg = load_preset(args.preset, args.subcommand, overrides)
        else:
            cfg = parse_config(args.subcommand, args.config, overrides=overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            bundle = run_experiment(cfg)
    except EntropyLabError as exc:
        print(f"entropy-gas-lab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"entropy-gas-lab: I/O error: {exc}", file=sys.stderr)
        return 3
    for name, metric in sorted(bundle.metrics.items()):
        print(f"{'PASS' if metric.passed else 'FAIL'}  {name} = {metric.value!r}")
    print(f"{bundle.status}: summary written to {cfg.out_dir / 'summary.json'}")
    if bundle.error is not None:
        print(f"entropy-gas-lab: error: {bundle.error}", file=sys.stderr)
        return bundle.provenance.get("exit_code", 3)
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
