"""Command-line experiment driver.

Examples
--------
::

    bodyorder preset list
    bodyorder preset dump fig-preasymptotic-E1 > e1.toml
    bodyorder converge --config e1.toml --out e1.csv --threads 4
    bodyorder nodes --preset nodes-interval
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import PRESETS, RUNNERS, ConfigError, ExperimentConfig, load_config, preset
from .recursion import MomentError
from .scf import SCFConvergenceError
from .spectral import SingularityError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("bodyorder")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bodyorder", description="Body-order approximation experiments (CSV output).")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        s = sub.add_parser(name, help=f"run the {name} sweep")
        src = s.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, metavar="PATH", help="TOML experiment config")
        src.add_argument("--preset", metavar="NAME", help="built-in preset")
        s.add_argument("--out", type=Path, metavar="PATH", help="CSV destination (default: config output or stdout)")
        s.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
        s.add_argument("--threads", type=int, default=1, metavar="N", help="concurrent sweep points")
    pr = sub.add_parser("preset", help="list or dump built-in presets")
    pr.add_argument("action", choices=("list", "dump"))
    pr.add_argument("name", nargs="?")
    return p


def _load(args) -> ExperimentConfig:
    if args.preset is not None:
        cfg = preset(args.preset)
    else:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
        cfg = load_config(text)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must fit in an unsigned 64-bit integer")
        cfg.data["seed"] = args.seed
    if args.threads < 1:
        raise ConfigError("--threads: must be >= 1")
    return cfg


def _preset_command(args) -> int:
    if args.action == "list":
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    if not args.name:
        raise ConfigError("preset dump: a preset name is required")
    sys.stdout.write(preset(args.name).to_toml())
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "preset":
            return _preset_command(args)
        cfg = _load(args)
        table = RUNNERS[args.command](cfg, threads=args.threads)
        text = table.to_csv(cfg)
        out = args.out or (Path(cfg["output"]) if cfg["output"] else None)
        if out is None:
            sys.stdout.write(text)
        else:
            out.write_text(text)
            log.info("wrote %d rows to %s", len(table.rows), out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularityError, SCFConvergenceError, MomentError, np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
