"""Batch command-line front end.

    gravphase run <config.json | preset:NAME> [--set path=value]... [--out DIR]
    gravphase presets [--emit NAME]
    gravphase schema

Exit codes: 0 success, 1 configuration error, 2 numerical guard violation,
3 I/O error.  The environment variable GRAVPHASE_THREADS caps the BLAS/FFT
thread pools (it must be set before the numeric libraries load, which is why
this module imports them lazily)."""

from __future__ import annotations

import argparse
import json
import os
import sys


def _configure_threads() -> None:
    n = os.environ.get("GRAVPHASE_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, n)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravphase",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one scenario config")
    run.add_argument("config", help="path to a JSON config, or preset:NAME")
    run.add_argument("--set", dest="sets", action="append", default=[],
                     metavar="PATH=VALUE", help="override a scalar config field "
                     "(dotted path, JSON-parsed value)")
    run.add_argument("--out", default=None, help="output directory "
                     "(defaults to the config's output_dir, else 'out')")

    presets = sub.add_parser("presets", help="list shipped presets")
    presets.add_argument("--emit", default=None, metavar="NAME",
                         help="print the named preset config as JSON")

    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv=None) -> int:
    _configure_threads()
    args = _build_parser().parse_args(argv)

    from .config import (ConfigError, CONFIG_SCHEMA, apply_overrides,
                         get_preset, load_config, preset_names)

    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return 0

    if args.command == "presets":
        try:
            if args.emit:
                print(json.dumps(get_preset(args.emit), indent=2))
            else:
                for name in preset_names():
                    print(name)
            return 0
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1

    # run
    try:
        if args.config.startswith("preset:"):
            cfg = get_preset(args.config.split(":", 1)[1])
        else:
            cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.sets)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    outdir = args.out or cfg.get("output_dir", "out")
    try:
        from .scenarios import run_scenario
        report = run_scenario(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3

    print(json.dumps({"scenario": cfg["scenario"], "seed": cfg["seed"],
                      "output": str(outdir)}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
