"""Command line entry point: ``randsum {bound,verify,sweep,exact,version} CONFIG [key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .experiments import (ConfigError, SweepAborted, emit_report, load_config, run_sweep,
                          run_verify)

log = logging.getLogger("randsum")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randsum", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bound", "evaluate the bound only (sweeps the grid when the config has one)"),
        ("verify", "bound plus the configured distance estimate"),
        ("sweep", "verify at every grid point and fit log-log slopes"),
        ("exact", "verify with the exact lattice convolution estimate"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config")
        p.add_argument("overrides", nargs="*", metavar="key=value")
    sub.add_parser("version", help="print the package version")
    return parser


def _exit_code(reports) -> int:
    verdicts = [r.verdict for r in reports]
    if "inconclusive" in verdicts:
        log.warning("%d row(s) inconclusive: band straddles the bound", verdicts.count("inconclusive"))
    return EXIT_FAIL if "fail" in verdicts else EXIT_OK


def _write(cfg, reports, slopes=None, aborted=None):
    fmt = cfg.output.get("format", "csv")
    path = cfg.output.get("path")
    text = emit_report(reports, fmt, path, slopes, aborted)
    if path is None:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        overrides = list(args.overrides)
        if args.command == "bound":
            overrides.append("method={kind: none}")
        elif args.command == "exact":
            overrides.append("method.kind=exact")
        cfg = load_config(args.config, overrides)
        if args.command == "exact":
            cfg.method = {k: v for k, v in cfg.method.items() if k in ("kind", "tail_tol")}
        if args.command == "sweep" or (args.command == "bound" and cfg.sweep is not None):
            try:
                result = run_sweep(cfg)
            except SweepAborted as exc:
                log.error("%s", exc)
                _write(cfg, exc.reports, aborted=str(exc))
                return EXIT_CONFIG
            _write(cfg, result.reports, result.slopes())
            return _exit_code(result.reports)
        report = run_verify(cfg)
        _write(cfg, [report])
        return _exit_code([report])
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
