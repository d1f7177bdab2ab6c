"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
import argparse
import os
import sys
from pathlib import Path

from . import __version__, config
from ._accel import USE_NUMBA
from .errors import ConfigError, SolverError
from .experiments import run
from .io import write_meta, write_table

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _threads_default():
    raw = os.environ.get("LAB_THREADS")
    if raw is None:
        return None
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"LAB_THREADS must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise ConfigError(f"LAB_THREADS must be a positive integer, got {raw!r}")
    return val


def build_parser():
    p = argparse.ArgumentParser(prog="benignlab", description="Interpolation and uniform-convergence lab.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, exp in config.SUBCOMMANDS.items():
        s = sub.add_parser(name, help=f"run the {exp} experiment")
        s.add_argument("--config", help="TOML or JSON config (default: the packaged one)")
        s.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, help="worker threads (default: LAB_THREADS or the config)")
        s.add_argument("--format", choices=config.FORMATS, help="table format")
    return p


def resolve_config(args):
    exp = config.SUBCOMMANDS[args.command]
    cfg = config.load(args.config) if args.config else config.default_config(exp)
    if cfg.experiment != exp:
        raise ConfigError(f"config is for experiment '{cfg.experiment}', not '{exp}'")
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.format is not None:
        changes["format"] = args.format
    threads = args.threads if args.threads is not None else _threads_default()
    if threads is not None:
        changes["threads"] = threads
    return config.validate(cfg.replace(**changes)) if changes else cfg


def write_result(result, cfg):
    out = Path(cfg.out_dir)
    paths = []
    for name, (header, rows) in result.tables.items():
        paths.append(write_table(out, name, header, rows, cfg.format))
    for name, svg in result.figures.items():
        path = out / f"{name}.svg"
        path.write_text(svg)
        paths.append(path)
    meta = {**result.meta, "version": __version__, "numba": USE_NUMBA, "threads": cfg.threads}
    paths.append(write_meta(out, meta))
    return paths


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = run(cfg, cfg.threads)
        paths = write_result(result, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
