"""Command-line entry point: run a parameter sweep and write CSV (plus optional SVG)."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .montecarlo import generate_scenario, substream
from .params import ParameterError, Topology, validate
from .pointprocess import dump_csv
from .sweep import (
    Config, ConfigError, SweepSpec, bundled_config, emit_csv, emit_metadata, emit_plot, load_config,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_DEFAULT_CONFIG = {Topology.COVERAGE: "fig3.conf", Topology.CAPACITY: "fig4.conf"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hetnet",
        description="Average delivery rate sweeps for two-tier cache-enabled cellular networks.",
    )
    ap.add_argument("--config", type=Path,
                    help="flat key = value file (default: the bundled set for the chosen topology)")
    ap.add_argument("--topology", choices=("cov", "cap"))
    ap.add_argument("--mode", choices=("theory", "sim", "both"))
    ap.add_argument("--sweep", metavar="VAR", help="parameter to sweep, e.g. gamma or F_sc")
    ap.add_argument("--from", dest="start", type=float, metavar="X")
    ap.add_argument("--to", dest="stop", type=float, metavar="Y")
    ap.add_argument("--steps", type=int, metavar="N")
    ap.add_argument("--scale", choices=("linear", "log"))
    ap.add_argument("--realizations", type=int, metavar="N")
    ap.add_argument("--seed", type=int, metavar="N")
    ap.add_argument("--workers", type=int, metavar="N", help="process count (default: HETNET_THREADS or all cores)")
    ap.add_argument("--out", type=Path, metavar="PATH", help="CSV output path")
    ap.add_argument("--emit-plot", type=Path, metavar="PATH", help="also write an SVG plot")
    ap.add_argument("--no-metadata", action="store_true", help="skip the <out>.meta.json sidecar")
    ap.add_argument("--dump-scenario", type=Path, metavar="PATH",
                    help="write the point sets of realization 0 as CSV and exit")
    return ap


def resolve_config(args: argparse.Namespace) -> Config:
    """Load the config file and apply command-line overrides."""
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        t = Topology.parse(args.topology or "cov")
        cfg = load_config(bundled_config(_DEFAULT_CONFIG[t]))

    if args.topology is not None:
        cfg.topology = Topology.parse(args.topology)
        validate(cfg.params, cfg.topology)

    sw = cfg.sweep
    if any(v is not None for v in (args.sweep, args.start, args.stop, args.steps, args.scale)):
        changing_var = args.sweep is not None and (sw is None or args.sweep != sw.variable)
        if changing_var and (args.start is None or args.stop is None):
            raise ConfigError(f"--sweep {args.sweep} needs --from and --to")
        if sw is None and (args.start is None or args.stop is None):
            raise ConfigError("no sweep range given")
        sw = SweepSpec(
            variable=args.sweep or sw.variable,
            start=args.start if args.start is not None else sw.start,
            stop=args.stop if args.stop is not None else sw.stop,
            steps=args.steps if args.steps is not None else (sw.steps if sw else 9),
            scale=args.scale or (sw.scale if sw else "linear"),
        )
    if sw is None:
        raise ConfigError("no sweep specified (use --sweep/--from/--to or the config file)")
    cfg.sweep = sw

    run = cfg.run
    if args.mode is not None:
        run.mode = args.mode
    if args.realizations is not None:
        if args.realizations < 1:
            raise ConfigError("--realizations must be positive")
        run.realizations = args.realizations
    if args.seed is not None:
        run.seed = args.seed
    if args.workers is not None:
        run.workers = args.workers
    return cfg


def _dump(cfg: Config, path: Path) -> None:
    s = generate_scenario(cfg.params, cfg.topology, substream(cfg.run.seed, 0))
    sets = [s.cr, s.mbs, s.sbs]
    sets += [ps for ps in (s.users, s.sus, s.mus) if ps is not None]
    dump_csv(path, sets)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None and args.dump_scenario is None:
        parser.error("--out is required")
    try:
        cfg = resolve_config(args)
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"hetnet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.dump_scenario is not None:
            _dump(cfg, args.dump_scenario)
            return EXIT_OK
        records = run_sweep(cfg)
    except ConfigError as exc:
        print(f"hetnet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"hetnet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        emit_csv(records, args.out)
        if not args.no_metadata:
            emit_metadata(records, args.out.with_name(args.out.name + ".meta.json"))
        if args.emit_plot is not None:
            emit_plot(records, args.emit_plot)
    except OSError as exc:
        print(f"hetnet: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
