"""Command-line runner.

    splitrx run CONFIG [--workers W]
    splitrx preset NAME [--trials N] [--seed S] [--out DIR] [--workers W]
    splitrx list-presets

Exit status is 0 on success, 2 for an invalid config or arguments and 1
when the simulation itself fails.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from splitrx import __version__
from splitrx.config import ExperimentConfig, canonical_text, config_hash, load_config
from splitrx.errors import ConfigError
from splitrx.montecarlo import SimulationError, joint_gain, sweep_rho
from splitrx.opcount import complexity_report
from splitrx.presets import PRESETS, get_preset, list_presets
from splitrx import report

__all__ = ["main", "run_experiment"]

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _params(cfg: ExperimentConfig):
    s = cfg.sweep
    return s.params.replace(power=s.power_grid[0], rho=s.rho_grid[0])


def _simulate(cfg: ExperimentConfig, workers: int | None):
    """Returns (file stem suffix, table, columns, plot columns or None)."""
    s = cfg.sweep
    if cfg.kind == "ser_vs_rho":
        table = report.ser_table(sweep_rho(s, workers))
        return "ser_vs_rho", table, report.SER_COLUMNS, ("rho", "ser", ("power", "detector"))
    if cfg.kind == "gain":
        table = report.gain_table(joint_gain(s, workers), s.master_seed)
        return "gain", table, report.GAIN_COLUMNS, ("power", "gain", ())
    table = report.complexity_table(complexity_report(s.constellation, _params(cfg)))
    return "complexity", table, report.COMPLEXITY_COLUMNS, None


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> dict[str, Path]:
    """Run one experiment and write its files; returns the written paths by format."""
    t0 = time.perf_counter()
    kind, table, columns, plot = _simulate(cfg, workers)
    t1 = time.perf_counter()

    out_dir = cfg.output_dir
    stem = f"{cfg.name}_{kind}"
    written: dict[str, Path] = {}
    if "csv" in cfg.formats:
        written["csv"] = out_dir / f"{stem}.csv"
        report.atomic_write(written["csv"], report.render_csv(table, columns, kind))
    if "json" in cfg.formats:
        written["json"] = out_dir / f"{stem}.json"
        report.atomic_write(written["json"], report.render_json(table, kind))
    if cfg.emit_plot_data and plot is not None:
        x, y, group = plot
        written["dat"] = out_dir / f"{stem}.dat"
        report.atomic_write(written["dat"], report.render_dat(table, x, y, group))

    manifest = report.RunManifest(
        config_hash=config_hash(cfg),
        master_seed=cfg.sweep.master_seed,
        tool_version=__version__,
        preset_assumptions=list(cfg.assumptions),
        timing={"simulate_s": round(t1 - t0, 3),
                "write_s": round(time.perf_counter() - t1, 3)},
        config=canonical_text(cfg, include_output=False),
        outputs=sorted(p.name for p in written.values()),
    )
    written["manifest"] = out_dir / f"{cfg.name}_manifest.json"
    report.atomic_write(written["manifest"], manifest.to_json())

    if kind == "complexity":
        row = table[0]
        print(f"{row['constellation']}: {row['upsilon_multiplications']} multiplications per "
              f"upsilon evaluation (per candidate); cost stub "
              f"{row['reference_multiplications']}; ratio {row['ratio']:.2f}")
    return written


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splitrx", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"splitrx {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config", type=Path)
    run.add_argument("--workers", type=int, default=None,
                     help="worker processes (default and cap: SPLITRX_THREADS)")

    pre = sub.add_parser("preset", help="run a built-in experiment")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--trials", type=int, default=None)
    pre.add_argument("--seed", type=int, default=None)
    pre.add_argument("--out", type=Path, default=None, help="output directory")
    pre.add_argument("--workers", type=int, default=None)

    sub.add_parser("list-presets", help="show the built-in experiments")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-presets":
        sys.stdout.write(list_presets())
        return EXIT_OK
    try:
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = get_preset(args.name).config(trials=args.trials, seed=args.seed,
                                               output_dir=args.out)
    except ConfigError as exc:
        where = f"{args.config}: " if args.command == "run" else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        written = run_experiment(cfg, args.workers)
    except SimulationError as exc:
        print(f"error: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written.values():
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
