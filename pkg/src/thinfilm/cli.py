"""
Command-line entry point.

    thinfilm run <config> [--override key=value ...] [--seed N] [--out DIR]
    thinfilm sweep <config> ...
    thinfilm converge <config> ...
    thinfilm check <series.csv> [--manifest PATH]

Exit status is 0 on success, 1 when a monitor fails, 2 on configuration or
input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .diagnostics import read_series
from .experiments import (
    ConfigError,
    ExperimentConfig,
    convergence_study,
    evaluate_monitors,
    parse_config,
    perturbation_sweep,
    run_experiment,
    spatial_convergence,
)

def sections_to_text(sections: dict[str, dict[str, str]]) -> str:
    lines = []
    for name, entries in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in entries.items())
        lines.append("")
    return "\n".join(lines)


def _load(args) -> ExperimentConfig:
    text = Path(args.config).read_text()
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"init.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    return parse_config(text, overrides)


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    for m in result.monitors:
        print(m.line())
    print(f"wrote {result.output_dir}")
    return result.status


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = perturbation_sweep(cfg)
    print(f"{cfg.sweep_parameter:>12} {'final_omega':>14} {'final_energy':>14} status")
    for r in rows:
        print(f"{r.value:12g} {r.final_omega:14.6g} {r.final_energy:14.6g} {r.status} {r.error}")
    return max(r.status for r in rows)


def cmd_converge(args) -> int:
    cfg = _load(args)
    if not cfg.dt_ladder and not cfg.n_ladder:
        raise ConfigError("converge needs sweep.dt_ladder and/or sweep.n_ladder")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.dt_ladder:
        rows = convergence_study(cfg)
        with open(out / "convergence_dt.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dt", "error", "order"])
            for r in rows:
                w.writerow([repr(r.dt), format(r.error, ".17g"), format(r.order, ".17g")])
                print(f"dt={r.dt:<10g} error={r.error:.6e} order={r.order:.3f}")
    if cfg.n_ladder:
        rows_n = spatial_convergence(cfg)
        with open(out / "convergence_n.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "error"])
            for n, err in rows_n:
                w.writerow([n, format(err, ".17g")])
                print(f"N={n:<6d} error={err:.6e}")
    return 0


def cmd_check(args) -> int:
    series = Path(args.series)
    manifest_path = Path(args.manifest) if args.manifest else series.parent / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no run manifest at {manifest_path}; pass --manifest")
    manifest = json.loads(manifest_path.read_text())
    cfg = parse_config(sections_to_text(manifest["config"]))
    records = read_series(series)
    if not records:
        raise ConfigError(f"{series} holds no records")
    zeta_sq = [float(manifest.get("zeta_sq", 0.0))] * len(records)
    monitors = evaluate_monitors(records, zeta_sq, cfg.model_config())
    for m in monitors:
        print(m.line())
    return 1 if any(m.asserted and not m.passed for m in monitors) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinfilm", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="experiment config file")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (section.key=value or key=value); repeatable")
        p.add_argument("--seed", type=int, help="seed for random initial conditions")
        p.add_argument("--out", help="output directory")
        return p

    with_config(sub.add_parser("run", help="run one simulation")).set_defaults(func=cmd_run)
    with_config(sub.add_parser("sweep", help="perturbation sweep over gamma or epsilon_sq")).set_defaults(func=cmd_sweep)
    with_config(sub.add_parser("converge", help="temporal and/or spatial convergence study")).set_defaults(
        func=cmd_converge
    )
    p = sub.add_parser("check", help="re-run the monitors on a stored series")
    p.add_argument("series", help="series.csv written by a run")
    p.add_argument("--manifest", help="manifest.json (default: next to the series)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
