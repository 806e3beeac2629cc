"""Command line: seeded runs, ensembles, theorem checks, and plots.

The base seed comes from --seed when given, else the BCSYNC_SEED
environment variable, else 0; ensembles derive replica seeds as
base, base+1, ... unless an explicit list is supplied.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .harness import (
    RunManifest,
    TrajectoryRecord,
    config_fingerprint,
    export_csv,
    export_snapshots_csv,
    load_config,
    read_replica_csv,
    read_snapshots_csv,
    read_summary,
    run_ensemble,
    run_trajectory,
    _write_json,
)
from .metrics import check_quasi_sync_in_mean
from .plotting import render_svg
from .verify import VERIFY_SUBCOMMANDS

__all__ = ["main"]


def _base_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(os.environ.get("BCSYNC_SEED", "0"))


def _print_json(obj, out: str | None = None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, default=str)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def _cmd_run(args) -> int:
    config, settings = load_config(args.config)
    horizon = args.horizon if args.horizon is not None else settings.horizon
    seed = _base_seed(args)
    stride = args.snapshot_stride
    if stride is None:
        stride = settings.snapshot_stride
    if stride is None:
        stride = max(1, horizon // 400)
    record = run_trajectory(
        config, seed, horizon, initial=settings.initial, snapshot_stride=stride
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config=config.canonical_dict(),
        config_fingerprint=config_fingerprint(config, settings.initial),
        seeds=(seed,),
        replicas=1,
        horizon=horizon,
        snapshot_stride=stride,
        output_dir=str(out),
        config_path=str(args.config),
        initial=settings.initial,
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    export_csv(record, out / "replica_0000.csv")
    export_snapshots_csv(record, out / "snapshots_0000.csv")
    _print_json(
        {
            "output_dir": str(out),
            "seed": seed,
            "horizon": horizon,
            "final_diameter": float(record.diameters[-1]),
            "max_diameter": float(record.diameters.max()),
        }
    )
    return 0


def _cmd_ensemble(args) -> int:
    config, settings = load_config(args.config)
    horizon = args.horizon if args.horizon is not None else settings.horizon
    replicas = args.replicas if args.replicas is not None else settings.replicas
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    elif settings.seeds is not None:
        seeds = list(settings.seeds)
    else:
        base = _base_seed(args)
        seeds = [base + r for r in range(replicas)]
    stats, _records = run_ensemble(
        config,
        seeds,
        horizon,
        initial=settings.initial,
        snapshot_stride=args.snapshot_stride
        if args.snapshot_stride is not None
        else settings.snapshot_stride,
        workers=args.workers,
        outdir=args.out,
        config_path=str(args.config),
    )
    verdict = check_quasi_sync_in_mean(stats, config.epsilon, settings.tail_fraction)
    _print_json(
        {
            "output_dir": str(args.out),
            "replicas": len(seeds),
            "horizon": horizon,
            "quasi_sync_in_mean": verdict.as_dict(),
        }
    )
    return 0


def _cmd_verify(args) -> int:
    config, settings = load_config(args.config)
    seed = _base_seed(args)
    sub = args.subcommand
    kwargs: dict = {}
    if sub == "im":
        kwargs = {
            "replicas": args.replicas or settings.replicas,
            "horizon": args.horizon or settings.horizon,
            "tail_fraction": args.tail_fraction or settings.tail_fraction,
            "seed": seed,
            "workers": args.workers,
            "strict": args.strict,
            "initial": settings.initial,
        }
    elif sub == "as-failure":
        kwargs = {"windows": args.windows, "seed": seed, "emit": args.emit}
    elif sub == "lemma3":
        kwargs = {"lam": args.lam, "runs": args.runs, "seed": seed}
    elif sub == "lemma2":
        kwargs = {
            "lam": args.lam,
            "runs": args.runs,
            "horizon": args.horizon or 10_000,
            "seed": seed,
            "emit": args.emit,
        }
    elif sub == "large-noise":
        kwargs = {
            "p": args.p,
            "replicas": args.replicas or 50,
            "horizon": args.horizon or 5000,
            "tail_fraction": args.tail_fraction or 0.25,
            "seed": seed,
            "workers": args.workers,
        }
    elif sub == "prob-A":
        kwargs = {"steps": args.steps, "seed": seed}
    elif sub == "delta-bar":
        kwargs = {"mu": args.mu, "lam": args.lam, "window_cap": args.window_cap}
    try:
        verdict = VERIFY_SUBCOMMANDS[sub](config, **kwargs)
    except ValueError as err:
        _print_json({"check": sub, "passed": False, "rejected": str(err)}, args.out)
        return 2
    _print_json(verdict, args.out)
    return 0 if verdict["passed"] else 2


def _record_from_dir(indir: Path, replica: int) -> TrajectoryRecord:
    manifest = json.loads((indir / "manifest.json").read_text())
    series = read_replica_csv(indir / f"replica_{replica:04d}.csv")
    snap_path = indir / f"snapshots_{replica:04d}.csv"
    times, states = (None, None)
    if snap_path.exists():
        times, states = read_snapshots_csv(snap_path)
    return TrajectoryRecord(
        fingerprint=manifest["config_fingerprint"],
        seed=int(manifest["seeds"][replica]),
        replica=replica,
        horizon=int(manifest["horizon"]),
        diameters=series["d_V"],
        minima=series["min_opinion"],
        maxima=series["max_opinion"],
        means=series["mean_opinion"],
        snapshot_times=times,
        snapshots=states,
        snapshot_stride=manifest.get("snapshot_stride"),
    )


def _cmd_plot(args) -> int:
    indir = Path(args.input)
    manifest = json.loads((indir / "manifest.json").read_text())
    epsilon = args.epsilon
    if epsilon is None:
        epsilon = manifest["config"]["epsilon"]
    if args.mode == "agents":
        record = _record_from_dir(indir, args.replica)
        render_svg(record, args.out, mode="agents", epsilon=epsilon)
    else:
        summary = indir / "summary.json"
        if summary.exists():
            source = read_summary(summary)
        else:
            source = [
                _record_from_dir(indir, r) for r in range(int(manifest["replicas"]))
            ]
        render_svg(source, args.out, mode="diameter", epsilon=epsilon)
    print(str(args.out))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcsync",
        description="noisy bounded-confidence opinion dynamics: simulate and verify",
    )
    parser.add_argument("--version", action="version", version=f"bcsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one seeded trajectory")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--horizon", type=int, default=None)
    run.add_argument("--out", default="bcsync-out")
    run.add_argument("--snapshot-stride", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    ens = sub.add_parser("ensemble", help="simulate independent replicas")
    ens.add_argument("--config", required=True)
    ens.add_argument("--replicas", type=int, default=None)
    ens.add_argument("--seeds", default=None, help="comma-separated seed list")
    ens.add_argument("--seed", type=int, default=None, help="base seed")
    ens.add_argument("--horizon", type=int, default=None)
    ens.add_argument("--out", default="bcsync-out")
    ens.add_argument("--workers", type=int, default=1)
    ens.add_argument("--snapshot-stride", type=int, default=None)
    ens.set_defaults(func=_cmd_ensemble)

    ver = sub.add_parser("verify", help="run one verification suite")
    ver.add_argument("subcommand", choices=sorted(VERIFY_SUBCOMMANDS))
    ver.add_argument("--config", required=True)
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--out", default=None, help="also write the verdict JSON here")
    ver.add_argument("--strict", action="store_true")
    ver.add_argument("--replicas", type=int, default=None)
    ver.add_argument("--horizon", type=int, default=None)
    ver.add_argument("--tail-fraction", type=float, default=None, dest="tail_fraction")
    ver.add_argument("--workers", type=int, default=1)
    ver.add_argument("--windows", type=int, default=10_000)
    ver.add_argument("--runs", type=int, default=1000)
    ver.add_argument("--steps", type=int, default=100_000)
    ver.add_argument("--mu", type=float, default=1.0)
    ver.add_argument("--lambda", type=float, default=1.0, dest="lam")
    ver.add_argument("--p", type=float, default=0.5)
    ver.add_argument("--emit", type=float, default=None)
    ver.add_argument("--window-cap", type=int, default=10**6, dest="window_cap")
    ver.set_defaults(func=_cmd_verify)

    plot = sub.add_parser("plot", help="render an SVG from a run directory")
    plot.add_argument("--input", required=True)
    plot.add_argument("--mode", choices=("agents", "diameter"), default="diameter")
    plot.add_argument("--out", required=True)
    plot.add_argument("--epsilon", type=float, default=None)
    plot.add_argument("--replica", type=int, default=0)
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
