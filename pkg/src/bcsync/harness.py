"""Seeded trajectory and ensemble execution, config files, persistence.

A run directory always receives the manifest before any computation
starts, then per-replica CSVs and the ensemble summary; every file is
written atomically (temp file + rename) so failures never leave partial
content behind.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import ModelConfig
from .metrics import DEFAULT_Z, EnsembleStats, ensemble_mean_diameter
from .presets import dw_preset, general_preset, hk_preset
from .sampling import (
    InertiaPolicy,
    NoiseModel,
    _sample_subset,
    trajectory_streams,
)

__all__ = [
    "RunSettings",
    "TrajectoryRecord",
    "RunManifest",
    "load_config",
    "config_fingerprint",
    "run_trajectory",
    "run_ensemble",
    "export_csv",
    "export_snapshots_csv",
    "read_replica_csv",
    "read_snapshots_csv",
    "write_summary",
    "read_summary",
]

MANIFEST_SCHEMA = "bcsync/run-manifest/v1"
SUMMARY_SCHEMA = "bcsync/ensemble-summary/v1"
_PREFETCH = 2048


@dataclass(frozen=True)
class RunSettings:
    """Execution parameters carried by a config file next to the model."""

    horizon: int = 10_000
    replicas: int = 100
    seeds: tuple[int, ...] | None = None
    snapshot_stride: int | None = None
    tail_fraction: float = 0.25
    initial: tuple[float, ...] | None = None


def _parse_inertia(spec, n: int, alpha: float | None):
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "constant":
            return InertiaPolicy.constant(float(spec["value"]))
        if kind == "uniform_interval":
            return InertiaPolicy.uniform_interval(alpha if alpha is not None else 1.0 / n)
        if kind == "hk_rule":
            return InertiaPolicy.hk()
        raise ValueError(f"unknown inertia kind {kind!r}")
    return spec


def _parse_noise(spec, delta: float) -> NoiseModel:
    if spec is None:
        return NoiseModel.uniform_noise(delta)
    kind = spec.get("kind", "uniform")
    d = float(spec.get("delta", delta))
    if kind == "uniform":
        return NoiseModel.uniform_noise(d)
    if kind == "two_point":
        return NoiseModel.two_point(d)
    if kind == "custom_discrete":
        return NoiseModel(
            kind="custom_discrete",
            delta=d,
            atoms=tuple(float(a) for a in spec["atoms"]),
            weights=tuple(float(w) for w in spec["weights"]),
        )
    raise ValueError(f"unknown noise kind {kind!r}")


def load_config(path: str | Path) -> tuple[ModelConfig, RunSettings]:
    """Parse a JSON config file into the model and its run settings."""
    raw = json.loads(Path(path).read_text())
    preset = raw.get("preset", "general")
    n = int(raw["n"])
    epsilon = float(raw["epsilon"])
    delta = float(raw.get("delta", 0.0))
    if preset == "hk":
        config = hk_preset(n, epsilon, delta)
    elif preset == "dw":
        config = dw_preset(n, epsilon, float(raw["beta"]), delta)
    elif preset == "general":
        config = general_preset(
            n,
            epsilon,
            delta,
            size_probs=raw.get("size_probs", "uniform"),
            inertia=_parse_inertia(raw.get("inertia", "hk_rule"), n, raw.get("alpha")),
            alpha=raw.get("alpha"),
        )
    else:
        raise ValueError(f"unknown preset {preset!r}")
    if "noise" in raw:
        config = replace(config, noise=_parse_noise(raw["noise"], delta))
    initial = raw.get("initial")
    if initial is not None:
        initial = tuple(float(v) for v in initial)
        if len(initial) != n:
            raise ValueError(f"initial vector must have n = {n} entries")
    seeds = raw.get("seeds")
    settings = RunSettings(
        horizon=int(raw.get("horizon", 10_000)),
        replicas=int(raw.get("replicas", 100)),
        seeds=None if seeds is None else tuple(int(s) for s in seeds),
        snapshot_stride=(
            None if raw.get("snapshot_stride") is None else int(raw["snapshot_stride"])
        ),
        tail_fraction=float(raw.get("tail_fraction", 0.25)),
        initial=initial,
    )
    return config, settings


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_fingerprint(config: ModelConfig, initial=None) -> str:
    """Stable hash of the resolved model plus any pinned initial state."""
    payload = {
        "config": config.canonical_dict(),
        "initial": None if initial is None else [float(v) for v in initial],
    }
    return hashlib.sha256(_canonical_json(payload).encode()).hexdigest()


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-step observables (and optional state snapshots) of one replica."""

    fingerprint: str
    seed: int
    replica: int
    horizon: int
    diameters: np.ndarray
    minima: np.ndarray
    maxima: np.ndarray
    means: np.ndarray
    snapshot_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None
    snapshot_stride: int | None = None


def _noise_prefetcher(rng, model: NoiseModel, n: int):
    """Stream per-step noise rows, generating _PREFETCH steps per block.

    Block generation consumes the stream in the same order as per-step
    draws, so prefetched trajectories stay bit-identical to ones built
    from the public sampling operations.
    """
    if model.degenerate:
        zero = np.zeros(n)
        return lambda: zero
    buf = None
    pos = _PREFETCH
    if model.kind == "uniform":
        lo, hi = -model.delta, model.delta

        def pull():
            nonlocal buf, pos
            if pos >= _PREFETCH:
                buf = rng.uniform(lo, hi, (_PREFETCH, n))
                pos = 0
            pos += 1
            return buf[pos - 1]

        return pull

    atoms = np.asarray(model.atoms if model.kind == "custom_discrete" else (-model.delta, model.delta))
    cumulative = np.cumsum(
        np.asarray(model.weights if model.kind == "custom_discrete" else (0.5, 0.5))
    )

    def pull():
        nonlocal buf, pos
        if pos >= _PREFETCH:
            buf = rng.random((_PREFETCH, n))
            pos = 0
        pos += 1
        return atoms[np.searchsorted(cumulative, buf[pos - 1], side="right").clip(0, atoms.size - 1)]

    return pull


def run_trajectory(
    config: ModelConfig,
    seed: int,
    horizon: int,
    *,
    replica: int = 0,
    initial=None,
    snapshot_stride: int | None = None,
) -> TrajectoryRecord:
    """Simulate one seeded replica and record per-step diameter statistics.

    The initial state is drawn uniformly on [0,1]^n from the replica's
    init stream unless an explicit vector is supplied. Each step samples
    the communicating set, then inertia, then noise, each from its own
    stream, so the three ingredients stay mutually independent.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = config.n
    streams = trajectory_streams(seed, replica)
    if initial is None:
        x = streams["init"].random(n)
    else:
        x = np.asarray(initial, dtype=float).copy()
        if x.shape != (n,):
            raise ValueError(f"initial state must have shape ({n},)")
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError("initial opinions must lie in [0,1]")
    comm_rng = streams["comm"]
    inertia_rng = streams["inertia"]
    pull_noise = _noise_prefetcher(streams["noise"], config.noise, n)

    cumulative = config.comm.cumulative()
    epsilon = config.epsilon
    policy = config.inertia
    hk = policy.kind == "hk_rule"
    const = np.full(n, policy.value) if policy.kind == "constant" else None

    mins = np.empty(horizon + 1)
    maxs = np.empty(horizon + 1)
    means = np.empty(horizon + 1)
    mins[0], maxs[0], means[0] = x.min(), x.max(), x.mean()

    want_snaps = snapshot_stride is not None
    snap_times: list[int] = []
    snaps: list[np.ndarray] = []
    if want_snaps:
        if snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        snap_times.append(0)
        snaps.append(x.copy())

    for t in range(horizon):
        k = int(np.searchsorted(cumulative, comm_rng.random(), side="right"))
        comm = _sample_subset(comm_rng, n, k)
        noise = pull_noise()
        targets = x.copy()
        if k >= 2:
            xu = x[comm]
            adj = np.abs(xu[:, None] - xu[None, :]) <= epsilon
            np.fill_diagonal(adj, False)
            counts = adj.sum(axis=1)
            has = counts > 0
            if has.any():
                nbr_mean = (adj[has] @ xu) / counts[has]
                if hk:
                    a = 1.0 / (counts[has] + 1.0)
                elif const is not None:
                    a = const[comm[has]]
                else:
                    a = inertia_rng.uniform(policy.low, policy.high, n)[comm[has]]
                targets[comm[has]] = a * xu[has] + (1.0 - a) * nbr_mean
            elif const is None and not hk:
                inertia_rng.uniform(policy.low, policy.high, n)
        elif const is None and not hk:
            # keep the inertia stream position independent of the comm draw
            inertia_rng.uniform(policy.low, policy.high, n)
        x = np.clip(targets + noise, 0.0, 1.0)
        mins[t + 1], maxs[t + 1], means[t + 1] = x.min(), x.max(), x.mean()
        if want_snaps and ((t + 1) % snapshot_stride == 0 or t + 1 == horizon):
            snap_times.append(t + 1)
            snaps.append(x.copy())

    return TrajectoryRecord(
        fingerprint=config_fingerprint(config, initial),
        seed=int(seed),
        replica=int(replica),
        horizon=int(horizon),
        diameters=maxs - mins,
        minima=mins,
        maxima=maxs,
        means=means,
        snapshot_times=np.asarray(snap_times, dtype=np.intp) if want_snaps else None,
        snapshots=np.vstack(snaps) if want_snaps else None,
        snapshot_stride=snapshot_stride,
    )


@dataclass(frozen=True)
class RunManifest:
    """Reproduction record written before any computation starts."""

    config: dict
    config_fingerprint: str
    seeds: tuple[int, ...]
    replicas: int
    horizon: int
    snapshot_stride: int | None
    output_dir: str
    tool_version: str = __version__
    config_path: str | None = None
    initial: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("manifest seeds must be distinct")

    def to_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "tool_version": self.tool_version,
            "config_path": self.config_path,
            "config": self.config,
            "config_fingerprint": self.config_fingerprint,
            "initial": None if self.initial is None else list(self.initial),
            "seeds": list(self.seeds),
            "replicas": self.replicas,
            "horizon": self.horizon,
            "snapshot_stride": self.snapshot_stride,
            "output_dir": self.output_dir,
        }


def _write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    _write_bytes(path, (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode())


def export_csv(record: TrajectoryRecord, path: str | Path) -> None:
    """Write the per-step series as CSV (LF endings, full-precision floats)."""
    lines = ["t,d_V,min_opinion,max_opinion,mean_opinion"]
    for t in range(record.horizon + 1):
        lines.append(
            f"{t},{float(record.diameters[t])!r},{float(record.minima[t])!r},"
            f"{float(record.maxima[t])!r},{float(record.means[t])!r}"
        )
    _write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def export_snapshots_csv(record: TrajectoryRecord, path: str | Path) -> None:
    """Write state snapshots as CSV with one opinion column per agent."""
    if record.snapshots is None:
        raise ValueError("record carries no snapshots")
    n = record.snapshots.shape[1]
    lines = ["t," + ",".join(f"x{i}" for i in range(n))]
    for t, row in zip(record.snapshot_times, record.snapshots):
        lines.append(f"{int(t)}," + ",".join(repr(float(v)) for v in row))
    _write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def read_replica_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a per-replica CSV back into arrays keyed by column name."""
    lines = Path(path).read_text().strip().split("\n")
    names = lines[0].split(",")
    mat = np.asarray([[float(v) for v in line.split(",")] for line in lines[1:]])
    return {name: mat[:, i] for i, name in enumerate(names)}


def read_snapshots_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a snapshots CSV into (times, states) arrays."""
    lines = Path(path).read_text().strip().split("\n")
    mat = np.asarray([[float(v) for v in line.split(",")] for line in lines[1:]])
    return mat[:, 0].astype(np.intp), mat[:, 1:]


def write_summary(stats: EnsembleStats, path: str | Path) -> None:
    """Serialize ensemble statistics to the summary JSON document."""
    _write_json(
        Path(path),
        {
            "schema": SUMMARY_SCHEMA,
            "replicas": stats.replicas,
            "horizon": stats.horizon,
            "z": stats.z,
            "mean": stats.mean.tolist(),
            "variance": stats.variance.tolist(),
            "min": stats.minimum.tolist(),
            "max": stats.maximum.tolist(),
            "half_width": stats.half_width.tolist(),
        },
    )


def read_summary(path: str | Path) -> EnsembleStats:
    raw = json.loads(Path(path).read_text())
    if raw.get("schema") != SUMMARY_SCHEMA:
        raise ValueError(f"not an ensemble summary document: {path}")
    return EnsembleStats(
        replicas=int(raw["replicas"]),
        mean=np.asarray(raw["mean"]),
        variance=np.asarray(raw["variance"]),
        minimum=np.asarray(raw["min"]),
        maximum=np.asarray(raw["max"]),
        half_width=np.asarray(raw["half_width"]),
        z=float(raw["z"]),
    )


def _replica_task(args) -> TrajectoryRecord:
    config, seed, horizon, replica, initial, stride = args
    return run_trajectory(
        config, seed, horizon, replica=replica, initial=initial, snapshot_stride=stride
    )


def run_ensemble(
    config: ModelConfig,
    seeds,
    horizon: int,
    *,
    initial=None,
    snapshot_stride: int | None = None,
    workers: int = 1,
    z: float = DEFAULT_Z,
    outdir: str | Path | None = None,
    config_path: str | None = None,
) -> tuple[EnsembleStats, list[TrajectoryRecord]]:
    """Run independent replicas and aggregate their diameter series.

    Replica r uses seeds[r] with replica index r, so records are
    bit-identical however the work is scheduled; the aggregation folds
    the records in replica order either way.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("an ensemble needs at least 2 seeds")
    if len(set(seeds)) != len(seeds):
        raise ValueError("ensemble seeds must be distinct")
    out = Path(outdir) if outdir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            config=config.canonical_dict(),
            config_fingerprint=config_fingerprint(config, initial),
            seeds=tuple(seeds),
            replicas=len(seeds),
            horizon=horizon,
            snapshot_stride=snapshot_stride,
            output_dir=str(out),
            config_path=config_path,
            initial=None if initial is None else tuple(float(v) for v in initial),
        )
        _write_json(out / "manifest.json", manifest.to_dict())

    tasks = [
        (config, seed, horizon, r, initial, snapshot_stride)
        for r, seed in enumerate(seeds)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replica_task, tasks))
    else:
        records = [_replica_task(t) for t in tasks]
    records.sort(key=lambda r: r.replica)

    stats = ensemble_mean_diameter([r.diameters for r in records], z=z)
    if out is not None:
        for record in records:
            export_csv(record, out / f"replica_{record.replica:04d}.csv")
            if record.snapshots is not None:
                export_snapshots_csv(record, out / f"snapshots_{record.replica:04d}.csv")
        write_summary(stats, out / "summary.json")
    return stats, records
