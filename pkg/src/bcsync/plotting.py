"""Figure rendering for trajectories and ensembles.

Figures are rendered through the object-oriented matplotlib API with a
fixed SVG hash salt and no date metadata, so identical inputs produce
byte-identical SVG 1.1 files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .harness import TrajectoryRecord
from .metrics import EnsembleStats

__all__ = ["render_svg"]

_HASHSALT = "bcsync"


def _new_figure() -> Figure:
    fig = Figure(figsize=(7.0, 4.5), dpi=100)
    FigureCanvasSVG(fig)
    return fig


def _save(fig: Figure, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": _HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _agents_figure(record: TrajectoryRecord, epsilon: float | None) -> Figure:
    if record.snapshots is None:
        raise ValueError("agent-trajectory plots need a record with snapshots")
    fig = _new_figure()
    ax = fig.add_subplot(111)
    times = record.snapshot_times
    for i in range(record.snapshots.shape[1]):
        ax.plot(times, record.snapshots[:, i], lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("opinion")
    ax.set_ylim(-0.02, 1.02)
    title = f"opinion evolution (seed {record.seed})"
    if epsilon is not None:
        title += f", epsilon = {epsilon:g}"
    ax.set_title(title)
    return fig


def _diameter_figure(source, epsilon: float | None) -> Figure:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    if isinstance(source, EnsembleStats):
        steps = range(source.horizon + 1)
        ax.plot(steps, source.mean, color="C0", lw=1.0, label="ensemble mean d_V")
        ax.fill_between(
            steps,
            source.mean - source.half_width,
            source.mean + source.half_width,
            color="C0",
            alpha=0.3,
            linewidth=0,
            label=f"{source.z:g}-sigma band",
        )
    else:
        for record in source:
            ax.plot(range(record.horizon + 1), record.diameters, lw=0.8,
                    label=f"seed {record.seed}")
    if epsilon is not None:
        ax.axhline(epsilon, color="C3", ls="--", lw=1.0, label="epsilon")
    ax.set_xlabel("t")
    ax.set_ylabel("d_V")
    ax.set_ylim(bottom=0.0)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def render_svg(source, path: str | Path, *, mode: str = "diameter",
               epsilon: float | None = None) -> Path:
    """Render a deterministic SVG plot of a record, record list, or ensemble.

    mode "agents" draws every agent's opinion over the snapshot times of
    one TrajectoryRecord; mode "diameter" draws diameter series, with a
    confidence band when given EnsembleStats.
    """
    if mode == "agents":
        if isinstance(source, (list, tuple)):
            if not source:
                raise ValueError("no records to plot")
            source = source[0]
        if not isinstance(source, TrajectoryRecord):
            raise ValueError("agents mode needs a TrajectoryRecord")
        fig = _agents_figure(source, epsilon)
    elif mode == "diameter":
        if isinstance(source, TrajectoryRecord):
            source = [source]
        if not isinstance(source, EnsembleStats):
            source = list(source)
            if not source:
                raise ValueError("no records to plot")
        fig = _diameter_figure(source, epsilon)
    else:
        raise ValueError(f"unknown plot mode {mode!r}")
    _save(fig, path)
    return Path(path)
