"""Figures from experiment CSVs.

Five figure kinds, one per metric family the experiment harness emits:

* ``bre``       : error-vs-time curves, one series per input CSV
* ``suboptimal``: cumulative suboptimal-action percentage curves
* ``regret``    : cumulative per-episode regret curves
* ``indices``   : per-state index trajectories from an indices CSV
* ``heatmap``   : a convergence map (x_axis, y_axis, fraction_converged),
                   warmer colour = higher fraction

Inputs are never modified; rendering is deterministic given the same CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "render", "FIGURE_KINDS"]

FIGURE_KINDS = ("bre", "heatmap", "regret", "suboptimal", "indices")


@dataclass
class FigureSpec:
    inputs: list
    kind: str
    output: str
    labels: list = field(default_factory=list)
    delta: float = None
    title: str = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _read_csv(path):
    """Parse a harness CSV into (header, columns of floats).

    Raises with the file name and one-based line number on any malformed
    row; an empty file or a header-only file is an error.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValueError(f"{path}: cannot read ({exc})") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(
                f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: non-numeric field ({exc})") from exc
    return header, np.asarray(data)


def _column(path, header, data, name):
    if name not in header:
        raise ValueError(f"{path}: missing column {name!r} (has {header})")
    return data[:, header.index(name)]


def _series_label(spec, i):
    if i < len(spec.labels):
        return spec.labels[i]
    return Path(spec.inputs[i]).stem


def _line_figure(spec, ylabel, extract):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xlabel = "step"
    for i, path in enumerate(spec.inputs):
        header, data = _read_csv(path)
        if i == 0 and "episode" in header:
            xlabel = "episode"
        x, y = extract(path, header, data)
        ax.plot(x, y, label=_series_label(spec, i), linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    if spec.title:
        ax.set_title(spec.title)
    return fig


def _axis_column(path, header, data):
    for name in ("step", "episode"):
        if name in header:
            return _column(path, header, data, name)
    raise ValueError(f"{path}: missing column 'step' (or 'episode')")


def _render_bre(spec):
    return _line_figure(
        spec,
        "mean absolute value error",
        lambda p, h, d: (_axis_column(p, h, d), _column(p, h, d, "bre")),
    )


def _render_suboptimal(spec):
    def extract(path, header, data):
        x = _axis_column(path, header, data)
        if "pct_suboptimal" in header:
            return x, _column(path, header, data, "pct_suboptimal")
        return x, 100.0 - _column(path, header, data, "pct_optimal_actions")

    return _line_figure(spec, "cumulative % suboptimal actions", extract)


def _render_regret(spec):
    def extract(path, header, data):
        x = _axis_column(path, header, data)
        return x, np.cumsum(_column(path, header, data, "regret"))

    return _line_figure(spec, "cumulative episodic regret", extract)


def _render_indices(spec):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in spec.inputs:
        header, data = _read_csv(path)
        x = _axis_column(path, header, data)
        idx_cols = [c for c in header if c.startswith("idx_")]
        if not idx_cols:
            raise ValueError(f"{path}: missing column 'idx_*'")
        for c in idx_cols:
            ax.plot(x, _column(path, header, data, c), linewidth=0.9, label=c)
    ax.set_xlabel("step")
    ax.set_ylabel("index estimate")
    if len(ax.lines) <= 12:
        ax.legend(loc="best", fontsize=7)
    ax.grid(True, alpha=0.3)
    if spec.title:
        ax.set_title(spec.title)
    return fig


def _render_heatmap(spec):
    if len(spec.inputs) != 1:
        raise ValueError("heatmap takes exactly one convergence-map CSV")
    path = spec.inputs[0]
    header, data = _read_csv(path)
    xs = _column(path, header, data, "x_axis")
    ys = _column(path, header, data, "y_axis")
    ds = _column(path, header, data, "delta")
    fr = _column(path, header, data, "fraction_converged")
    deltas = np.unique(ds)
    if spec.delta is not None:
        mask = np.isclose(ds, spec.delta)
        if not mask.any():
            raise ValueError(f"{path}: no rows with delta={spec.delta} (has {deltas})")
    elif deltas.size > 1:
        raise ValueError(
            f"{path}: multiple delta values {deltas}; pass --delta to pick one"
        )
    else:
        mask = np.ones(len(ds), dtype=bool)
    xs, ys, fr = xs[mask], ys[mask], fr[mask]
    ux, uy = np.unique(xs), np.unique(ys)
    grid = np.full((uy.size, ux.size), np.nan)
    for x, y, f in zip(xs, ys, fr):
        grid[np.searchsorted(uy, y), np.searchsorted(ux, x)] = f
    fig, ax = plt.subplots(figsize=(6, 5))
    # warm colours mark high convergence fractions, cool mark low
    im = ax.imshow(
        grid,
        origin="lower",
        cmap="coolwarm",
        vmin=0.0,
        vmax=1.0,
        aspect="auto",
        extent=(ux.min(), ux.max(), uy.min(), uy.max()),
    )
    fig.colorbar(im, ax=ax, label="fraction of runs converged")
    ax.set_xlabel("x_axis")
    ax.set_ylabel("y_axis")
    if spec.title:
        ax.set_title(spec.title)
    return fig


_RENDERERS = {
    "bre": _render_bre,
    "suboptimal": _render_suboptimal,
    "regret": _render_regret,
    "indices": _render_indices,
    "heatmap": _render_heatmap,
}


def render(spec: FigureSpec):
    """Render one figure; returns the output path.

    All inputs are validated before the output file is created, so a failed
    render never leaves a partial image behind.
    """
    fig = _RENDERERS[spec.kind](spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=120)
    finally:
        plt.close(fig)
    return out
