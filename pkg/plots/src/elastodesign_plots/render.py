"""Render run artifacts into the standard three-panel figure.

Inputs are the plain-text artifacts of a design run: the optimization trace
(`iteration,phase,p_1..p_K,phi_A`) and the boundary outline (`t,x,y`).  The
design panel puts one marker per activation on the outline, the progress
panel plots each activation's arclength against the trace iteration, and the
objective panel plots the target value.  Colors follow the counter-clockwise
order of the final activation positions.  Rendering is deterministic: fixed
style, no timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "ArtifactError",
    "FigureSpec",
    "Trace",
    "Outline",
    "parse_trace",
    "parse_outline",
    "design_markers",
    "render",
]

PANELS = ("design", "progress", "objective", "all")

_COLORS = plt.get_cmap("tab10").colors


class ArtifactError(ValueError):
    """Raised when an artifact file does not parse; names the offending line."""


@dataclass(frozen=True)
class FigureSpec:
    trace: Path
    outline: Path
    out: Path
    panel: str = "all"

    def __post_init__(self):
        if self.panel not in PANELS:
            raise ArtifactError(f"unknown panel {self.panel!r}; choose from {PANELS}")


@dataclass
class Trace:
    iterations: np.ndarray  # (n,)
    phases: list[str]
    positions: np.ndarray  # (n, K), nan where an activation is absent
    values: np.ndarray  # (n,)

    @property
    def activation_count(self) -> int:
        return self.positions.shape[1]

    @property
    def final_design(self) -> np.ndarray:
        last = self.positions[-1]
        return last[~np.isnan(last)]


@dataclass
class Outline:
    t: np.ndarray
    points: np.ndarray  # (n, 2)

    @property
    def circumference(self) -> float:
        # samples are uniform on [0, L); the spacing extends to the wrap
        return float(self.t[-1] + (self.t[1] - self.t[0]))


def _fail(path, lineno, message):
    raise ArtifactError(f"{path}: line {lineno}: {message}")


def parse_trace(path) -> Trace:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        _fail(path, 1, "empty trace file")
    header = lines[0].split(",")
    k = len(header) - 3
    if k < 1 or header[:2] != ["iteration", "phase"] or header[-1] != "phi_A":
        _fail(path, 1, f"unexpected header {lines[0]!r}")

    iterations, phases, positions, values = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            _fail(path, lineno, f"expected {len(header)} columns, found {len(cells)}")
        try:
            iterations.append(int(cells[0]))
            positions.append([float(c) for c in cells[2:-1]])
            values.append(float(cells[-1]))
        except ValueError as exc:
            _fail(path, lineno, str(exc))
        phases.append(cells[1])
    if not iterations:
        _fail(path, 2, "trace contains no records")
    return Trace(
        iterations=np.array(iterations),
        phases=phases,
        positions=np.array(positions),
        values=np.array(values),
    )


def parse_outline(path) -> Outline:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "t,x,y":
        _fail(path, 1, "expected header 't,x,y'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 3:
            _fail(path, lineno, f"expected 3 columns, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            _fail(path, lineno, str(exc))
    if len(rows) < 2:
        _fail(path, len(lines), "outline needs at least two samples")
    data = np.array(rows)
    if np.any(np.diff(data[:, 0]) <= 0):
        _fail(path, 1, "outline t column must be strictly increasing")
    return Outline(t=data[:, 0], points=data[:, 1:])


def design_markers(trace: Trace, outline: Outline) -> np.ndarray:
    """Boundary points of the final activations, interpolated on the outline."""
    L = outline.circumference
    ts = np.mod(trace.final_design, L)
    # closed interpolation table: wrap the first sample to t = L
    tt = np.append(outline.t, L)
    xx = np.append(outline.points[:, 0], outline.points[0, 0])
    yy = np.append(outline.points[:, 1], outline.points[0, 1])
    return np.column_stack([np.interp(ts, tt, xx), np.interp(ts, tt, yy)])


def _activation_colors(trace: Trace) -> list:
    """One color per activation, assigned in CCW order of final position."""
    ranks = np.argsort(np.argsort(trace.final_design))
    return [_COLORS[r % len(_COLORS)] for r in ranks]


def _draw_design(ax, trace: Trace, outline: Outline):
    closed = np.vstack([outline.points, outline.points[:1]])
    ax.plot(closed[:, 0], closed[:, 1], color="0.3", lw=1.0)
    markers = design_markers(trace, outline)
    for (x, y), color in zip(markers, _activation_colors(trace)):
        ax.plot([x], [y], marker="o", ms=9, color=color, mec="black", mew=0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("optimized design")


def _draw_progress(ax, trace: Trace):
    colors = _activation_colors(trace)
    for k in range(trace.activation_count):
        series = trace.positions[:, k]
        mask = ~np.isnan(series)
        if not np.any(mask):
            continue
        ax.plot(
            trace.iterations[mask],
            series[mask],
            marker=".",
            ms=4,
            lw=1.0,
            color=colors[k] if k < len(colors) else "0.5",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("arclength position")
    ax.set_title("search progress")


def _draw_objective(ax, trace: Trace):
    ax.plot(trace.iterations, trace.values, color="black", lw=1.2, marker=".", ms=4)
    ax.set_xlabel("iteration")
    ax.set_ylabel("target value")
    ax.set_title("objective evolution")


def render(spec: FigureSpec) -> Path:
    """Write the requested panel(s) as an image; returns the output path."""
    trace = parse_trace(spec.trace)
    outline = parse_outline(spec.outline)

    if spec.panel == "all":
        fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.2))
        _draw_design(axes[0], trace, outline)
        _draw_progress(axes[1], trace)
        _draw_objective(axes[2], trace)
    else:
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        if spec.panel == "design":
            _draw_design(ax, trace, outline)
        elif spec.panel == "progress":
            _draw_progress(ax, trace)
        else:
            _draw_objective(ax, trace)
    fig.tight_layout()
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
