"""Figure builders over the run-directory CSV contract.

A run directory holds ``cost_history.csv`` (header ``iter,cost``),
``density_t{t}.csv`` snapshots (``x,rho`` on the circle, ``x1,x2,rho``
row-major on the torus), and optionally ``target.csv`` (``x,rho_hat``).
Rendering only reads these files; identical inputs produce identical
panel counts and axis ranges.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

TWO_PI = 2.0 * math.pi

PROFILE1D = "profile1d"
HEATMAP_STRIP = "heatmap_strip"
COST_CURVE = "cost_curve"
KINDS = (PROFILE1D, HEATMAP_STRIP, COST_CURVE)

_SNAPSHOT_RE = re.compile(r"^density_t(.+)\.csv$")


class PlotDataError(Exception):
    """A required CSV artifact is missing or malformed.

    ``filename`` names the offending file so the CLI diagnostic can point
    at it directly.
    """

    def __init__(self, filename, message: str):
        self.filename = str(filename)
        super().__init__(f"{filename}: {message}")


@dataclass(frozen=True)
class FigureRequest:
    """What to render: a run directory, a figure kind, an output path."""

    run_dir: Path
    kind: str
    out: Path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {', '.join(KINDS)}")


def _read_csv(path: Path, header: str) -> np.ndarray:
    if not path.is_file():
        raise PlotDataError(path, "file not found")
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise PlotDataError(path, str(exc)) from exc
    if not lines or lines[0].strip() != header:
        found = lines[0].strip() if lines else "<empty>"
        raise PlotDataError(path, f"expected header {header!r}, got {found!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1,
                          ndmin=2, dtype=float)
    except ValueError as exc:
        raise PlotDataError(path, f"unparseable rows: {exc}") from exc
    if data.shape[0] < 1 or not np.all(np.isfinite(data)):
        raise PlotDataError(path, "no finite data rows")
    return data


def _first_header(path: Path) -> str:
    if not path.is_file():
        raise PlotDataError(path, "file not found")
    with open(path) as fh:
        return fh.readline().strip()


def snapshot_files(run_dir: Path) -> list:
    """Density snapshots in the run directory, ordered by snapshot time."""
    found = []
    for path in Path(run_dir).iterdir():
        m = _SNAPSHOT_RE.match(path.name)
        if m is None:
            continue
        try:
            t = float(m.group(1))
        except ValueError as exc:
            raise PlotDataError(path, "unparseable snapshot time") from exc
        found.append((t, path))
    found.sort(key=lambda item: item[0])
    return found


def _require_snapshots(run_dir: Path) -> list:
    snaps = snapshot_files(run_dir)
    if not snaps:
        raise PlotDataError(Path(run_dir) / "density_t*.csv", "file not found")
    return snaps


def _render_profile1d(run_dir: Path):
    """Initial and final circle densities, plus the target when present."""
    snaps = _require_snapshots(run_dir)
    fig = plt.figure(figsize=(4.8, 3.2))
    ax = fig.subplots()
    curves = 0
    for t, path in (snaps[0], snaps[-1]) if len(snaps) > 1 else snaps:
        data = _read_csv(path, "x,rho")
        ax.plot(data[:, 0], data[:, 1], label=f"t = {t:g}")
        curves += 1
    target = Path(run_dir) / "target.csv"
    if target.is_file():
        data = _read_csv(target, "x,rho_hat")
        scale = data[:, 1].sum() * (TWO_PI / data.shape[0])
        ax.plot(data[:, 0], data[:, 1] / scale, linestyle="--",
                label="target")
        curves += 1
    ax.set_xlim(0.0, TWO_PI)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend()
    return fig, {"curves": curves, "panels": 1}


def _render_heatmap_strip(run_dir: Path):
    """One panel per torus snapshot, each on its own color scale."""
    snaps = _require_snapshots(run_dir)
    fig = plt.figure(figsize=(2.6 * len(snaps), 2.8))
    axes = fig.subplots(1, len(snaps), squeeze=False)[0]
    for ax, (t, path) in zip(axes, snaps):
        data = _read_csv(path, "x1,x2,rho")
        x1 = np.unique(data[:, 0])
        g1 = x1.size
        if g1 == 0 or data.shape[0] % g1 != 0:
            raise PlotDataError(path, "rows do not form a full grid")
        grid = data[:, 2].reshape(g1, data.shape[0] // g1)
        # per-panel (relative) normalization: vmin/vmax from this snapshot
        ax.imshow(grid.T, origin="lower", extent=(0.0, TWO_PI, 0.0, TWO_PI),
                  vmin=grid.min(), vmax=grid.max(), aspect="equal")
        ax.set_title(f"t = {t:g}")
        ax.set_xticks([])
        ax.set_yticks([])
    return fig, {"curves": 0, "panels": len(snaps)}


def _render_cost_curve(run_dir: Path):
    data = _read_csv(Path(run_dir) / "cost_history.csv", "iter,cost")
    fig = plt.figure(figsize=(4.2, 3.0))
    ax = fig.subplots()
    ax.plot(data[:, 0], data[:, 1], marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("terminal cost")
    ax.set_xticks(data[:, 0])
    return fig, {"curves": 1, "panels": 1, "points": int(data.shape[0])}


_RENDERERS = {
    PROFILE1D: _render_profile1d,
    HEATMAP_STRIP: _render_heatmap_strip,
    COST_CURVE: _render_cost_curve,
}


def render(req: FigureRequest) -> dict:
    """Render one figure kind from a run directory to an image file.

    Returns a summary dict with the panel/curve counts actually drawn.
    Raises :class:`PlotDataError` when a required CSV is missing or does
    not match the artifact contract.
    """
    run_dir = Path(req.run_dir)
    if not run_dir.is_dir():
        raise PlotDataError(run_dir, "run directory not found")
    fig, summary = _RENDERERS[req.kind](run_dir)
    try:
        out = Path(req.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=110, bbox_inches="tight")
    finally:
        plt.close(fig)
    summary["kind"] = req.kind
    summary["out"] = str(req.out)
    return summary
