"""Export of feasibility maps and trajectories: PGM/CSV twins plus figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .world import Grid

PGM_MAXVAL = 65535


def values_to_image(values: np.ndarray, grid: Grid) -> np.ndarray:
    """State vector -> (height, width) array in row-major state order."""
    return np.asarray(values, dtype=float).reshape(grid.height, grid.width)


def write_pgm(path, values: np.ndarray, grid: Grid) -> None:
    """Binary 16-bit PGM of probabilities in [0, 1]; bit-exact and diffable."""
    img = values_to_image(values, grid)
    scaled = np.round(np.clip(img, 0.0, 1.0) * PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n{PGM_MAXVAL}\n".encode())
        fh.write(scaled.tobytes())


def write_csv(path, values: np.ndarray, grid: Grid) -> None:
    img = values_to_image(values, grid)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in img:
            writer.writerow([repr(v) for v in row])


def save_heatmap_png(path, values: np.ndarray, grid: Grid, title: str = "",
                     obstacles=(), goals=()) -> None:
    """Render a feasibility map with obstacle hatching and goal markers."""
    img = values_to_image(values, grid)
    fig, ax = plt.subplots(figsize=(max(3, grid.width * 0.5), max(3, grid.height * 0.5)))
    im = ax.imshow(img, cmap="viridis", vmin=0.0, vmax=1.0, origin="upper")
    for s in obstacles:
        r, c = grid.coords(s)
        ax.add_patch(plt.Rectangle((c - 0.5, r - 0.5), 1, 1, fill=True,
                                   facecolor="dimgray", edgecolor="white", hatch="//"))
    for label, s in goals:
        r, c = grid.coords(s)
        ax.plot(c, r, marker="*", color="red", markersize=12)
        ax.annotate(label, (c, r), color="white", fontsize=8,
                    ha="center", va="bottom", xytext=(c, r - 0.25), textcoords="data")
    ax.set_xticks(range(grid.width))
    ax.set_yticks(range(grid.height))
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_figure(path, grid: Grid, trajectory, goals=(),
                           obstacles=(), title: str = "") -> None:
    """Plot one episode path over the grid; format follows the file suffix."""
    fig, ax = plt.subplots(figsize=(max(3, grid.width * 0.5), max(3, grid.height * 0.5)))
    ax.set_xlim(-0.5, grid.width - 0.5)
    ax.set_ylim(grid.height - 0.5, -0.5)
    ax.set_xticks(range(grid.width))
    ax.set_yticks(range(grid.height))
    ax.grid(True, alpha=0.3)
    for s in obstacles:
        r, c = grid.coords(s)
        ax.add_patch(plt.Rectangle((c - 0.5, r - 0.5), 1, 1, facecolor="dimgray"))
    rows, cols = [], []
    for _, state in trajectory:
        r, c = grid.coords(state)
        rows.append(r)
        cols.append(c)
    ax.plot(cols, rows, "-o", color="tab:red", markersize=3, linewidth=1)
    if cols:
        ax.plot(cols[0], rows[0], "s", color="tab:blue", markersize=9)
    for label, s in goals:
        r, c = grid.coords(s)
        ax.plot(c, r, marker="*", color="green", markersize=14)
        ax.annotate(label, (c, r), fontsize=8, ha="center", va="bottom")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def export_kappa_maps(out_dir, grid: Grid, schedule, goals, sol,
                      png: bool = True) -> list[Path]:
    """Write kappa_{goal}_{env}.pgm/.csv (and .png) for every goal/environment."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    goal_markers = [(g.label, g.state) for g in goals]
    for c, goal in enumerate(goals):
        for k in range(schedule.n_envs):
            values = sol.kappa[c, k]
            stem = out_dir / f"kappa_{goal.label}_{k + 1}"
            write_pgm(stem.with_suffix(".pgm"), values, grid)
            write_csv(stem.with_suffix(".csv"), values, grid)
            written.extend([stem.with_suffix(".pgm"), stem.with_suffix(".csv")])
            if png:
                save_heatmap_png(
                    stem.with_suffix(".png"), values, grid,
                    title=f"feasibility {goal.label}, environment {k + 1}",
                    obstacles=schedule.obstacles[k], goals=goal_markers,
                )
                written.append(stem.with_suffix(".png"))
    return written
