"""File renderers: PGM previews and matplotlib figures."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .phantoms import ScalarGrid  # noqa: E402


def write_pgm(grid: ScalarGrid, path):
    """Plain (P2) 8-bit PGM, min-max normalized per image.

    Rows run top-to-bottom in increasing z so the slab entrance face is the
    first raster line.
    """
    v = grid.values
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi > lo:
        pix = np.rint(255.0 * (v - lo) / (hi - lo)).astype(int)
    else:
        pix = np.zeros_like(v, dtype=int)
    lines = ["P2", f"# {grid.y_min} {grid.y_max} {grid.z_min} {grid.z_max}",
             f"{grid.ny} {grid.nz}", "255"]
    for row in pix:
        lines.append(" ".join(str(p) for p in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_heatmap(grid: ScalarGrid, path, title: str | None = None):
    """Grayscale heatmap of a grid with physical axes."""
    fig, ax = plt.subplots(figsize=(6, 2.4))
    im = ax.imshow(grid.values, origin="lower", cmap="gray", aspect="equal",
                   extent=(grid.y_min, grid.y_max, grid.z_min, grid.z_max))
    ax.set_xlabel("y")
    ax.set_ylabel("z")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_profiles(profiles: dict, path, title: str | None = None):
    """Overlayed model/reconstruction cross sections, one panel per axis."""
    fig, axes = plt.subplots(1, len(profiles), figsize=(5 * len(profiles), 3.2))
    if len(profiles) == 1:
        axes = [axes]
    for ax, (axis, (coords, mvals, rvals)) in zip(axes, sorted(profiles.items())):
        ax.plot(coords, mvals, "k--", label="model")
        ax.plot(coords, rvals, "r.", ms=3, label="reconstruction")
        ax.set_xlabel(axis)
        ax.legend(loc="best", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
