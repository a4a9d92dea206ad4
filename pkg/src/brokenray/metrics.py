"""Quantitative comparison of reconstructions against model fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError
from .phantoms import ScalarGrid


def _cell_weights(nz: int, ny: int) -> np.ndarray:
    """Trapezoidal cell weights: interior 1, edges 1/2, corners 1/4.

    With these, sum(weights) * hy * hz equals the rectangle area exactly.
    """
    wy = np.ones(ny)
    wy[0] = wy[-1] = 0.5
    wz = np.ones(nz)
    wz[0] = wz[-1] = 0.5
    return np.outer(wz, wy)


@dataclass
class Discrepancy:
    """Error measures between a model grid and a reconstruction."""

    l2: float
    max_rel: float
    artifact_support: float
    profiles: dict = field(default_factory=dict)

    def summary(self) -> str:
        return (f"l2={self.l2:.6e} max_rel={self.max_rel:.6e} "
                f"artifact_support={self.artifact_support:.6e}")


def cross_section(grid: ScalarGrid, axis: str, through) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-row/column 1-D profile through a point.

    axis "y" varies y at the z closest to the point; axis "z" the converse.
    Returns (coordinates, values).
    """
    y0, z0 = through
    if not (grid.y_min - 1e-9 <= y0 <= grid.y_max + 1e-9
            and grid.z_min - 1e-9 <= z0 <= grid.z_max + 1e-9):
        raise DomainError("cross_section point lies outside the grid")
    if axis == "y":
        i = int(round((z0 - grid.z_min) / (grid.z_max - grid.z_min) * (grid.nz - 1)))
        return grid.y_nodes, grid.values[i, :].copy()
    if axis == "z":
        j = int(round((y0 - grid.y_min) / (grid.y_max - grid.y_min) * (grid.ny - 1)))
        return grid.z_nodes, grid.values[:, j].copy()
    raise DomainError(f"axis must be 'y' or 'z', got {axis!r}")


def compare(model: ScalarGrid, recon: ScalarGrid, threshold: float = 0.02) -> Discrepancy:
    """Cell-area-weighted L2 norm, max relative error and artifact support.

    artifact_support is the area where |model - recon| exceeds threshold
    times the model maximum (2% by default).  Cross sections through the
    model maximum are attached for reporting.
    """
    if not model.congruent(recon):
        raise DomainError("compare needs congruent grids")
    xi = model.values - recon.values
    hy = (model.y_max - model.y_min) / (model.ny - 1)
    hz = (model.z_max - model.z_min) / (model.nz - 1)
    cell = hy * hz
    l2 = math.sqrt(float(np.sum(_cell_weights(model.nz, model.ny) * xi**2)) * cell)
    denom = np.abs(model.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(denom > 0, np.abs(xi) / denom,
                       np.where(np.abs(xi) > 0, np.inf, 0.0))
    max_rel = float(np.max(rel))
    support = cell * int(np.count_nonzero(np.abs(xi) > threshold * np.max(model.values)))

    i, j = np.unravel_index(int(np.argmax(model.values)), model.values.shape)
    peak = (float(model.y_nodes[j]), float(model.z_nodes[i]))
    profiles = {}
    for axis in ("y", "z"):
        coords, mvals = cross_section(model, axis, peak)
        _, rvals = cross_section(recon, axis, peak)
        profiles[axis] = (coords, mvals, rvals)
    return Discrepancy(l2, max_rel, support, profiles)


def write_profiles_csv(disc: Discrepancy, path_prefix) -> list:
    """One CSV per stored cross section: coordinate, model, reconstruction."""
    written = []
    for axis, (coords, mvals, rvals) in disc.profiles.items():
        path = f"{path_prefix}_profile_{axis}.csv"
        with open(path, "w") as fh:
            fh.write(f"{axis},model,reconstruction\n")
            for c, m, r in zip(coords, mvals, rvals):
                fh.write(f"{c:.17g},{m:.17g},{r:.17g}\n")
        written.append(path)
    return written
