"""Medium models: constant backgrounds plus square / Gaussian inhomogeneities.

The optical coefficients are mu_t = mu_s + mu_a with each split into a
constant background and a sum of localized fluctuations.  Absorbing
inhomogeneities perturb mu_a, scattering ones mu_s; mu_t picks up both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError

SQUARE = "square"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Inhomogeneity:
    """One localized perturbation of an optical coefficient.

    kind is "square" (sharp-walled, side_length wide, boundary included) or
    "gaussian" (amplitude * exp(-r^2 / sigma^2), note: no factor 2 in the
    exponent).  amplitude is the peak value added to the background.
    """

    kind: str
    y0: float
    z0: float
    amplitude: float
    side_length: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in (SQUARE, GAUSSIAN):
            raise DomainError(f"unknown inhomogeneity kind {self.kind!r}")
        if self.kind == SQUARE and not self.side_length > 0:
            raise DomainError("square needs side_length > 0")
        if self.kind == GAUSSIAN and not self.sigma > 0:
            raise DomainError("gaussian needs sigma > 0")
        if not math.isfinite(self.amplitude):
            raise DomainError("amplitude must be finite")

    def __call__(self, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == GAUSSIAN:
            r2 = (y - self.y0) ** 2 + (z - self.z0) ** 2
            return self.amplitude * np.exp(-r2 / self.sigma**2)
        half = 0.5 * self.side_length
        inside = (np.abs(y - self.y0) <= half) & (np.abs(z - self.z0) <= half)
        return self.amplitude * inside.astype(float)


@dataclass(frozen=True)
class MediumModel:
    """Backgrounds plus lists of absorptive / scattering inhomogeneities."""

    bar_mu_s: float
    bar_mu_a: float
    absorbers: tuple = field(default_factory=tuple)
    scatterers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "absorbers", tuple(self.absorbers))
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    @property
    def bar_mu_t(self) -> float:
        return self.bar_mu_s + self.bar_mu_a


def eval_mu(model: MediumModel, which: str, y, z):
    """Evaluate mu_t, mu_s or mu_a at (y, z); accepts arrays.

    mu_t is computed as mu_s + mu_a so the decomposition identity holds to
    machine precision at every point.
    """
    if which == "t":
        return eval_mu(model, "s", y, z) + eval_mu(model, "a", y, z)
    if which == "s":
        bar, lumps = model.bar_mu_s, model.scatterers
    elif which == "a":
        bar, lumps = model.bar_mu_a, model.absorbers
    else:
        raise DomainError(f"which must be 't', 's' or 'a', got {which!r}")
    out = np.full(np.broadcast(np.asarray(y, float), np.asarray(z, float)).shape, bar)
    for lump in lumps:
        out = out + lump(y, z)
    return out if out.shape else float(out)


@dataclass
class ScalarGrid:
    """A scalar field sampled on a rectangular (y, z) grid.

    values has shape (nz, ny); values[i, j] is the sample at
    (y_min + j*hy, z_min + i*hz).  Stored row-major with y fastest, which is
    also the on-disk order.
    """

    y_min: float
    y_max: float
    z_min: float
    z_max: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 2 or self.values.shape[1] < 2:
            raise DomainError("grid needs at least 2x2 samples")
        if not (self.y_min < self.y_max and self.z_min < self.z_max):
            raise DomainError("grid extents must be ordered")

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def nz(self) -> int:
        return self.values.shape[0]

    @property
    def y_nodes(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def z_nodes(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.nz)

    def congruent(self, other: "ScalarGrid") -> bool:
        return self.values.shape == other.values.shape and all(
            math.isclose(a, b, rel_tol=0, abs_tol=1e-9)
            for a, b in (
                (self.y_min, other.y_min),
                (self.y_max, other.y_max),
                (self.z_min, other.z_min),
                (self.z_max, other.z_max),
            )
        )


def rasterize(model: MediumModel, which: str, y_min: float, y_max: float,
              z_min: float, z_max: float, step: float) -> ScalarGrid:
    """Sample a coefficient field at the nodes of a vertex-aligned grid.

    Nodes sit at y_min + j*step, z_min + i*step inclusive of both edges, so
    that for tan(theta) = 1 they line up with the Delta sampling.
    """
    if not step > 0:
        raise DomainError("grid step must be positive")
    ny = int(round((y_max - y_min) / step)) + 1
    nz = int(round((z_max - z_min) / step)) + 1
    y = y_min + step * np.arange(ny)
    z = z_min + step * np.arange(nz)
    vals = eval_mu(model, which, y[None, :], z[:, None])
    return ScalarGrid(y_min, y_min + step * (ny - 1),
                      z_min, z_min + step * (nz - 1), vals)


# ---------------------------------------------------------------------------
# phantom description files (key=value text, read by the CLI)

def save_phantom(model: MediumModel, path):
    lines = [f"mu_s = {float(model.bar_mu_s):.17g}",
             f"mu_a = {float(model.bar_mu_a):.17g}"]
    for role, lumps in (("absorber", model.absorbers), ("scatterer", model.scatterers)):
        for lump in lumps:
            size = (f"side={float(lump.side_length):.17g}" if lump.kind == SQUARE
                    else f"sigma={float(lump.sigma):.17g}")
            lines.append(
                f"{role} = {lump.kind} y0={float(lump.y0):.17g} "
                f"z0={float(lump.z0):.17g} {size} "
                f"amplitude={float(lump.amplitude):.17g}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_phantom(path) -> MediumModel:
    bar = {"mu_s": None, "mu_a": None}
    absorbers, scatterers = [], []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, rest = line.partition("=")
            key = key.strip()
            rest = rest.strip()
            if key in bar:
                bar[key] = float(rest)
            elif key in ("absorber", "scatterer"):
                parts = rest.split()
                kind = parts[0].lower()
                kw = {}
                for p in parts[1:]:
                    k, _, v = p.partition("=")
                    kw[k.strip()] = float(v)
                lump = Inhomogeneity(
                    kind, y0=kw["y0"], z0=kw["z0"], amplitude=kw["amplitude"],
                    side_length=kw.get("side", 0.0), sigma=kw.get("sigma", 0.0),
                )
                (absorbers if key == "absorber" else scatterers).append(lump)
            else:
                raise DomainError(f"unknown phantom key {key!r} in {path}")
    if bar["mu_s"] is None or bar["mu_a"] is None:
        raise DomainError(f"phantom file {path} must set mu_s and mu_a")
    return MediumModel(bar["mu_s"], bar["mu_a"],
                       absorbers=tuple(absorbers), scatterers=tuple(scatterers))


# ---------------------------------------------------------------------------
# presets matching the published test cases

def preset_phantom(name: str, L: float = 1.0, h: float = 1.0 / 120.0) -> MediumModel:
    """Named phantom presets; Gaussian widths are multiples of the grid step h.

    fig2: sharp square absorber, amplitude equal to the background mu_t.
    fig3[-9h|-15h|-21h|-30h]: Gaussian absorber centered in the image window.
    fig5[-21h|-9h|-3h]: weak absorber + strong scatterer Gaussian pair.
    fig7: same pair with equal absorber/scatterer strength.
    """

    def cells(default):
        if "-" in name:
            tag = name.split("-", 1)[1]
            if not tag.endswith("h"):
                raise DomainError(f"bad preset width suffix in {name!r}")
            return int(tag[:-1])
        return default

    base = name.split("-", 1)[0]
    if base == "fig2":
        lump = Inhomogeneity(SQUARE, y0=L, z0=0.5 * L, amplitude=1.0, side_length=0.5 * L)
        return MediumModel(0.5, 0.5, absorbers=(lump,))
    if base == "fig3":
        sigma = cells(30) * h
        lump = Inhomogeneity(GAUSSIAN, y0=1.5 * L, z0=0.5 * L, amplitude=1.0, sigma=sigma)
        return MediumModel(0.5, 0.5, absorbers=(lump,))
    if base in ("fig5", "fig7"):
        sigma = cells(21) * h
        bar_s = 2.4 / L
        bar_a = (2.4 if base == "fig7" else 0.24) / L
        # scatterer at 2.125L per the published cross sections (the text's
        # 3.125L would fall outside the imaging window)
        scat = Inhomogeneity(GAUSSIAN, y0=2.125 * L, z0=0.5 * L, amplitude=bar_s, sigma=sigma)
        absb = Inhomogeneity(GAUSSIAN, y0=0.875 * L, z0=0.5 * L, amplitude=bar_a, sigma=sigma)
        return MediumModel(bar_s, bar_a, absorbers=(absb,), scatterers=(scat,))
    raise DomainError(f"unknown preset {name!r}")


PRESET_NAMES = ("fig2", "fig3", "fig3-9h", "fig3-15h", "fig3-21h", "fig3-30h",
                "fig5", "fig5-9h", "fig5-3h", "fig7", "fig7-9h", "fig7-3h")


# ---------------------------------------------------------------------------
# grid files ("BRT-GRID v1")

def save_grid(grid: ScalarGrid, path):
    header = (f"BRT-GRID v1 {grid.ny} {grid.nz} "
              f"{float(grid.y_min):.17g} {float(grid.y_max):.17g} "
              f"{float(grid.z_min):.17g} {float(grid.z_max):.17g}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in grid.values:  # row-major, y fastest
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_grid(path) -> ScalarGrid:
    with open(path) as fh:
        header = fh.readline().split()
        if header[:2] != ["BRT-GRID", "v1"]:
            raise DomainError(f"{path} is not a BRT-GRID v1 file")
        ny, nz = int(header[2]), int(header[3])
        y_min, y_max, z_min, z_max = map(float, header[4:8])
        vals = np.array(fh.read().split(), dtype=float)
    if vals.size != ny * nz:
        raise DomainError(f"{path}: expected {ny * nz} values, found {vals.size}")
    return ScalarGrid(y_min, y_max, z_min, z_max, vals.reshape(nz, ny))
