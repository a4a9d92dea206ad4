"""Broken-ray geometry in a slab.

A broken ray enters the slab 0 < z < L at normal incidence from the source
plane z = 0, runs straight down to its turning point, and leaves at angle
theta toward the detector plane z = L.  The ray family is indexed by the
transverse source-detector separation Delta in [0, Delta_max], with
Delta_max = L*tan(theta).  The ray shape (eta, zeta as functions of arc
length) depends on Delta only, never on the source position w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


@dataclass(frozen=True)
class SlabGeometry:
    """Slab depth, detection angle and the scan window on the Y axis.

    All lengths are in the caller's units (default slab depth 1).  The
    detection angle is restricted to (0, pi/2): that is the ray family the
    inversion formulas are derived for.
    """

    L: float = 1.0
    theta: float = math.pi / 4
    y_min: float = 0.0
    y_max: float = 3.0

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"slab depth must be positive, got {self.L}")
        if not 0 < self.theta < math.pi / 2:
            raise DomainError(f"theta must lie in (0, pi/2), got {self.theta}")
        if not self.y_min < self.y_max:
            raise DomainError("scan window must satisfy y_min < y_max")

    @property
    def delta_max(self) -> float:
        # recomputed, never stored: Delta_max = L tan(theta)
        return self.L * math.tan(self.theta)


@dataclass(frozen=True)
class BrokenRay:
    """One broken ray: source at y1 = w, detector at y2 = w + delta."""

    w: float
    delta: float


def _check_delta(delta, geom: SlabGeometry) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    dmax = geom.delta_max
    tol = 1e-12 * max(dmax, 1.0)
    if np.any(delta < -tol) or np.any(delta > dmax + tol):
        raise DomainError(f"delta must lie in [0, {dmax}]")
    return np.clip(delta, 0.0, dmax)


def segment_lengths(delta, geom: SlabGeometry):
    """Lengths (L1, L2) of the incoming and outgoing segments of a ray.

    L1 = L (1 - Delta/Delta_max) is the vertical leg, L2 = Delta/sin(theta)
    the oblique one.  Accepts scalars or arrays of delta.
    """
    delta = _check_delta(delta, geom)
    dmax = geom.delta_max
    L1 = geom.L * (1.0 - delta / dmax)
    L2 = (delta / dmax) * math.hypot(geom.L, dmax)
    return L1, L2


def ray_point(delta, ell, geom: SlabGeometry):
    """Ray-shape map (eta, zeta) at arc length ell along the ray.

    The first segment (ell < L1) runs straight down; past the vertex the ray
    tilts by theta.  The absolute position is (w + eta, zeta); eta and zeta
    do not depend on w.
    """
    delta = _check_delta(delta, geom)
    L1, L2 = segment_lengths(delta, geom)
    ell = np.asarray(ell, dtype=float)
    total = L1 + L2
    tol = 1e-12 * max(geom.L, 1.0)
    if np.any(ell < -tol) or np.any(ell > total + tol):
        raise DomainError("arc length outside the ray")
    ell = np.clip(ell, 0.0, total)
    s = np.maximum(ell - L1, 0.0)  # arc run past the vertex
    eta = s * math.sin(geom.theta)
    zeta = np.minimum(ell, L1) + s * math.cos(geom.theta)
    return eta, zeta


def vertex(ray: BrokenRay, geom: SlabGeometry):
    """Turning point (y, z) of a ray: y = w, z = L1(delta)."""
    L1, _ = segment_lengths(ray.delta, geom)
    return ray.w, float(L1)
