"""Forward simulation of broken-ray data functions.

The measured quantity for a ray (w, Delta) is the path integral of mu_t
along the two segments minus the log ratio mu_s(vertex)/bar_mu_s.  With
spatially-uniform scattering the log term drops and the data reduce to the
plain broken-ray transform of mu_t.  Two ray families share every vertex:
family "a" exits toward +y, family "b" is its mirror toward -y; their
difference cancels the log term and the common vertical leg.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .geometry import BrokenRay, DomainError, SlabGeometry, segment_lengths
from .phantoms import GAUSSIAN, SQUARE, MediumModel, eval_mu

SINGLE = "single"
DIFFERENTIAL = "differential"


def worker_count() -> int:
    """Worker cap for the embarrassingly parallel loops (env BRT_THREADS)."""
    env = os.environ.get("BRT_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class DataFunction:
    """Samples psi(w_j, Delta_n) on a rectangular (w, Delta) grid.

    Delta_n = h*n for n = 0..N with h = Delta_max/N exactly; w_j = w_min + h*j.
    values has shape (n_w, N+1).  kind is "single" (one ray family) or
    "differential" (family a minus family b).
    """

    kind: str
    w_min: float
    h: float
    n_delta: int              # the paper's N; N+1 delta samples
    L: float
    theta: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in (SINGLE, DIFFERENTIAL):
            raise DomainError(f"bad data kind {self.kind!r}")
        if self.values.ndim != 2 or self.values.shape[1] != self.n_delta + 1:
            raise DomainError("values must have shape (n_w, N+1)")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("data values must be finite")
        dmax = self.L * math.tan(self.theta)
        if abs(self.h * self.n_delta - dmax) > 1e-9 * max(dmax, 1.0):
            raise DomainError("grid step must satisfy h = Delta_max/N")

    @property
    def n_w(self) -> int:
        return self.values.shape[0]

    @property
    def w_nodes(self) -> np.ndarray:
        return self.w_min + self.h * np.arange(self.n_w)

    @property
    def delta_nodes(self) -> np.ndarray:
        return self.h * np.arange(self.n_delta + 1)

    @property
    def geometry(self) -> SlabGeometry:
        return SlabGeometry(L=self.L, theta=self.theta,
                            y_min=self.w_min, y_max=self.w_min + self.h * (self.n_w - 1))

    def background_profile(self, bar_mu_t: float) -> np.ndarray:
        """bar_mu_t * (L1 + L2) per Delta column (single-family data only)."""
        L1, L2 = segment_lengths(self.delta_nodes, self.geometry)
        return bar_mu_t * (L1 + L2)

    def estimate_background(self) -> float:
        """Background mu_t from the leftmost w sample, where no ray can reach
        targets inside the scan window."""
        if self.kind != SINGLE:
            return 0.0
        L1, L2 = segment_lengths(self.delta_nodes, self.geometry)
        return float(np.mean(self.values[0, :] / (L1 + L2)))


# ---------------------------------------------------------------------------
# segment descriptions

def _segments(w: float, delta: float, geom: SlabGeometry, family: str):
    """Start point, unit direction and length of the two legs of a ray."""
    if family not in ("a", "b"):
        raise DomainError(f"ray family must be 'a' or 'b', got {family!r}")
    L1, L2 = segment_lengths(delta, geom)
    sgn = 1.0 if family == "a" else -1.0
    u2 = (sgn * math.sin(geom.theta), math.cos(geom.theta))
    return (
        ((w, 0.0), (0.0, 1.0), float(L1)),
        ((w, float(L1)), u2, float(L2)),
    )


def _simpson_nodes(length: float, quad_step: float):
    """Composite-Simpson nodes and weights on [0, length]."""
    panels = max(1, math.ceil(length / quad_step))
    n = 2 * panels + 1
    s = np.linspace(0.0, length, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= length / panels / 6.0
    return s, w


def broken_ray_integral(field, ray: BrokenRay, geom: SlabGeometry,
                        quad_step: float, family: str = "a") -> float:
    """Composite-Simpson approximation of the path integral of a field.

    field is a callable field(y, z) accepting arrays.  Each segment is split
    into panels no longer than quad_step.
    """
    if not quad_step > 0:
        raise DomainError("quad_step must be positive")
    total = 0.0
    for (p, u, length) in _segments(ray.w, ray.delta, geom, family):
        if length <= 0:
            continue
        s, wts = _simpson_nodes(length, quad_step)
        total += float(np.dot(wts, field(p[0] + s * u[0], p[1] + s * u[1])))
    return total


# ---------------------------------------------------------------------------
# exact segment integrals for the built-in inhomogeneity shapes

def _gaussian_segment_integral(lump, p, u, length):
    # 2-D Gaussian restricted to a line is a 1-D Gaussian in arc length
    dy, dz = p[0] - lump.y0, p[1] - lump.z0
    b = dy * u[0] + dz * u[1]
    c2 = dy * dy + dz * dz - b * b
    sig = lump.sigma
    amp = lump.amplitude * np.exp(-c2 / sig**2) * sig * math.sqrt(math.pi) / 2.0
    return amp * (erf((length + b) / sig) - erf(b / sig))


def _square_segment_integral(lump, p, u, length):
    # slab clipping of the segment against the axis-aligned square;
    # p[0] may be an array of start ordinates (vectorized over w)
    half = 0.5 * lump.side_length
    py = np.asarray(p[0], dtype=float)
    lo = np.zeros(py.shape)
    hi = np.full(py.shape, float(length))
    for (pc, uc, c0) in ((py, u[0], lump.y0), (p[1], u[1], lump.z0)):
        if uc == 0.0:
            inside = np.abs(np.asarray(pc, float) - c0) <= half
            hi = np.where(inside, hi, lo)
            continue
        t1 = (c0 - half - pc) / uc
        t2 = (c0 + half - pc) / uc
        lo = np.maximum(lo, np.minimum(t1, t2))
        hi = np.minimum(hi, np.maximum(t1, t2))
    out = lump.amplitude * np.maximum(0.0, hi - lo)
    return out if out.shape else float(out)


def _analytic_ok(model: MediumModel) -> bool:
    return all(l.kind in (GAUSSIAN, SQUARE)
               for l in model.absorbers + model.scatterers)


def _mu_t_segment_integral_analytic(model, p, u, length):
    total = model.bar_mu_t * length
    for lump in model.absorbers + model.scatterers:
        if lump.kind == GAUSSIAN:
            total += _gaussian_segment_integral(lump, p, u, length)
        else:
            total += _square_segment_integral(lump, p, u, length)
    return total


def mu_t_ray_integral_analytic(model: MediumModel, ray: BrokenRay,
                               geom: SlabGeometry, family: str = "a") -> float:
    """Closed-form broken-ray integral of mu_t (Gaussian/square lumps only)."""
    if not _analytic_ok(model):
        raise DomainError("analytic path needs gaussian/square inhomogeneities")
    total = 0.0
    for (p, u, length) in _segments(ray.w, ray.delta, geom, family):
        if length > 0:
            total += float(_mu_t_segment_integral_analytic(model, p, u, length))
    return total


# ---------------------------------------------------------------------------
# full data-function simulation

def _w_nodes(geom: SlabGeometry, h: float, w_min: float, w_max: float):
    n_w = int(math.ceil((w_max - w_min) / h - 1e-9)) + 1
    return w_min + h * np.arange(n_w)


def _simulate_mu_t(model, geom, N, w_min, w_max, family, engine, quad_step):
    """Broken-ray transform of mu_t on the (w, Delta) grid."""
    h = geom.delta_max / N
    w = _w_nodes(geom, h, w_min, w_max)
    deltas = h * np.arange(N + 1)
    vals = np.empty((w.size, N + 1))
    if engine == "analytic":
        # vectorized over w: the segment geometry is w-independent
        for n, d in enumerate(deltas):
            col = np.zeros(w.size)
            for (p0, u, length) in _segments(0.0, d, geom, family):
                if length <= 0:
                    continue
                col += model.bar_mu_t * length
                for lump in model.absorbers + model.scatterers:
                    fn = (_gaussian_segment_integral if lump.kind == GAUSSIAN
                          else _square_segment_integral)
                    col += fn(lump, (w + p0[0], p0[1]), u, length)
            vals[:, n] = col
        return w, deltas, vals

    if quad_step is None:
        quad_step = h / 4.0

    def field(y, z):
        return eval_mu(model, "t", y, z)

    def one_column(n):
        d = deltas[n]
        col = np.zeros(w.size)
        for (p0, u, length) in _segments(0.0, d, geom, family):
            if length <= 0:
                continue
            s, wts = _simpson_nodes(length, quad_step)
            eta = p0[0] + s * u[0]
            zeta = p0[1] + s * u[1]
            # (n_w, n_quad) evaluation, then weighted reduce
            col += field(w[:, None] + eta[None, :],
                         np.broadcast_to(zeta, (w.size, s.size))) @ wts
        vals[:, n] = col

    workers = min(worker_count(), N + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one_column, range(N + 1)))
    else:
        for n in range(N + 1):
            one_column(n)
    return w, deltas, vals


def _resolve_engine(model, engine):
    if engine == "auto":
        return "analytic" if _analytic_ok(model) else "quad"
    if engine not in ("analytic", "quad"):
        raise DomainError(f"unknown forward engine {engine!r}")
    return engine


def simulate_uniform(model: MediumModel, geom: SlabGeometry, N: int,
                     w_min: float | None = None, w_max: float | None = None,
                     engine: str = "auto", quad_step: float | None = None) -> DataFunction:
    """Data function for a medium with spatially-uniform scattering.

    The log term vanishes, so psi is just the broken-ray transform of mu_t
    over family "a".  Raises if the model carries scattering inhomogeneities
    (use simulate_full for those).
    """
    if model.scatterers:
        raise DomainError("simulate_uniform needs a uniform scattering "
                          "coefficient; use simulate_full instead")
    if w_min is None:
        w_min = geom.y_min - geom.delta_max
    if w_max is None:
        w_max = geom.y_max
    engine = _resolve_engine(model, engine)
    w, _, vals = _simulate_mu_t(model, geom, N, w_min, w_max, "a", engine, quad_step)
    return DataFunction(SINGLE, float(w[0]), geom.delta_max / N, N,
                        geom.L, geom.theta, vals)


def simulate_full(model: MediumModel, geom: SlabGeometry, family: str, N: int,
                  w_min: float | None = None, w_max: float | None = None,
                  engine: str = "auto", quad_step: float | None = None) -> DataFunction:
    """Full measurement phi = int mu_t dl - ln(mu_s(vertex)/bar_mu_s).

    The default w window covers sources of both families whose rays touch
    the scan window: [y_min - Delta_max, y_max + Delta_max].
    """
    if w_min is None:
        w_min = geom.y_min - geom.delta_max
    if w_max is None:
        w_max = geom.y_max + geom.delta_max
    engine = _resolve_engine(model, engine)
    w, deltas, vals = _simulate_mu_t(model, geom, N, w_min, w_max, family, engine, quad_step)
    L1 = geom.L * (1.0 - deltas / geom.delta_max)
    mu_s_vertex = eval_mu(model, "s", w[:, None], L1[None, :])
    if np.any(mu_s_vertex <= 0):
        raise DomainError("mu_s must be positive at every ray vertex")
    vals = vals - np.log(mu_s_vertex / model.bar_mu_s)
    return DataFunction(SINGLE, float(w[0]), geom.delta_max / N, N,
                        geom.L, geom.theta, vals)


def subtract_background(data: DataFunction, background: float | None = None):
    """Split single-family data into fluctuation part and background value.

    The fluctuation delta-psi = psi - bar_mu_t (L1 + L2) has compact support
    in w for compactly supported targets, which the transforms rely on.
    Returns (fluctuation DataFunction, background).
    """
    bar = data.estimate_background() if background is None else background
    vals = data.values - data.background_profile(bar)[None, :]
    return DataFunction(data.kind, data.w_min, data.h, data.n_delta,
                        data.L, data.theta, vals), bar


def differential(phi_a: DataFunction, phi_b: DataFunction) -> DataFunction:
    """Differential data phi_a - phi_b; the vertex log terms cancel exactly."""
    if phi_a.kind != SINGLE or phi_b.kind != SINGLE:
        raise DomainError("differential needs two single-family data functions")
    same = (phi_a.values.shape == phi_b.values.shape
            and phi_a.n_delta == phi_b.n_delta
            and abs(phi_a.w_min - phi_b.w_min) < 1e-9
            and abs(phi_a.h - phi_b.h) < 1e-12
            and abs(phi_a.L - phi_b.L) < 1e-12
            and abs(phi_a.theta - phi_b.theta) < 1e-12)
    if not same:
        raise DomainError("differential needs identical (w, Delta) grids")
    return DataFunction(DIFFERENTIAL, phi_a.w_min, phi_a.h, phi_a.n_delta,
                        phi_a.L, phi_a.theta, phi_a.values - phi_b.values)


# ---------------------------------------------------------------------------
# data files ("BRT-DATA v1")

def save_data(data: DataFunction, path):
    header = (f"BRT-DATA v1 {data.kind} {data.n_w} {data.n_delta} "
              f"{float(data.w_min):.17g} {float(data.h):.17g} "
              f"{float(data.L):.17g} {float(data.theta):.17g}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data.values.T:  # row-major, w fastest
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_data(path) -> DataFunction:
    with open(path) as fh:
        header = fh.readline().split()
        if header[:2] != ["BRT-DATA", "v1"]:
            raise DomainError(f"{path} is not a BRT-DATA v1 file")
        kind = header[2]
        n_w, N = int(header[3]), int(header[4])
        w_min, h, L, theta = map(float, header[5:9])
        vals = np.array(fh.read().split(), dtype=float)
    if vals.size != n_w * (N + 1):
        raise DomainError(f"{path}: expected {n_w * (N + 1)} values, found {vals.size}")
    return DataFunction(kind, w_min, h, N, L, theta, vals.reshape(N + 1, n_w).T)
