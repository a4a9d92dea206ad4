"""Inversion of differential two-family data; scattering and absorption maps.

The difference of the two data functions sharing each vertex depends only on
mu_t (the vertex log terms and the common vertical legs cancel), so mu_t can
be recovered without assuming uniform scattering.  mu_s then follows from
either family's full measurement by exponentiating the data residual, and
mu_a is the pointwise difference.
"""

from __future__ import annotations

import math

import numpy as np

from .forward import DIFFERENTIAL, SINGLE, DataFunction, _simpson_nodes, differential
from .geometry import DomainError, SlabGeometry, segment_lengths
from .phantoms import ScalarGrid
from .spectral import SpectralData, inverse_transform_k, k_grid, transform_w
from .invert_uniform import (_interp_delta, _sample_w, _z_nodes, _d_w,
                             check_support)


def _d2_delta_odd(cols: np.ndarray, h: float) -> np.ndarray:
    """Three-point second difference along Delta for odd-in-Delta data.

    Differential data are odd in Delta (swapping the families flips the
    sign), so the ghost at Delta = -h is -cols[..., 1]; the far end uses the
    shifted one-sided stencil.
    """
    out = np.empty_like(cols)
    out[..., 1:-1] = (cols[..., 2:] - 2.0 * cols[..., 1:-1] + cols[..., :-2]) / (h * h)
    out[..., 0] = -2.0 * cols[..., 0] / (h * h)
    out[..., -1] = (cols[..., -1] - 2.0 * cols[..., -2] + cols[..., -3]) / (h * h)
    return out


def first_w_moment(data_d: DataFunction) -> np.ndarray:
    """int w psi_d(w, Delta) dw per Delta column (Riemann sum).

    Differential data have zero mean in w, so their transform behaves as
    i k M1(Delta) near k = 0; the moment carries the whole DC content.
    """
    return data_d.h * (data_d.w_nodes @ data_d.values)


def invert_diff_fourier(spec_d: SpectralData, geom: SlabGeometry,
                        background: float = 0.0,
                        dc_moment: np.ndarray | None = None,
                        diagnostics: dict | None = None) -> ScalarGrid:
    """Fourier route for differential data.

    Per frequency, mu_t~(k, z) = (sin(theta)/2) (-(1/ik) d2/dDelta2 + ik)
    psi_d~ at Delta = (L-z) tan(theta).  The k = 0 prefactor is singular;
    since psi_d~ ~ i k M1(Delta) near k = 0 (with M1 the first w moment of
    the data, available as dc_moment), the column limit is
    -(sin(theta)/2) d2/dDelta2 M1.  Without the moment the column falls
    back to interpolation from its neighbours, which is only usable when
    the k grid resolves the data's lateral extent.
    """
    h = spec_d.h
    k = spec_d.k_values
    z_nodes = _z_nodes(geom.L, h)
    dq = (geom.L - z_nodes) * math.tan(geom.theta)
    D2 = _interp_delta(_d2_delta_odd(spec_d.values, h), h, dq)
    P = _interp_delta(spec_d.values, h, dq)
    mid = k.size // 2
    ksafe = k.copy()
    ksafe[mid] = 1.0
    mu = 0.5 * math.sin(geom.theta) * (
        -D2 / (1j * ksafe[:, None]) + 1j * k[:, None] * P)
    if dc_moment is None:
        mu[mid] = 0.5 * (mu[mid - 1] + mu[mid + 1])
    else:
        m1z = _interp_delta(_d2_delta_odd(dc_moment[None, :], h), h, dq)[0]
        mu[mid] = -0.5 * math.sin(geom.theta) * m1z

    y_min, y_max = geom.y_min, geom.y_max
    ny = int(round((y_max - y_min) / h)) + 1
    y_nodes = y_min + h * np.arange(ny)
    vals, imag_ratio = inverse_transform_k(mu, k, y_nodes)
    if diagnostics is not None:
        diagnostics["imag_ratio"] = imag_ratio
    return ScalarGrid(y_nodes[0], y_nodes[-1], z_nodes[0], z_nodes[-1],
                      vals + background)


def invert_diff_realspace(data_d: DataFunction, geom: SlabGeometry,
                          background: float = 0.0,
                          diagnostics: dict | None = None) -> ScalarGrid:
    """Real-space route for differential data.

    mu_t(y,z) = (sin(theta)/4) { d2/dDelta2 int sgn(y-w) psi_d(w,Delta) dw
    - 2 d/dy psi_d(y,Delta) } at Delta = (L-z) tan(theta), with the w
    integral by the trapezoid rule over the sampled window (sgn(0) = 0) and
    central differences elsewhere.  The background is added afterward.
    """
    if data_d.kind != DIFFERENTIAL:
        raise DomainError("invert_diff_realspace expects differential data")
    psi = data_d.values
    leak = check_support(psi)
    h = data_d.h
    N = data_d.n_delta

    # image y nodes live on the w lattice
    y_min, y_max = geom.y_min, geom.y_max
    ny = int(round((y_max - y_min) / h)) + 1
    off = (y_min - data_d.w_min) / h
    j0 = int(round(off))
    if abs(off - j0) > 1e-6 or j0 < 0 or j0 + ny > data_d.n_w:
        raise DomainError("image y nodes must lie on the sampled w lattice")

    # sgn-weighted trapezoid integral via prefix sums, per Delta column
    tau = np.ones(data_d.n_w)
    tau[0] = tau[-1] = 0.5
    P = np.cumsum(tau[:, None] * psi, axis=0)
    total = P[-1]
    jw = j0 + np.arange(ny)
    S = h * (P[jw - 1] + P[jw] - total[None, :]) if j0 >= 1 else None
    if S is None:
        # left image edge coincides with the window edge: P[-1] ghost is 0
        Pm1 = np.vstack([np.zeros_like(P[0]), P[:-1]])
        S = h * (Pm1[jw] + P[jw] - total[None, :])

    D2S = _d2_delta_odd(S, h)
    dpsi_dy = _d_w(psi, h)[jw]

    z_nodes = _z_nodes(geom.L, h)
    dq = (geom.L - z_nodes) * math.tan(geom.theta)
    rows = 0.25 * math.sin(geom.theta) * (
        _interp_delta(D2S, h, dq) - 2.0 * _interp_delta(dpsi_dy, h, dq))
    if diagnostics is not None:
        diagnostics["support_leak"] = leak
    return ScalarGrid(y_min, y_min + h * (ny - 1), z_nodes[0], z_nodes[-1],
                      rows.T + background)


# ---------------------------------------------------------------------------
# scattering and absorption recovery

def _bilinear_clamped(grid: ScalarGrid, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Bilinear samples of a grid, constant continuation outside."""
    hy = (grid.y_max - grid.y_min) / (grid.ny - 1)
    hz = (grid.z_max - grid.z_min) / (grid.nz - 1)
    ty = np.clip((Y - grid.y_min) / hy, 0.0, grid.ny - 1.0)
    tz = np.clip((Z - grid.z_min) / hz, 0.0, grid.nz - 1.0)
    jy = np.clip(np.floor(ty).astype(int), 0, grid.ny - 2)
    iz = np.clip(np.floor(tz).astype(int), 0, grid.nz - 2)
    fy = ty - jy
    fz = tz - iz
    v = grid.values
    return ((1 - fz) * ((1 - fy) * v[iz, jy] + fy * v[iz, jy + 1])
            + fz * ((1 - fy) * v[iz + 1, jy] + fy * v[iz + 1, jy + 1]))


def recover_scattering(mu_t: ScalarGrid, phi: DataFunction, geom: SlabGeometry,
                       bar_mu_s: float, family: str = "a",
                       quad_step: float | None = None,
                       diagnostics: dict | None = None) -> ScalarGrid:
    """mu_s from one family's full data and a reconstructed mu_t map.

    For the ray turning at each image node, mu_s(vertex) = bar_mu_s *
    exp(int mu_t dl - phi), with the path integral taken over the bilinear
    interpolant of the mu_t grid (constant continuation outside it).
    Exponents are clamped at +-50 with a diagnostic count.
    """
    if phi.kind != SINGLE:
        raise DomainError("recover_scattering needs single-family data")
    if quad_step is None:
        quad_step = phi.h / 2.0
    sgn = 1.0 if family == "a" else -1.0
    theta = geom.theta
    y = mu_t.y_nodes
    z = mu_t.z_nodes
    out = np.empty((z.size, y.size))
    clamped = 0
    tanth = math.tan(theta)

    dphi_cols = phi.values  # (n_w, N+1)
    for i, zi in enumerate(z):
        dq = (geom.L - zi) * tanth
        L1, L2 = segment_lengths(dq, geom)
        integral = np.zeros(y.size)
        for (p0, u, length) in (((0.0, 0.0), (0.0, 1.0), float(L1)),
                                ((0.0, float(L1)), (sgn * math.sin(theta), math.cos(theta)), float(L2))):
            if length <= 0:
                continue
            s, wts = _simpson_nodes(length, quad_step)
            Y = y[:, None] + p0[0] + s[None, :] * u[0]
            Z = np.broadcast_to(p0[1] + s * u[1], Y.shape)
            integral += _bilinear_clamped(mu_t, Y, Z) @ wts
        phi_col = _interp_delta(dphi_cols, phi.h, np.array([dq]))[:, 0]
        phi_at = _sample_w(phi_col, phi.w_min, phi.h, y)
        expo = integral - phi_at
        bad = np.abs(expo) > 50.0
        clamped += int(np.count_nonzero(bad))
        out[i] = bar_mu_s * np.exp(np.clip(expo, -50.0, 50.0))
    if diagnostics is not None:
        diagnostics["clamped_exponents"] = clamped
    return ScalarGrid(mu_t.y_min, mu_t.y_max, mu_t.z_min, mu_t.z_max, out)


def absorption(mu_t: ScalarGrid, mu_s: ScalarGrid) -> ScalarGrid:
    """mu_a = mu_t - mu_s on congruent grids."""
    if not mu_t.congruent(mu_s):
        raise DomainError("absorption needs congruent grids")
    return ScalarGrid(mu_t.y_min, mu_t.y_max, mu_t.z_min, mu_t.z_max,
                      mu_t.values - mu_s.values)


def reconstruct_differential(phi_a: DataFunction, phi_b: DataFunction,
                             geom: SlabGeometry, bar_mu_s: float,
                             background: float | None = None,
                             method: str = "realspace",
                             k_oversample: int = 2,
                             diagnostics: dict | None = None):
    """Full differential pipeline: (mu_t, mu_s, mu_a) grids from two families."""
    bar = phi_a.estimate_background() if background is None else background
    data_d = differential(phi_a, phi_b)
    if method == "realspace":
        mu_t = invert_diff_realspace(data_d, geom, background=bar,
                                     diagnostics=diagnostics)
    elif method == "fourier":
        kvals = k_grid(data_d.h, data_d.n_delta, k_oversample)
        spec_d = transform_w(data_d, k_values=kvals)
        mu_t = invert_diff_fourier(spec_d, geom, background=bar,
                                   dc_moment=first_w_moment(data_d),
                                   diagnostics=diagnostics)
    else:
        raise DomainError(f"unknown differential method {method!r}")
    mu_s = recover_scattering(mu_t, phi_a, geom, bar_mu_s,
                              diagnostics=diagnostics)
    mu_a = absorption(mu_t, mu_s)
    return mu_t, mu_s, mu_a
