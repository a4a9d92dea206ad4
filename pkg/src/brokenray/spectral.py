"""Discrete Fourier transforms in the scan coordinate w.

Conventions: forward kernel e^{+ikw} in w, inverse kernel e^{-iky} with a
1/(2pi) prefactor, both as plain Riemann sums on uniform grids.  The k grid
covers [-pi/h, pi/h] with an odd number of modes symmetric about k = 0; with
oversample = 1 it is k_m = (pi/h)(m/N - 1), m = 0..2N.  Denser k sampling
(oversample > 1) keeps the same interval and widens the period 2*pi/dk of
the inverse transform, which keeps wraparound copies out of a wide image
window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainError
from .forward import DataFunction


def k_grid(h: float, N: int, oversample: int = 1) -> np.ndarray:
    """Frequency samples (pi/h)(m/(oversample*N) - 1), m = 0..2*oversample*N."""
    if oversample < 1:
        raise DomainError("oversample must be >= 1")
    M = oversample * N
    m = np.arange(2 * M + 1)
    return (np.pi / h) * (m / M - 1.0)


@dataclass
class SpectralData:
    """Complex samples psi~(k_m, Delta_n) after the transform in w."""

    k_values: np.ndarray
    n_delta: int
    h: float
    L: float
    theta: float
    values: np.ndarray        # shape (modes, N+1), complex

    def __post_init__(self):
        self.k_values = np.asarray(self.k_values, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        mid = self.k_values.size // 2
        sym = self.k_values + self.k_values[::-1]
        if self.k_values.size % 2 != 1 or abs(self.k_values[mid]) > 1e-12 \
                or np.max(np.abs(sym)) > 1e-9 * np.max(np.abs(self.k_values)):
            raise DomainError("k grid must be symmetric about 0 with k=0 included")
        if self.values.shape != (self.k_values.size, self.n_delta + 1):
            raise DomainError("values must have shape (modes, N+1)")

    @property
    def modes(self) -> int:
        return self.k_values.size

    @property
    def delta_nodes(self) -> np.ndarray:
        return self.h * np.arange(self.n_delta + 1)


def transform_w(data: DataFunction, oversample: int = 1,
                k_values: np.ndarray | None = None) -> SpectralData:
    """Riemann-sum Fourier transform in w of (background-subtracted) data.

    psi~(k, Delta) = h * sum_j psi(w_j, Delta) e^{i k w_j}.  The input must
    decay inside the sampled w window for the sum to approximate the
    continuous transform.
    """
    if k_values is None:
        k_values = k_grid(data.h, data.n_delta, oversample)
    kernel = np.exp(1j * np.outer(k_values, data.w_nodes))
    vals = data.h * (kernel @ data.values)
    return SpectralData(k_values, data.n_delta, data.h, data.L, data.theta, vals)


def inverse_transform_k(values: np.ndarray, k_values: np.ndarray,
                        y_nodes: np.ndarray):
    """Inverse transform onto y nodes; returns (real_part, imag_residue_ratio).

    values has shape (modes, nz); output shape (nz, ny), with
    f(y, z_i) = (dk / 2pi) * sum_m values[m, i] e^{-i k_m y}.
    The imaginary residue is discarded after recording its magnitude
    relative to the real part.
    """
    k_values = np.asarray(k_values, dtype=float)
    dk = k_values[1] - k_values[0]
    kernel = np.exp(-1j * np.outer(np.asarray(y_nodes, float), k_values))
    out = (dk / (2.0 * np.pi)) * (kernel @ np.asarray(values, complex))  # (ny, nz)
    out = out.T
    scale = np.max(np.abs(out.real))
    ratio = float(np.max(np.abs(out.imag)) / scale) if scale > 0 else 0.0
    return np.ascontiguousarray(out.real), ratio
