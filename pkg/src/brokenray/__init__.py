"""Broken-ray (V-line) transform toolkit for slab media.

Forward simulation of broken-ray data functions and three analytic inversion
routes: a Fourier-space filter formula and a real-space backprojection for
media with uniform scattering, and a differential two-family route that
recovers attenuation, scattering and absorption simultaneously.
"""

from .geometry import BrokenRay, DomainError, SlabGeometry, ray_point, segment_lengths, vertex
from .phantoms import (GAUSSIAN, SQUARE, Inhomogeneity, MediumModel, ScalarGrid,
                       eval_mu, load_grid, load_phantom, preset_phantom,
                       rasterize, save_grid, save_phantom)
from .forward import (DataFunction, broken_ray_integral, differential,
                      load_data, mu_t_ray_integral_analytic, save_data,
                      simulate_full, simulate_uniform, subtract_background)
from .spectral import SpectralData, inverse_transform_k, k_grid, transform_w
from .invert_uniform import (backproject_realspace, consistency_decompose,
                             filter_H, gauge_delta_profile, invert_k_column,
                             reconstruct_uniform)
from .invert_diff import (absorption, invert_diff_fourier,
                          invert_diff_realspace, recover_scattering,
                          reconstruct_differential)
from .metrics import Discrepancy, compare, cross_section

__all__ = [
    "BrokenRay", "DomainError", "SlabGeometry", "ray_point", "segment_lengths",
    "vertex", "GAUSSIAN", "SQUARE", "Inhomogeneity", "MediumModel",
    "ScalarGrid", "eval_mu", "load_grid", "load_phantom", "preset_phantom",
    "rasterize", "save_grid", "save_phantom", "DataFunction",
    "broken_ray_integral", "differential", "load_data",
    "mu_t_ray_integral_analytic", "save_data", "simulate_full",
    "simulate_uniform", "subtract_background", "SpectralData",
    "inverse_transform_k", "k_grid",
    "transform_w", "backproject_realspace", "consistency_decompose",
    "filter_H", "gauge_delta_profile", "invert_k_column",
    "reconstruct_uniform", "absorption", "invert_diff_fourier",
    "invert_diff_realspace", "recover_scattering", "reconstruct_differential",
    "Discrepancy", "compare", "cross_section",
]
