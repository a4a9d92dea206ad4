import math

import numpy as np
import pytest
from scipy.integrate import quad

from brokenray import (BrokenRay, DomainError, Inhomogeneity, MediumModel,
                       SlabGeometry, broken_ray_integral, differential,
                       eval_mu, load_data, mu_t_ray_integral_analytic,
                       preset_phantom, save_data, segment_lengths,
                       simulate_full, simulate_uniform, subtract_background)
from brokenray.forward import _segments

GEOM = SlabGeometry()


def test_constant_field_integral():
    m = MediumModel(0.6, 0.4)
    for d in (0.0, 0.31, GEOM.delta_max):
        L1, L2 = segment_lengths(d, GEOM)
        got = broken_ray_integral(lambda y, z: eval_mu(m, "t", y, z),
                                  BrokenRay(0.7, d), GEOM, quad_step=0.01)
        assert got == pytest.approx(m.bar_mu_t * (L1 + L2), rel=1e-12)


def test_zero_field_integral():
    assert broken_ray_integral(lambda y, z: np.zeros_like(np.asarray(y)),
                               BrokenRay(0.0, 0.5), GEOM, quad_step=0.02) == 0.0


def test_gaussian_integral_against_scipy_quad():
    # independent oracle: adaptive quadrature along each segment
    lump = Inhomogeneity("gaussian", y0=1.2, z0=0.4, amplitude=1.7, sigma=0.21)
    m = MediumModel(0.8, 0.2, absorbers=(lump,))
    ray = BrokenRay(0.9, 0.55)
    for family in ("a", "b"):
        expected = 0.0
        for (p, u, length) in _segments(ray.w, ray.delta, GEOM, family):
            if length <= 0:
                continue
            expected += quad(
                lambda s: float(eval_mu(m, "t", p[0] + s * u[0], p[1] + s * u[1])),
                0.0, length, epsabs=1e-13, epsrel=1e-13)[0]
        analytic = mu_t_ray_integral_analytic(m, ray, GEOM, family=family)
        simpson = broken_ray_integral(lambda y, z: eval_mu(m, "t", y, z),
                                      ray, GEOM, quad_step=lump.sigma / 32,
                                      family=family)
        assert analytic == pytest.approx(expected, rel=1e-12)
        assert simpson == pytest.approx(expected, rel=1e-9)


def test_square_clip_against_quadrature():
    # quadrature converges to the exact clip value (first order at the jumps)
    m = preset_phantom("fig2")
    ray = BrokenRay(0.85, 0.42)
    analytic = mu_t_ray_integral_analytic(m, ray, GEOM)
    amp = m.absorbers[0].amplitude
    for step in (4e-4, 1e-4, 2.5e-5):
        err = abs(broken_ray_integral(lambda y, z: eval_mu(m, "t", y, z),
                                      ray, GEOM, quad_step=step) - analytic)
        assert err < 0.5 * step * amp  # first order at the discontinuities


def test_simulate_uniform_constant_medium():
    m = MediumModel(0.5, 0.5)
    data = simulate_uniform(m, GEOM, 16)
    L1, L2 = segment_lengths(data.delta_nodes, GEOM)
    expected = m.bar_mu_t * (L1 + L2)
    assert np.allclose(data.values, expected[None, :], rtol=1e-12)
    assert np.ptp(data.values, axis=0).max() < 1e-12  # independent of w


def test_simulate_uniform_ray_missing_square():
    m = preset_phantom("fig2")
    data = simulate_uniform(m, GEOM, 40)
    # rays from the far right never touch the square support y in [.75, 1.25]
    j = np.searchsorted(data.w_nodes, 2.0)
    L1, L2 = segment_lengths(data.delta_nodes, GEOM)
    assert np.allclose(data.values[j:, :], (m.bar_mu_t * (L1 + L2))[None, :],
                       rtol=1e-13)


def test_simulate_engines_agree_on_gaussian():
    m = preset_phantom("fig3-21h", h=1.0 / 24)
    fast = simulate_uniform(m, GEOM, 24)
    slow = simulate_uniform(m, GEOM, 24, engine="quad",
                            quad_step=m.absorbers[0].sigma / 24)
    assert np.max(np.abs(fast.values - slow.values)) < 1e-7


def test_simulate_uniform_rejects_scatterers():
    m = preset_phantom("fig5", h=1.0 / 120)
    with pytest.raises(DomainError):
        simulate_uniform(m, GEOM, 8)


def test_simulate_full_uniform_medium_has_no_log_term():
    m = MediumModel(2.4, 0.24)
    data = simulate_full(m, GEOM, "a", 12)
    L1, L2 = segment_lengths(data.delta_nodes, GEOM)
    assert np.allclose(data.values, (m.bar_mu_t * (L1 + L2))[None, :], rtol=1e-12)


def test_simulate_full_log_term_at_vertex():
    # scatterer peak 2 bar at a vertex: phi = int mu_t - ln 2 on that ray
    N = 10
    d = 4 * GEOM.delta_max / N
    L1, _ = segment_lengths(d, GEOM)
    w0 = 1.3
    lump = Inhomogeneity("gaussian", y0=w0, z0=L1, amplitude=2.4, sigma=0.15)
    m = MediumModel(2.4, 0.24, scatterers=(lump,))
    data = simulate_full(m, GEOM, "a", N)
    j = int(round((w0 - data.w_min) / data.h))
    assert data.w_nodes[j] == pytest.approx(w0, abs=1e-12)
    ray_int = mu_t_ray_integral_analytic(m, BrokenRay(w0, d), GEOM)
    assert data.values[j, 4] == pytest.approx(ray_int - math.log(2.0), rel=1e-12)


def test_simulate_full_rejects_nonpositive_scattering():
    lump = Inhomogeneity("gaussian", y0=1.0, z0=0.5, amplitude=-2.5, sigma=0.2)
    m = MediumModel(2.4, 0.24, scatterers=(lump,))
    with pytest.raises(DomainError):
        simulate_full(m, GEOM, "a", 8)


def test_differential_identical_is_zero():
    m = preset_phantom("fig7", h=1.0 / 24)
    a = simulate_full(m, GEOM, "a", 24)
    d = differential(a, a)
    assert np.all(d.values == 0.0)
    assert d.kind == "differential"


def test_differential_uniform_mu_t_cancels():
    # scattering lump compensated in absorption: mu_t uniform, psi_d == 0
    scat = Inhomogeneity("gaussian", y0=2.0, z0=0.5, amplitude=2.4, sigma=0.2)
    comp = Inhomogeneity("gaussian", y0=2.0, z0=0.5, amplitude=-2.4, sigma=0.2)
    m = MediumModel(2.4, 2.4, absorbers=(comp,), scatterers=(scat,))
    d = differential(simulate_full(m, GEOM, "a", 16), simulate_full(m, GEOM, "b", 16))
    assert np.max(np.abs(d.values)) < 1e-12


def test_differential_matches_two_ray_quadrature():
    # log terms cancel, leaving the mu_t integral difference of the families
    m = preset_phantom("fig7", h=1.0 / 24)
    N = 24
    d = differential(simulate_full(m, GEOM, "a", N), simulate_full(m, GEOM, "b", N))
    rng = np.random.default_rng(11)
    for _ in range(12):
        j = rng.integers(0, d.n_w)
        n = rng.integers(0, N + 1)
        ray = BrokenRay(float(d.w_nodes[j]), float(d.delta_nodes[n]))
        expected = (mu_t_ray_integral_analytic(m, ray, GEOM, "a")
                    - mu_t_ray_integral_analytic(m, ray, GEOM, "b"))
        assert d.values[j, n] == pytest.approx(expected, abs=1e-12)


def test_shift_covariance():
    h = 1.0 / 24
    m1 = preset_phantom("fig3-21h", h=h)
    lump = m1.absorbers[0]
    shift = 6 * h
    m2 = MediumModel(m1.bar_mu_s, m1.bar_mu_a, absorbers=(
        Inhomogeneity("gaussian", y0=lump.y0 + shift, z0=lump.z0,
                      amplitude=lump.amplitude, sigma=lump.sigma),))
    d1 = simulate_uniform(m1, GEOM, 24)
    d2 = simulate_uniform(m2, GEOM, 24)
    assert np.allclose(d2.values[6:, :], d1.values[:-6, :], rtol=0, atol=1e-12)


def test_background_estimate_and_subtraction():
    m = preset_phantom("fig3-9h", h=1.0 / 40)
    data = simulate_uniform(m, GEOM, 40)
    fluct, bar = subtract_background(data)
    assert bar == pytest.approx(m.bar_mu_t, rel=1e-10)
    assert np.max(np.abs(fluct.values[0])) < 1e-10  # compact support on the left


def test_data_file_round_trip(tmp_path):
    m = preset_phantom("fig3-21h", h=1.0 / 16)
    data = simulate_uniform(m, GEOM, 16)
    path = tmp_path / "psi.dat"
    save_data(data, path)
    back = load_data(path)
    assert back.kind == data.kind
    assert back.n_delta == data.n_delta
    assert back.w_min == pytest.approx(data.w_min, abs=1e-15)
    assert np.allclose(back.values, data.values, rtol=0, atol=1e-16)


def test_data_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.dat"
    path.write_text("NOT-A-HEADER 1 2 3\n")
    with pytest.raises(DomainError):
        load_data(path)
