import math

import numpy as np
import pytest

from brokenray import (DomainError, Inhomogeneity, MediumModel, eval_mu,
                       load_grid, load_phantom, preset_phantom, rasterize,
                       save_grid, save_phantom)


def square_model():
    lump = Inhomogeneity("square", y0=1.0, z0=0.5, amplitude=1.0, side_length=0.5)
    return MediumModel(0.5, 0.5, absorbers=(lump,))


def test_square_center_doubles_background():
    m = square_model()
    assert eval_mu(m, "t", 1.0, 0.5) == pytest.approx(2.0 * m.bar_mu_t)
    # closed boundary
    assert eval_mu(m, "t", 1.25, 0.5) == pytest.approx(2.0 * m.bar_mu_t)
    assert eval_mu(m, "t", 1.2500001, 0.5) == pytest.approx(m.bar_mu_t)


def test_gaussian_center_doubles_background():
    m = preset_phantom("fig5", h=1.0 / 120)
    assert eval_mu(m, "s", 2.125, 0.5) == pytest.approx(2.0 * m.bar_mu_s, rel=1e-12)
    assert eval_mu(m, "a", 0.875, 0.5) == pytest.approx(2.0 * m.bar_mu_a, rel=1e-12)


def test_background_only():
    m = MediumModel(0.7, 0.3)
    assert eval_mu(m, "t", 0.1, 0.9) == pytest.approx(1.0)
    assert eval_mu(m, "s", -5.0, 2.0) == pytest.approx(0.7)


def test_decomposition_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        lumps_a = tuple(
            Inhomogeneity("gaussian", y0=rng.uniform(0, 3), z0=rng.uniform(0, 1),
                          amplitude=rng.uniform(-1, 2), sigma=rng.uniform(0.05, 0.4))
            for _ in range(rng.integers(0, 3)))
        lumps_s = tuple(
            Inhomogeneity("square", y0=rng.uniform(0, 3), z0=rng.uniform(0, 1),
                          amplitude=rng.uniform(0, 2), side_length=rng.uniform(0.1, 0.6))
            for _ in range(rng.integers(0, 3)))
        m = MediumModel(rng.uniform(0.5, 3), rng.uniform(0.1, 1),
                        absorbers=lumps_a, scatterers=lumps_s)
        y, z = rng.uniform(-1, 4, size=8), rng.uniform(-1, 2, size=8)
        t = eval_mu(m, "t", y, z)
        s = eval_mu(m, "s", y, z)
        a = eval_mu(m, "a", y, z)
        assert np.all(np.abs(t - s - a) <= np.spacing(t))


def test_gaussian_boundary_decay():
    # peaks well inside the rectangle leave exponentially small edge values
    m = preset_phantom("fig3-30h", h=1.0 / 120)
    sigma = m.absorbers[0].sigma
    grid = rasterize(m, "t", 0.0, 3.0, 0.0, 1.0, 1.0 / 120)
    fluct = grid.values - m.bar_mu_t
    edge = max(np.max(np.abs(fluct[0])), np.max(np.abs(fluct[-1])),
               np.max(np.abs(fluct[:, 0])), np.max(np.abs(fluct[:, -1])))
    dist = 0.5 - 1.0 / 120  # nearest edge distance from (1.5, 0.5), one cell in
    assert edge / np.max(fluct) < math.exp(-(dist / sigma) ** 2) * 1.001


def test_rasterize_constant():
    g = rasterize(MediumModel(0.4, 0.6), "t", 0, 3, 0, 1, 0.25)
    assert np.all(g.values == 1.0)
    assert g.ny == 13 and g.nz == 5


def test_rasterize_nested_grids_agree():
    m = square_model()
    coarse = rasterize(m, "t", 0, 3, 0, 1, 1.0 / 40)
    fine = rasterize(m, "t", 0, 3, 0, 1, 1.0 / 400)
    assert np.array_equal(coarse.values, fine.values[::10, ::10])


def test_rasterize_gaussian_one_step_value():
    h = 1.0 / 120
    m = preset_phantom("fig3-21h", h=h)
    grid = rasterize(m, "t", 0, 3, 0, 1, h)
    j = int(round(1.5 / h)) + 1  # one grid step from the center in y
    i = int(round(0.5 / h))
    expected = m.bar_mu_t + m.bar_mu_t * math.exp(-1.0 / 21**2)
    assert grid.values[i, j] == pytest.approx(expected, rel=1e-13)


def test_rasterize_bad_step():
    with pytest.raises(DomainError):
        rasterize(MediumModel(1, 1), "t", 0, 3, 0, 1, -0.1)


def test_phantom_file_round_trip(tmp_path):
    m = preset_phantom("fig5", h=1.0 / 120)
    path = tmp_path / "phantom.txt"
    save_phantom(m, path)
    m2 = load_phantom(path)
    assert m2.bar_mu_s == m.bar_mu_s and m2.bar_mu_a == m.bar_mu_a
    assert len(m2.absorbers) == 1 and len(m2.scatterers) == 1
    assert m2.scatterers[0].y0 == m.scatterers[0].y0
    assert m2.scatterers[0].sigma == m.scatterers[0].sigma
    y, z = 2.0, 0.44
    assert eval_mu(m2, "t", y, z) == eval_mu(m, "t", y, z)


def test_grid_file_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    from brokenray import ScalarGrid
    g = ScalarGrid(0.0, 3.0, 0.0, 1.0, rng.standard_normal((7, 13)))
    path = tmp_path / "field.grid"
    save_grid(g, path)
    g2 = load_grid(path)
    assert g2.congruent(g)
    assert np.allclose(g2.values, g.values, rtol=0, atol=1e-16)


def test_preset_fig2_geometry():
    m = preset_phantom("fig2")
    sq = m.absorbers[0]
    assert (sq.y0, sq.z0, sq.side_length) == (1.0, 0.5, 0.5)
    assert sq.amplitude == m.bar_mu_t


def test_preset_fig7_backgrounds():
    m = preset_phantom("fig7", h=1.0 / 120)
    assert m.bar_mu_s == pytest.approx(2.4)
    assert m.bar_mu_a == pytest.approx(2.4)
    m5 = preset_phantom("fig5", h=1.0 / 120)
    assert m5.bar_mu_a == pytest.approx(0.24)
    assert m5.scatterers[0].sigma == pytest.approx(21.0 / 120)


def test_unknown_preset():
    with pytest.raises(DomainError):
        preset_phantom("fig9")
