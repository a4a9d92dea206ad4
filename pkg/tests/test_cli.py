import os

import numpy as np
import pytest

from brokenray import load_data, load_grid
from brokenray.cli import main


def run(args):
    return main(args)


def test_phantom_writes_files(tmp_path):
    out = tmp_path / "p"
    assert run(["phantom", "--preset", "fig2", "--N", "20",
                "--out", str(out)]) == 0
    assert (out / "phantom.txt").exists()
    for which in "tsa":
        assert (out / f"model_mu_{which}.grid").exists()
        assert (out / f"model_mu_{which}.pgm").exists()
    grid = load_grid(out / "model_mu_t.grid")
    assert grid.ny == 61 and grid.nz == 21
    pgm = (out / "model_mu_t.pgm").read_text().splitlines()
    assert pgm[0] == "P2" and pgm[3] == "255"


def test_uniform_round_trip(tmp_path, capsys):
    out = tmp_path / "run"
    run(["phantom", "--preset", "fig3-9h", "--N", "40", "--out", str(out)])
    assert run(["forward", "--phantom", str(out / "phantom.txt"), "--N", "40",
                "--out", str(out)]) == 0
    data = load_data(out / "psi.dat")
    assert data.n_delta == 40
    assert run(["reconstruct", "--data", str(out / "psi.dat"), "--N", "40",
                "--pipeline", "uniform-fourier",
                "--phantom", str(out / "phantom.txt"), "--out", str(out)]) == 0
    recon = load_grid(out / "recon_mu_t.grid")
    model = load_grid(out / "model_mu_t.grid")
    assert recon.congruent(model)
    capsys.readouterr()
    assert run(["compare", "--model", str(out / "model_mu_t.grid"),
                "--recon", str(out / "recon_mu_t.grid"), "--N", "40",
                "--out", str(out), "--figures"]) == 0
    summary = capsys.readouterr().out
    assert "l2=" in summary and "max_rel=" in summary
    assert (out / "compare_profile_y.csv").exists()
    assert (out / "compare_profiles.png").exists()


def test_realspace_pipeline(tmp_path):
    out = tmp_path / "run"
    run(["phantom", "--preset", "fig3-9h", "--N", "32", "--out", str(out)])
    run(["forward", "--phantom", str(out / "phantom.txt"), "--N", "32",
         "--out", str(out)])
    assert run(["reconstruct", "--data", str(out / "psi.dat"), "--N", "32",
                "--pipeline", "uniform-realspace",
                "--phantom", str(out / "phantom.txt"), "--out", str(out)]) == 0
    assert (out / "recon_mu_t.grid").exists()


def test_differential_pipeline(tmp_path):
    out = tmp_path / "run"
    run(["phantom", "--preset", "fig7-3h", "--N", "24", "--out", str(out)])
    assert run(["forward", "--phantom", str(out / "phantom.txt"), "--N", "24",
                "--pipeline", "differential", "--out", str(out)]) == 0
    assert (out / "phi_a.dat").exists() and (out / "phi_b.dat").exists()
    assert run(["reconstruct", "--data", str(out / "phi_a.dat"),
                "--data-b", str(out / "phi_b.dat"), "--N", "24",
                "--pipeline", "differential",
                "--phantom", str(out / "phantom.txt"), "--out", str(out)]) == 0
    for stem in ("mu_t", "mu_s", "mu_a"):
        assert (out / f"recon_{stem}.grid").exists()
        assert (out / f"recon_{stem}.pgm").exists()


def test_usage_error_exit_code():
    assert run(["phantom", "--preset", "not-a-preset"]) == 2
    assert run(["frobnicate"]) == 2


def test_runtime_error_exit_code(tmp_path):
    missing = tmp_path / "nope.txt"
    assert run(["forward", "--phantom", str(missing), "--N", "8",
                "--out", str(tmp_path)]) == 1


def test_header_mismatch_exit_code(tmp_path):
    out = tmp_path / "run"
    run(["phantom", "--preset", "fig3-9h", "--N", "16", "--out", str(out)])
    run(["forward", "--phantom", str(out / "phantom.txt"), "--N", "16",
         "--out", str(out)])
    assert run(["reconstruct", "--data", str(out / "psi.dat"), "--N", "32",
                "--phantom", str(out / "phantom.txt"), "--out", str(out)]) == 1


def test_forward_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(["phantom", "--preset", "fig2", "--N", "16", "--out", str(out1)])
    for out in (out1, out2):
        run(["forward", "--phantom", str(out1 / "phantom.txt"), "--N", "16",
             "--out", str(out)])
    assert (out1 / "psi.dat").read_bytes() == (out2 / "psi.dat").read_bytes()


def test_quad_engine_respects_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("BRT_THREADS", "1")
    out = tmp_path / "run"
    run(["phantom", "--preset", "fig3-9h", "--N", "12", "--out", str(out)])
    assert run(["forward", "--phantom", str(out / "phantom.txt"), "--N", "12",
                "--engine", "quad", "--quad-step", "0.02",
                "--out", str(out)]) == 0
    assert load_data(out / "psi.dat").values.shape[1] == 13
