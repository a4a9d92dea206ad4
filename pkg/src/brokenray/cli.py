"""Command-line front end: phantom, forward, reconstruct, compare.

Exit codes: 0 success, 2 usage error, 1 runtime error.  BRT_THREADS caps the
worker count of the quadrature forward engine.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

from . import forward, invert_diff, invert_uniform, metrics, phantoms, render
from .geometry import DomainError, SlabGeometry

PIPELINES = ("uniform-fourier", "uniform-realspace", "differential")


@dataclass
class RunConfig:
    """Validated run parameters shared by the subcommands."""

    L: float = 1.0
    theta: float = math.pi / 4
    N: int = 120
    pipeline: str = "uniform-fourier"
    quad_step: float | None = None
    consistency_filter: bool = False
    k_oversample: int = 2
    out: str = "."

    def __post_init__(self):
        if self.N < 4:
            raise DomainError("N must be at least 4")
        if self.pipeline not in PIPELINES:
            raise DomainError(f"pipeline must be one of {PIPELINES}")
        if self.quad_step is not None and not self.quad_step > 0:
            raise DomainError("quad step must be positive")

    @property
    def geometry(self) -> SlabGeometry:
        return SlabGeometry(L=self.L, theta=self.theta,
                            y_min=0.0, y_max=3.0 * self.L)

    @property
    def h(self) -> float:
        return self.geometry.delta_max / self.N


def _config(args) -> RunConfig:
    return RunConfig(
        L=args.L, theta=args.theta, N=args.N,
        pipeline=getattr(args, "pipeline", "uniform-fourier"),
        quad_step=getattr(args, "quad_step", None),
        consistency_filter=getattr(args, "consistency_filter", False),
        k_oversample=getattr(args, "k_oversample", 2),
        out=args.out,
    )


def _outpath(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _export_grid(cfg: RunConfig, grid, stem: str, figures: bool):
    phantoms.save_grid(grid, _outpath(cfg, stem + ".grid"))
    render.write_pgm(grid, _outpath(cfg, stem + ".pgm"))
    if figures:
        render.save_heatmap(grid, _outpath(cfg, stem + ".png"), title=stem)


def cmd_phantom(args) -> int:
    cfg = _config(args)
    model = phantoms.preset_phantom(args.preset, L=cfg.L, h=cfg.h)
    path = _outpath(cfg, "phantom.txt")
    phantoms.save_phantom(model, path)
    geom = cfg.geometry
    for which in ("t", "s", "a"):
        grid = phantoms.rasterize(model, which, geom.y_min, geom.y_max,
                                  0.0, geom.L, cfg.h)
        _export_grid(cfg, grid, f"model_mu_{which}", args.figures)
    print(f"phantom={path}")
    return 0


def cmd_forward(args) -> int:
    cfg = _config(args)
    model = phantoms.load_phantom(args.phantom)
    geom = cfg.geometry
    if cfg.pipeline == "differential":
        for fam in ("a", "b"):
            data = forward.simulate_full(model, geom, fam, cfg.N,
                                         quad_step=cfg.quad_step,
                                         engine=args.engine)
            path = _outpath(cfg, f"phi_{fam}.dat")
            forward.save_data(data, path)
            print(f"data_{fam}={path}")
    else:
        data = forward.simulate_uniform(model, geom, cfg.N,
                                        quad_step=cfg.quad_step,
                                        engine=args.engine)
        path = _outpath(cfg, "psi.dat")
        forward.save_data(data, path)
        print(f"data={path}")
    return 0


def _check_header(cfg: RunConfig, data) -> None:
    ok = (abs(data.L - cfg.L) < 1e-9 and abs(data.theta - cfg.theta) < 1e-9
          and data.n_delta == cfg.N)
    if not ok:
        raise DomainError(
            f"data header (L={data.L}, theta={data.theta}, N={data.n_delta}) "
            f"does not match the configuration "
            f"(L={cfg.L}, theta={cfg.theta}, N={cfg.N})")


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    geom = cfg.geometry
    backgrounds = None
    if args.phantom:
        model = phantoms.load_phantom(args.phantom)
        backgrounds = (model.bar_mu_t, model.bar_mu_s)
    diag: dict = {}

    if cfg.pipeline == "differential":
        if not args.data_b:
            raise DomainError("differential pipeline needs --data and --data-b")
        phi_a = forward.load_data(args.data)
        phi_b = forward.load_data(args.data_b)
        _check_header(cfg, phi_a)
        _check_header(cfg, phi_b)
        if backgrounds is None:
            raise DomainError("differential pipeline needs --phantom for the "
                              "background scattering value")
        mu_t, mu_s, mu_a = invert_diff.reconstruct_differential(
            phi_a, phi_b, geom, bar_mu_s=backgrounds[1],
            background=backgrounds[0], method=args.method,
            k_oversample=cfg.k_oversample, diagnostics=diag)
        for stem, grid in (("mu_t", mu_t), ("mu_s", mu_s), ("mu_a", mu_a)):
            _export_grid(cfg, grid, "recon_" + stem, args.figures)
    else:
        data = forward.load_data(args.data)
        _check_header(cfg, data)
        bar = backgrounds[0] if backgrounds else None
        if cfg.pipeline == "uniform-fourier":
            grid = invert_uniform.reconstruct_uniform(
                data, geom, background=bar, k_oversample=cfg.k_oversample,
                consistency_filter=cfg.consistency_filter, diagnostics=diag)
        else:
            grid = invert_uniform.backproject_realspace(
                data, geom, background=bar, diagnostics=diag)
        _export_grid(cfg, grid, "recon_mu_t", args.figures)
    for key, val in sorted(diag.items()):
        print(f"{key}={val}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    model = phantoms.load_grid(args.model)
    recon = phantoms.load_grid(args.recon)
    disc = metrics.compare(model, recon, threshold=args.threshold)
    prefix = _outpath(cfg, args.tag)
    metrics.write_profiles_csv(disc, prefix)
    if args.figures:
        render.save_profiles(disc.profiles, prefix + "_profiles.png", title=args.tag)
    print(disc.summary())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brt",
        description="Broken-ray transform toolkit: forward simulation and "
                    "analytic inversion of slab data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--L", type=float, default=1.0, help="slab depth")
        p.add_argument("--theta", type=float, default=math.pi / 4,
                       help="detection angle in radians")
        p.add_argument("--N", type=int, default=120,
                       help="number of Delta steps (Delta_n = n h, n = 0..N)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--figures", action="store_true",
                       help="also render matplotlib PNG figures")

    p = sub.add_parser("phantom", help="write a preset phantom and its model grids")
    common(p)
    p.add_argument("--preset", required=True, choices=phantoms.PRESET_NAMES)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("forward", help="simulate broken-ray data for a phantom")
    common(p)
    p.add_argument("--phantom", required=True, help="phantom description file")
    p.add_argument("--pipeline", default="uniform-fourier", choices=PIPELINES)
    p.add_argument("--quad-step", dest="quad_step", type=float, default=None)
    p.add_argument("--engine", default="auto", choices=("auto", "analytic", "quad"))
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("reconstruct", help="invert data files to coefficient grids")
    common(p)
    p.add_argument("--data", required=True, help="BRT-DATA file (family a)")
    p.add_argument("--data-b", dest="data_b", default=None,
                   help="family-b BRT-DATA file (differential pipeline)")
    p.add_argument("--pipeline", default="uniform-fourier", choices=PIPELINES)
    p.add_argument("--phantom", default=None,
                   help="phantom file for background values (optional for "
                        "uniform pipelines, required for differential)")
    p.add_argument("--method", default="realspace", choices=("realspace", "fourier"),
                   help="differential inversion route")
    p.add_argument("--quad-step", dest="quad_step", type=float, default=None)
    p.add_argument("--k-oversample", dest="k_oversample", type=int, default=2)
    p.add_argument("--consistency-filter", dest="consistency_filter",
                   action="store_true",
                   help="project the gauge component out of every k column")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="compare a model grid with a reconstruction")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--threshold", type=float, default=0.02,
                   help="artifact threshold as a fraction of the model max")
    p.add_argument("--tag", default="compare", help="output file prefix")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (DomainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
