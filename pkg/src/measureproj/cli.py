"""Command-line surface: stipple, lineart, quantize, w1, rates, gradcheck.

Every subcommand is deterministic under a fixed seed. Flags may also be
supplied through a JSON config file (--config); explicit flags win. Exit
codes: 0 ok, 1 validation error, 2 internal error. The MP_THREADS
environment variable caps worker processes for the rates sweeps.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .constraints import CurveConstraintSpec, feasibility_residuals, project_curve_set
from .energy import grad_J, repulsion, attraction
from .experiments import curve_sweep, quantizer_sweep, run_curve_rate, run_quantizer_rate
from .kernels import KernelSpec
from .measure import DiscreteMeasure, ValidationError, from_image, load_grayscale
from .quantize import cube_quantize
from .solver import SolverConfig, default_step, init_points, run
from .svgout import (read_points_csv, render_svg_points, render_svg_polyline,
                     write_curve_csv, write_points_csv, write_trace_csv)
from .transport import consolidate, w1_exact


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="measureproj",
                                  description="Project densities onto point sets and curves.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default flag values")
    common.add_argument("--seed", type=int, default=None)

    img = argparse.ArgumentParser(add_help=False)
    img.add_argument("--in", dest="input", help="input image (.pgm or .png)")
    img.add_argument("--invert", action="store_true", default=None,
                     help="mass = darkness (default)")
    img.add_argument("--no-invert", dest="invert", action="store_false",
                     help="mass = brightness")

    kern = argparse.ArgumentParser(add_help=False)
    kern.add_argument("--kernel", choices=["l1s", "gauss", "l2s"], default=None)
    kern.add_argument("--eps", type=float, default=None)
    kern.add_argument("--sigma", type=float, default=None)

    solve = argparse.ArgumentParser(add_help=False)
    solve.add_argument("--n", type=int, default=None)
    solve.add_argument("--iters", type=int, default=None)
    solve.add_argument("--gamma", type=float, default=None)
    solve.add_argument("--init", choices=["random", "grid", "spiral", "circle"], default=None)
    solve.add_argument("--fast", action="store_true", default=None,
                       help="FFT-interpolated attraction gradient")

    p = sub.add_parser("stipple", parents=[common, img, kern, solve],
                       help="render an image as N dots")
    p.add_argument("--out", help="output SVG path")
    p.add_argument("--radius", type=float, default=None, help="dot radius in px")
    p.add_argument("--size", type=int, default=None, help="SVG canvas size")

    p = sub.add_parser("lineart", parents=[common, img, kern, solve],
                       help="render an image as one constrained curve")
    p.add_argument("--out", help="output SVG path")
    p.add_argument("--m", type=int, choices=[1, 2], default=None)
    p.add_argument("--q", default=None, help="outer norm index: 1, 2 or inf")
    p.add_argument("--alpha1", type=float, default=None)
    p.add_argument("--alpha2", type=float, default=None)
    p.add_argument("--T", type=float, default=None, help="curve time budget")
    p.add_argument("--size", type=int, default=None)

    p = sub.add_parser("quantize", parents=[common, img],
                       help="constructive N-point quantization of an image")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", help="output CSV or SVG path")
    p.add_argument("--size", type=int, default=None)

    p = sub.add_parser("w1", parents=[common],
                       help="exact W1 between two point CSV files")
    p.add_argument("--a", help="first points CSV")
    p.add_argument("--b", help="second points CSV")
    p.add_argument("--metric", choices=["l1", "l2"], default=None)

    p = sub.add_parser("rates", parents=[common],
                       help="measure quantizer or curve W1 decay")
    p.add_argument("--which", choices=["quantizer", "curve"], default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--sweep", default=None, help="comma-separated sizes")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", help="output CSV path (a .dat twin is written too)")

    p = sub.add_parser("gradcheck", parents=[common, kern],
                       help="compare the analytic gradient with central differences")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)
    return top


_DEFAULTS = {
    "seed": 0, "kernel": "gauss", "eps": 0.05, "sigma": 0.1,
    "n": 200, "iters": 300, "gamma": None, "init": "random", "fast": False,
    "invert": True, "radius": 2.0, "size": 512,
    "m": 1, "q": "inf", "alpha1": 1.0, "alpha2": 1.0, "T": None,
    "metric": "l1", "which": "quantizer", "d": 2, "sweep": None, "trials": 5,
    "grid": 24,
}


def _settle(args: argparse.Namespace) -> dict:
    """Merge precedence: explicit flag > config file > built-in default.

    Constraint specs may come in the file form {m, q, alphas, N, T}; the
    alphas list and capital N unfold onto the flag names.
    """
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
        if "alphas" in file_cfg:
            alphas = list(file_cfg.pop("alphas"))
            for i, val in enumerate(alphas[:2], start=1):
                file_cfg.setdefault(f"alpha{i}", float(val))
        if "N" in file_cfg:
            file_cfg.setdefault("n", int(file_cfg.pop("N")))
        cfg.update(file_cfg)
    out = {}
    for key, hard in _DEFAULTS.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, hard)
    for key in ("input", "out", "a", "b", "command"):
        val = getattr(args, key, None)
        out[key] = val if val is not None else cfg.get(key)
    return out


def _kernel(cfg: dict) -> KernelSpec:
    return KernelSpec(kind=cfg["kernel"], eps=cfg["eps"], sigma=cfg["sigma"])


def _load_target(cfg: dict):
    if not cfg["input"]:
        raise ValidationError("missing --in image path")
    return from_image(load_grayscale(cfg["input"]), invert=cfg["invert"])


def _out_paths(out: str):
    if not out:
        raise ValidationError("missing --out path")
    base = out[:-4] if out.lower().endswith((".svg", ".csv")) else out
    return base + ".svg", base + ".points.csv", base + ".trace.csv"


def _write_summary(path: str, trace, extra: dict) -> None:
    """Deterministic JSON run summary (wall time stays out on purpose)."""
    payload = {
        "iterations": len(trace.energies) - 1,
        "J_start": trace.energies[0],
        "J_final": trace.energies[-1],
        "gamma": trace.gamma,
        "stop_reason": trace.stop_reason,
        "max_residual": max(trace.residuals) if trace.residuals else 0.0,
    }
    payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_stipple(cfg: dict) -> int:
    svg_path, pts_path, trace_path = _out_paths(cfg["out"])
    target = _load_target(cfg)
    kernel = _kernel(cfg)
    start = init_points(target, cfg["n"], cfg["init"], seed=cfg["seed"])
    solver_cfg = SolverConfig(kernel=kernel, gamma=cfg["gamma"], iters=cfg["iters"],
                              seed=cfg["seed"], use_fft=cfg["fast"])
    final, trace = run(start, target, solver_cfg)
    pts = final.reshape(-1, target.dim)
    meta = [f"command: stipple n={cfg['n']} iters={cfg['iters']} seed={cfg['seed']}",
            f"kernel: {kernel.kind} eps={kernel.eps} sigma={kernel.sigma}",
            f"J: start={trace.energies[0]!r} final={trace.energies[-1]!r}"]
    with open(svg_path, "w") as fh:
        fh.write(render_svg_points(pts, size=cfg["size"], radius=cfg["radius"],
                                   comments=meta))
    write_points_csv(pts_path, pts)
    write_trace_csv(trace_path, trace)
    _write_summary(svg_path[:-4] + ".summary.json", trace,
                   {"command": "stipple", "n": cfg["n"], "seed": cfg["seed"],
                    "kernel": kernel.kind})
    print(f"stipple: {len(pts)} points, J {trace.energies[0]:.6g} -> "
          f"{trace.energies[-1]:.6g}, wrote {svg_path}")
    return 0


def cmd_lineart(cfg: dict) -> int:
    svg_path, pts_path, trace_path = _out_paths(cfg["out"])
    target = _load_target(cfg)
    kernel = _kernel(cfg)
    n = cfg["n"]
    T = cfg["T"] if cfg["T"] is not None else float(n) / 50.0
    alphas = (cfg["alpha1"],) if cfg["m"] == 1 else (cfg["alpha1"], cfg["alpha2"])
    spec = CurveConstraintSpec(m=cfg["m"], q=cfg["q"], alphas=alphas,
                               N=n, dim=target.dim, dt=T / n)
    cell = 1.0 / max(target.dims)
    if cfg["alpha1"] * spec.dt < cell:
        print(f"warning: alpha1*dt = {cfg['alpha1'] * spec.dt:.3g} is below the "
              f"grid cell {cell:.3g}; the curve can barely move", file=sys.stderr)
    start = init_points(target, n, cfg["init"] if cfg["init"] != "random" else "spiral",
                        seed=cfg["seed"])
    start, _ = project_curve_set(spec, start, tol=1e-9)
    solver_cfg = SolverConfig(kernel=kernel, gamma=cfg["gamma"], iters=cfg["iters"],
                              seed=cfg["seed"], constraint=spec, use_fft=cfg["fast"])
    final, trace = run(start, target, solver_cfg)
    pts = final.reshape(n, target.dim)
    res = feasibility_residuals(spec, final)
    meta = [f"command: lineart n={n} m={cfg['m']} q={cfg['q']} T={T!r} seed={cfg['seed']}",
            f"feasibility residuals: {' '.join(repr(float(r)) for r in res)}",
            f"J: start={trace.energies[0]!r} final={trace.energies[-1]!r}"]
    with open(svg_path, "w") as fh:
        fh.write(render_svg_polyline(pts, size=cfg["size"], comments=meta))
    write_points_csv(pts_path, pts)
    write_trace_csv(trace_path, trace)
    # dense time-stamped export of the polyline, initial hold included
    knot_t = spec.dt * (np.arange(n) + 1)
    fine_t = np.linspace(0.0, T, 4 * n + 1)
    dense = np.stack([np.interp(fine_t, knot_t, pts[:, a])
                      for a in range(target.dim)], axis=1)
    write_curve_csv(svg_path[:-4] + ".curve.csv", fine_t, dense)
    _write_summary(svg_path[:-4] + ".summary.json", trace,
                   {"command": "lineart", "n": n, "seed": cfg["seed"],
                    "m": cfg["m"], "q": str(spec.q), "T": T})
    print(f"lineart: {n} vertices, J {trace.energies[0]:.6g} -> "
          f"{trace.energies[-1]:.6g}, max residual {res.max():.3g}, wrote {svg_path}")
    return 0


def cmd_quantize(cfg: dict) -> int:
    target = _load_target(cfg)
    mu = cube_quantize(target, cfg["n"])
    out = cfg["out"]
    if not out:
        raise ValidationError("missing --out path")
    if out.lower().endswith(".svg"):
        with open(out, "w") as fh:
            fh.write(render_svg_points(mu.points, size=cfg["size"],
                                       radius=cfg["radius"]))
    else:
        write_points_csv(out, mu.points)
    print(f"quantize: {mu.n} points -> {out}")
    return 0


def cmd_w1(cfg: dict) -> int:
    if not cfg["a"] or not cfg["b"]:
        raise ValidationError("w1 needs --a and --b point CSV files")
    pa = read_points_csv(cfg["a"])
    pb = read_points_csv(cfg["b"])
    mu = consolidate(DiscreteMeasure(pa, np.full(len(pa), 1.0 / len(pa))))
    nu = consolidate(DiscreteMeasure(pb, np.full(len(pb), 1.0 / len(pb))))
    val, _ = w1_exact(mu, nu, metric=cfg["metric"])
    print(repr(val))
    return 0


def cmd_rates(cfg: dict) -> int:
    d = cfg["d"]
    seed = cfg["seed"]
    workers = int(os.environ.get("MP_THREADS", "1"))
    if cfg["which"] == "quantizer":
        sweep = ([int(v) for v in cfg["sweep"].split(",")] if cfg["sweep"]
                 else [4, 16, 64, 256, 1024])
        records = quantizer_sweep(d, sweep, cfg["trials"], seed, workers=workers)
        fit = run_quantizer_rate(d, sweep, cfg["trials"], seed, workers=workers)
        header = "size,trial,w1,bound"
    else:
        sweep = ([float(v) for v in cfg["sweep"].split(",")] if cfg["sweep"]
                 else [16.0, 36.0, 64.0, 144.0, 256.0])
        records = curve_sweep(d, sweep, seed, trials=cfg["trials"], workers=workers)
        fit = run_curve_rate(1, d, sweep, seed, trials=cfg["trials"], workers=workers)
        header = "time,trial,w1,bound"
    print(f"rates[{cfg['which']} d={d}]: slope={fit.slope!r} r2={fit.r2!r}")
    if cfg["out"]:
        rows = [header] + [f"{float(a)!r},{t},{float(w)!r},{float(b)!r}"
                           for a, t, w, b in records]
        with open(cfg["out"], "w") as fh:
            fh.write("\n".join(rows) + "\n")
        dat = cfg["out"].rsplit(".", 1)[0] + ".dat"
        with open(dat, "w") as fh:
            fh.write(f"# slope {fit.slope!r} intercept {fit.intercept!r} r2 {fit.r2!r}\n")
            for x, y in zip(fit.xs, fit.ys):
                fh.write(f"{x!r} {y!r}\n")
        print(f"wrote {cfg['out']} and {dat}")
    return 0


def cmd_gradcheck(cfg: dict) -> int:
    rng = np.random.default_rng(cfg["seed"])
    kernel = _kernel(cfg)
    n = cfg["n"] if cfg["n"] else 8
    grid = cfg["grid"]
    raw = 0.2 + 0.8 * rng.random((grid, grid))
    target = from_image(raw, invert=False)
    worst = 0.0
    for _ in range(20):
        pts = rng.random((n, 2))
        g = grad_J(pts, target, kernel)
        flat = pts.reshape(-1)
        fd = np.empty_like(flat)
        h = 1e-6
        for i in range(len(flat)):
            up = flat.copy(); up[i] += h
            dn = flat.copy(); dn[i] -= h
            jp = repulsion(up.reshape(n, 2), kernel) - attraction(up.reshape(n, 2), target, kernel)
            jm = repulsion(dn.reshape(n, 2), kernel) - attraction(dn.reshape(n, 2), target, kernel)
            fd[i] = (jp - jm) / (2 * h)
        worst = max(worst, float(np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12)))
    print(f"gradcheck[{kernel.kind}]: max relative error {worst!r}")
    return 0 if worst < 1e-5 else 1


_COMMANDS = {
    "stipple": cmd_stipple,
    "lineart": cmd_lineart,
    "quantize": cmd_quantize,
    "w1": cmd_w1,
    "rates": cmd_rates,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _settle(args)
        return _COMMANDS[args.command](cfg)
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
