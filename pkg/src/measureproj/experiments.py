"""Rate measurement: quantizer and curve W1 decay against random targets.

Targets are random mixtures of one to five blobs (single atoms or small
uniform patches) with random weights, so the sweeps cover both degenerate
and spread mass. Supports stay small (at most ~80 atoms), which keeps every
Wasserstein evaluation exact: no binning enters the quantizer sweep, and the
curve sweep uses the midpoint occupation proxy whose gap is accounted
analytically. Runs are reproducible bit for bit under a fixed seed; trials
may be fanned out over processes with results reduced in trial order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curves import build_serpentine_curve, occupation_proxy, serpentine_w1_bound
from .measure import DiscreteMeasure, ValidationError
from .quantize import cube_quantize, quantizer_bound
from .transport import consolidate, w1_1d, w1_exact


@dataclass(frozen=True)
class RateFit:
    """Least-squares power-law fit on log-log data."""

    xs: tuple
    ys: tuple
    slope: float
    intercept: float
    r2: float


def fit_rate(points) -> RateFit:
    """OLS fit of log(distance) against log(size)."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 3:
        raise ValidationError("need at least three (size, distance) points")
    if any(a <= 0 or b <= 0 for a, b in pts):
        raise ValidationError("sizes and distances must be positive")
    xs = np.log([a for a, _ in pts])
    ys = np.log([b for _, b in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(xs=tuple(xs), ys=tuple(ys), slope=float(slope),
                   intercept=float(intercept), r2=r2)


def random_blob_measure(d: int, rng: np.random.Generator,
                        max_blobs: int = 5) -> DiscreteMeasure:
    """Mixture of 1..max_blobs blobs: single atoms or small uniform patches."""
    n_blobs = int(rng.integers(1, max_blobs + 1))
    pts, ws = [], []
    for _ in range(n_blobs):
        center = rng.random(d)
        weight = float(rng.uniform(0.2, 1.0))
        if rng.random() < 0.4:
            pts.append(center[None, :])
            ws.append(np.array([weight]))
        else:
            side = int(rng.integers(2, 5))
            spacing = float(rng.uniform(0.01, 0.05))
            axes = [center[a] + spacing * (np.arange(side) - (side - 1) / 2)
                    for a in range(d)]
            mesh = np.meshgrid(*axes, indexing="ij")
            patch = np.stack([g.reshape(-1) for g in mesh], axis=1)
            pts.append(patch)
            ws.append(np.full(len(patch), weight / len(patch)))
    points = np.clip(np.vstack(pts), 0.0, 1.0)
    weights = np.concatenate(ws)
    return DiscreteMeasure(points, weights / weights.sum(), probability=True)


def _quantizer_trial(args):
    d, N, seed = args
    rng = np.random.default_rng(seed)
    target = random_blob_measure(d, rng)
    approx = consolidate(cube_quantize(target, N))
    if d == 1:
        w1 = w1_1d(approx, target)
    else:
        w1, _ = w1_exact(approx, target, metric="l2")
    return w1, quantizer_bound(N, d)


def quantizer_sweep(d: int, Ns, trials: int, seed: int, workers: int | None = None):
    """W1 of the cube quantizer per (N, trial); returns records
    (N, trial, w1, bound). Trial t reuses one target across the whole N
    sweep so the fitted decay is not confounded by target difficulty."""
    jobs = [(d, int(N), seed + 1009 * t) for N in Ns for t in range(trials)]
    results = _run_jobs(_quantizer_trial, jobs, workers)
    records = []
    idx = 0
    for N in Ns:
        for t in range(trials):
            w1, bound = results[idx]
            records.append((int(N), t, w1, bound))
            idx += 1
    return records


def run_quantizer_rate(d: int, Ns, trials: int, seed: int,
                       workers: int | None = None) -> RateFit:
    """Fit the decay of the mean quantizer W1 across the N sweep."""
    records = quantizer_sweep(d, Ns, trials, seed, workers)
    pts = []
    for N in Ns:
        vals = [w for (n, _, w, _) in records if n == int(N)]
        pts.append((float(N), float(np.mean(vals))))
    return fit_rate(pts)


def _curve_trial(args):
    d, T, seed, alpha = args
    rng = np.random.default_rng(seed)
    target = random_blob_measure(d, rng)
    exponent = 1.0 / ((d + 1) - 1)          # m = 1
    ncells = max(2, int(round(T ** exponent)))
    curve = build_serpentine_curve(target, m=1, alphas=(alpha,), T=T, ncells=ncells)
    proxy = occupation_proxy(curve)
    if d == 1:
        w1 = w1_1d(proxy, target)
    else:
        w1, _ = w1_exact(proxy, target, metric="l2")
    # midpoint collapse error of the proxy
    proxy_gap = curve.travel_time / curve.T * (0.5 / ncells)
    bound = serpentine_w1_bound(curve, d, ncells) + proxy_gap
    return w1, bound


def curve_sweep(d: int, Ts, seed: int, trials: int = 2, alpha: float = 1.0,
                workers: int | None = None):
    """Records (T, trial, w1, bound) for the serpentine curve construction."""
    if d not in (1, 2):
        raise ValidationError("curve sweep supports d in {1, 2}")
    jobs = [(d, float(T), seed + 509 * t, alpha)
            for T in Ts for t in range(trials)]
    results = _run_jobs(_curve_trial, jobs, workers)
    records = []
    idx = 0
    for T in Ts:
        for t in range(trials):
            w1, bound = results[idx]
            records.append((float(T), t, w1, bound))
            idx += 1
    return records


def run_curve_rate(m: int, d: int, Ts, seed: int, trials: int = 2,
                   workers: int | None = None) -> RateFit:
    """Fit the decay of the curve occupation W1 across the T sweep (m=1)."""
    if m != 1:
        raise ValidationError("only m = 1 carries a certified discretization gap")
    records = curve_sweep(d, Ts, seed, trials=trials, workers=workers)
    pts = []
    for T in Ts:
        vals = [w for (tt, _, w, _) in records if tt == float(T)]
        pts.append((float(T), float(np.mean(vals))))
    return fit_rate(pts)


def _run_jobs(fn, jobs, workers: int | None):
    if workers is None:
        workers = int(os.environ.get("MP_THREADS", "1"))
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
