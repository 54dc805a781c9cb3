"""Projected gradient descent over the box or a discrete curve set.

The iteration is p <- P(p - gamma * grad J(p)) with a fixed step. The
gradient of J is (3L/N)-Lipschitz when the kernel gradient is L-Lipschitz,
so any gamma below N/(3L) decreases J monotonically on convex constraint
sets; ``default_step`` keeps a 10% margin below that cap. Runs are
single-owner and bitwise reproducible under a fixed seed: the gradient uses
fixed-order numpy reductions and the iterate update is sequential.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .constraints import CurveConstraintSpec, feasibility_residuals, project_box, project_curve_set
from .kernels import KernelSpec, lipschitz_of_grad
from .measure import GridDensity, ValidationError


class DivergenceError(RuntimeError):
    """Energy increased for many consecutive steps; carries the trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings. gamma=None picks the default step."""

    kernel: KernelSpec
    gamma: float | None = None
    iters: int = 400
    seed: int = 0
    constraint: object = "box"    # "box" or a CurveConstraintSpec
    tol_stop: float = 1e-9
    projection_tol: float = 1e-8
    use_fft: bool = False

    def __post_init__(self):
        if self.iters < 0:
            raise ValidationError("iteration count must be nonnegative")
        if self.gamma is not None and self.gamma <= 0:
            raise ValidationError("step size must be positive")
        if not (self.constraint == "box" or isinstance(self.constraint, CurveConstraintSpec)):
            raise ValidationError("constraint must be 'box' or a CurveConstraintSpec")


@dataclass
class SolverTrace:
    """Per-iteration record of a run."""

    energies: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    gamma: float = 0.0
    wall_time: float = 0.0
    stop_reason: str = ""


def default_step(N: int, k: KernelSpec) -> float:
    """0.9 * N / (3L), strictly inside the convergence band gamma < N/(3L)."""
    if N < 1:
        raise ValidationError("need at least one point")
    return 0.9 * N / (3.0 * lipschitz_of_grad(k))


def run(start, target: GridDensity, cfg: SolverConfig):
    """Minimize J from ``start`` (flat length N*d); returns (final, trace).

    The trace records J at the start and after every accepted step.
    Divergence (50 consecutive energy increases) aborts with a diagnostic.
    """
    p = np.asarray(start, dtype=float).reshape(-1).copy()
    d = target.dim
    if len(p) % d:
        raise ValidationError(f"start length {len(p)} not divisible by dim {d}")
    n = len(p) // d
    gamma = cfg.gamma if cfg.gamma is not None else default_step(n, cfg.kernel)

    spec = cfg.constraint if isinstance(cfg.constraint, CurveConstraintSpec) else None
    if spec is not None and (spec.N != n or spec.dim != d):
        raise ValidationError("constraint spec shape does not match the start vector")

    field_fft = energy.AttractionField(target, cfg.kernel) if cfg.use_fft else None

    def evaluate(v):
        return energy.evaluate(v.reshape(n, d), target, cfg.kernel, field=field_fft)

    def residual(v):
        if spec is None:
            return max(0.0, float(-v.min()), float(v.max() - 1.0))
        return float(feasibility_residuals(spec, v).max())

    trace = SolverTrace(gamma=gamma)
    t0 = time.perf_counter()
    J_cur, g_cur = evaluate(p)
    trace.energies.append(J_cur)
    trace.residuals.append(residual(p))
    duals = None
    bad_streak = 0

    for _ in range(cfg.iters):
        step_target = p - gamma * g_cur
        if spec is None:
            p_next = project_box(step_target)
        else:
            p_next, info = project_curve_set(
                spec, step_target, tol=cfg.projection_tol, warm_start=duals)
            duals = info["duals"]
        move = float(np.abs(p_next - p).max())
        if move < cfg.tol_stop:
            trace.stop_reason = "fixed-point"
            break
        p = p_next
        J_cur, g_cur = evaluate(p)
        trace.energies.append(J_cur)
        trace.step_norms.append(move)
        trace.residuals.append(residual(p))
        if trace.energies[-1] > trace.energies[-2]:
            bad_streak += 1
            if bad_streak >= 50:
                trace.stop_reason = "divergence"
                trace.wall_time = time.perf_counter() - t0
                raise DivergenceError(
                    f"energy increased for {bad_streak} consecutive steps "
                    f"(gamma={gamma!r}); last J={trace.energies[-1]!r}", trace)
        else:
            bad_streak = 0
    else:
        trace.stop_reason = "iteration-cap"
    trace.wall_time = time.perf_counter() - t0
    return p, trace


def init_points(target: GridDensity, N: int, strategy: str = "random",
                seed: int = 0) -> np.ndarray:
    """Feasible starting configuration, flattened to length N*d.

    random    rejection sampling proportional to the target masses
    grid      serpentine-ordered centered lattice
    spiral    archimedean spiral, points equispaced in arc length (d=2)
    circle    centered ring of radius 0.25 (d=2)
    """
    if N < 1:
        raise ValidationError("need at least one point")
    d = target.dim
    if strategy in ("random", "random-rejection"):
        return _init_random(target, N, seed).reshape(-1)
    if strategy == "grid":
        return _init_grid(N, d).reshape(-1)
    if strategy == "spiral":
        if d != 2:
            raise ValidationError("spiral start needs a 2-D target")
        return _init_spiral(N).reshape(-1)
    if strategy == "circle":
        if d != 2:
            raise ValidationError("circle start needs a 2-D target")
        angles = 2.0 * np.pi * np.arange(N) / N
        pts = 0.5 + 0.25 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return pts.reshape(-1)
    raise ValidationError(f"unknown init strategy {strategy!r}")


def _init_random(target: GridDensity, N: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = target.dim
    peak = float(target.masses.max())
    dims = np.array(target.dims)
    out = np.empty((N, d))
    have = 0
    while have < N:
        cand = rng.random((4 * (N - have) + 16, d))
        cells = np.minimum((cand * dims).astype(int), dims - 1)
        accept = rng.random(len(cand)) * peak < target.masses[tuple(cells.T)]
        take = cand[accept][: N - have]
        out[have:have + len(take)] = take
        have += len(take)
    return out


def _init_grid(N: int, d: int) -> np.ndarray:
    from .quantize import serpentine_order

    g = int(np.ceil(N ** (1.0 / d) - 1e-9))
    part = serpentine_order(g, d)
    return part.centers[:N]


def _init_spiral(N: int, r0: float = 0.10, r1: float = 0.42, loops: float = 3.0) -> np.ndarray:
    theta_max = 2.0 * np.pi * loops
    dense = np.linspace(0.0, theta_max, 40000)
    radius = r0 + (r1 - r0) * dense / theta_max
    xy = np.stack([radius * np.cos(dense), radius * np.sin(dense)], axis=1)
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    targets = arc[-1] * (np.arange(N) + 0.5) / N
    theta = np.interp(targets, arc, dense)
    r = r0 + (r1 - r0) * theta / theta_max
    return 0.5 + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
