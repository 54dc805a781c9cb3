"""Feasible curve constructions and curve <-> N-point discretization maps.

``build_serpentine_curve`` realizes a target density as the occupation
measure of a kinematically bounded curve: it sweeps all cells of a cube
partition in serpentine order, waiting at each cell center for a time
proportional to the cell's mass and moving between adjacent centers with a
polynomial step whose derivatives respect the bounds. With hop time tau and
total travel time T_N = (cells - 1) * tau, the occupation measure is within

    sqrt(d)/(2 C) * (T - T_N)/T  +  sqrt(d) * T_N / T

of the target in W1 (Euclidean ground metric), where C is the per-axis cell
count: waiting mass sits within half a cell diagonal of its cell's mass, and
the traveling fraction can be moved anywhere in the cube.

``curve_to_npoint`` and ``npoint_to_curve`` convert between dense curves and
uniform atom chains, each within alpha_1 * T / N in W1 of the original.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import CurveConstraintSpec, feasibility_residuals
from .measure import DiscreteMeasure, ValidationError
from .quantize import cell_masses, serpentine_order

# sup |smoothstep'| and sup |quintic''| on [0, 1]
_CUBIC_PEAK_VEL = 1.5
_QUINTIC_PEAK_VEL = 1.875
_QUINTIC_PEAK_ACC = 10.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class PolyStep:
    """Scalar ramp u on [0, r] with u(0)=0, u(r)=C and flat ends.

    m=1 uses the cubic smoothstep (endpoint velocities vanish), m=2 the
    quintic (endpoint velocities and accelerations vanish). ``r`` is sized
    by the caller so the m-th derivative stays within its bound.
    """

    m: int
    C: float
    r: float

    @property
    def coeffs(self) -> tuple:
        # ascending powers of (t / r), scaled by C
        if self.m == 1:
            return (0.0, 0.0, 3.0 * self.C, -2.0 * self.C)
        return (0.0, 0.0, 0.0, 10.0 * self.C, -15.0 * self.C, 6.0 * self.C)

    def eval(self, t):
        x = np.clip(np.asarray(t, dtype=float) / self.r, 0.0, 1.0)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def velocity(self, t):
        x = np.clip(np.asarray(t, dtype=float) / self.r, 0.0, 1.0)
        if self.m == 1:
            return self.C * (6.0 * x - 6.0 * x * x) / self.r
        return self.C * (30.0 * x ** 4 - 60.0 * x ** 3 + 30.0 * x ** 2) / self.r


def hop_time(dist: float, m: int, alphas) -> float:
    """Shortest step duration whose polynomial ramp respects the bounds."""
    if m == 1:
        return _CUBIC_PEAK_VEL * dist / alphas[0]
    tau_vel = _QUINTIC_PEAK_VEL * dist / alphas[0]
    tau_acc = math.sqrt(_QUINTIC_PEAK_ACC * dist / alphas[1])
    return max(tau_vel, tau_acc)


@dataclass(frozen=True)
class SerpentineCurve:
    """Piecewise wait-and-step curve through the partition cell centers."""

    centers: np.ndarray        # (cells, d) in visit order
    waits: np.ndarray          # wait duration at each center
    tau: float                 # duration of each hop
    T: float
    m: int

    def __post_init__(self):
        t1 = np.concatenate([[0.0], np.cumsum(self.waits[:-1] + self.tau)])
        object.__setattr__(self, "_start", t1)

    @property
    def schedule(self) -> list:
        """(cell index, wait start, wait end) triples."""
        return [(i, float(t), float(t + w))
                for i, (t, w) in enumerate(zip(self._start, self.waits))]

    @property
    def travel_time(self) -> float:
        return self.tau * (len(self.centers) - 1)

    def eval(self, t) -> np.ndarray:
        """Curve position at times t, shape (len(t), d)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cell = np.searchsorted(self._start, t, side="right") - 1
        cell = np.clip(cell, 0, len(self.centers) - 1)
        local = t - self._start[cell]
        out = self.centers[cell].copy()
        hopping = (local > self.waits[cell]) & (cell < len(self.centers) - 1)
        if hopping.any():
            idx = np.nonzero(hopping)[0]
            c = cell[idx]
            frm = self.centers[c]
            gap = self.centers[c + 1] - frm
            step = PolyStep(m=self.m, C=1.0, r=self.tau)
            frac = step.eval(local[idx] - self.waits[c])
            out[idx] = frm + gap * frac[:, None]
        return out

    def sample(self, num: int) -> "SampledCurve":
        ts = self.T * (np.arange(num) + 0.5) / num
        return SampledCurve(ts=ts, points=self.eval(ts), T=self.T)


@dataclass(frozen=True)
class SampledCurve:
    """Timestamped curve samples; the occupation measure weights each
    sample 1/num."""

    ts: np.ndarray
    points: np.ndarray
    T: float

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def measure(self) -> DiscreteMeasure:
        n = len(self.points)
        return DiscreteMeasure(np.clip(self.points, 0.0, 1.0),
                               np.full(n, 1.0 / n), probability=True)

    def eval(self, t) -> np.ndarray:
        """Linear interpolation between samples (constant beyond the ends)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((len(t), self.dim))
        for a in range(self.dim):
            out[:, a] = np.interp(t, self.ts, self.points[:, a])
        return out


def build_serpentine_curve(target, m: int, alphas, T: float, ncells: int) -> SerpentineCurve:
    """Serpentine sweep of the target with waits proportional to cell mass.

    Requires T >= T_N, the time needed to traverse all cells; the slack
    T - T_N is distributed over the cells proportionally to their target
    masses, which keeps every wait below T * mass as the W1 bound needs.
    """
    if m not in (1, 2):
        raise ValidationError("derivative order m must be 1 or 2")
    alphas = tuple(float(a) for a in (alphas if np.iterable(alphas) else (alphas,)))
    if len(alphas) != m or any(a <= 0 for a in alphas):
        raise ValidationError(f"need {m} positive derivative bounds")
    if ncells < 1:
        raise ValidationError("need at least one cell per axis")
    dim = target.dim
    part = serpentine_order(ncells, dim)
    masses = cell_masses(target, part)
    total = masses.sum()
    if total <= 0:
        raise ValidationError("target has no mass")
    tau = hop_time(1.0 / ncells, m, alphas)
    travel = tau * (ncells ** dim - 1)
    if T < travel:
        raise ValidationError(
            f"time budget {T} below the traversal time {travel:.6g}")
    waits = (masses / total) * (T - travel)
    return SerpentineCurve(centers=part.centers, waits=waits, tau=tau, T=T, m=m)


def serpentine_w1_bound(curve: SerpentineCurve, dim: int, ncells: int) -> float:
    """Certified W1 radius of the occupation measure around its target."""
    frac_wait = (curve.T - curve.travel_time) / curve.T
    frac_move = curve.travel_time / curve.T
    return math.sqrt(dim) / (2.0 * ncells) * frac_wait + math.sqrt(dim) * frac_move


def occupation_proxy(curve: SerpentineCurve) -> DiscreteMeasure:
    """Atomic stand-in for the exact occupation measure.

    Waiting mass is exact (atoms at the visited centers); each hop's mass
    tau/T is collapsed to the hop midpoint, at most half a hop length away
    from where it lives on the segment, so

        W1(proxy, occupation) <= travel_time/T * hop_length/2.
    """
    n_cells = len(curve.centers)
    wait_w = curve.waits / curve.T
    mids = 0.5 * (curve.centers[:-1] + curve.centers[1:])
    hop_w = np.full(n_cells - 1, curve.tau / curve.T)
    pts = np.vstack([curve.centers, mids])
    w = np.concatenate([wait_w, hop_w])
    keep = w > 0
    w = w[keep] / w[keep].sum()
    return DiscreteMeasure(pts[keep], w, probability=True)


def curve_to_npoint(samples: SampledCurve, N: int) -> DiscreteMeasure:
    """Uniform atoms at the N equispaced times i*T/N, i = 0..N-1."""
    if N < 2:
        raise ValidationError("need at least two atoms")
    ts = samples.T * np.arange(N) / N
    return DiscreteMeasure(np.clip(samples.eval(ts), 0.0, 1.0),
                           np.full(N, 1.0 / N), probability=True)


def npoint_to_curve(s, spec: CurveConstraintSpec, samples_per_seg: int = 16) -> SampledCurve:
    """Piecewise-linear curve through a feasible chain, initial hold first.

    The curve sits at s(1) on [0, dt], then runs the linear segments; its
    speed never exceeds the chain's difference-quotient bound alpha_1.
    """
    s = np.asarray(s, dtype=float).reshape(spec.N, spec.dim)
    res = feasibility_residuals(spec, s.reshape(-1))
    if res.max() > 1e-9 * max(1.0, max(spec.alphas)):
        raise ValidationError(f"chain is infeasible (residuals {res})")
    T = spec.N * spec.dt
    knots_t = np.concatenate([[0.0], spec.dt * (np.arange(spec.N) + 1)])
    knots_x = np.vstack([s[:1], s])
    fine_t = [np.array([0.0])]
    for i in range(len(knots_t) - 1):
        seg = np.linspace(knots_t[i], knots_t[i + 1], samples_per_seg + 1)[1:]
        fine_t.append(seg)
    ts = np.concatenate(fine_t)
    pts = np.empty((len(ts), spec.dim))
    for a in range(spec.dim):
        pts[:, a] = np.interp(ts, knots_t, knots_x[:, a])
    return SampledCurve(ts=ts, points=pts, T=T)
