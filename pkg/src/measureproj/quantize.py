"""Constructive N-point quantizer: cube partition plus mass-rounding sweep.

The unit cube is split into C^d subcubes with C = floor(N^(1/d)), the target
mass of every subcube is placed at its center, and the masses are rounded to
multiples of 1/N along a serpentine cell order, pushing each remainder into
the next cell. Because consecutive cells are face-adjacent, every rounding
step transports less than 1/N of mass over a single cell width, which keeps
the output within (sqrt(d)/2 + 1) / (N^(1/d) - 1) of the target in W1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import DiscreteMeasure, GridDensity, ValidationError


@dataclass(frozen=True)
class CubePartition:
    """Serpentine-ordered partition of [0,1]^d into C^d cubes."""

    C: int
    dim: int
    order: tuple  # cell index tuples, consecutive entries face-adjacent

    @property
    def centers(self) -> np.ndarray:
        idx = np.array(self.order, dtype=float)
        return (idx + 0.5) / self.C

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Map points to cell index tuples; cells are lower-closed, the top
        face of the cube falls into the last cell."""
        idx = np.floor(np.asarray(points) * self.C).astype(int)
        return np.clip(idx, 0, self.C - 1)


def _serpentine_indices(C: int, dim: int) -> list:
    if dim == 1:
        return [(i,) for i in range(C)]
    inner = _serpentine_indices(C, dim - 1)
    out = []
    for layer in range(C):
        block = inner if layer % 2 == 0 else inner[::-1]
        out.extend(cell + (layer,) for cell in block)
    return out


def serpentine_order(C: int, dim: int) -> CubePartition:
    """Boustrophedon ordering of the C^d cells of the cube partition."""
    if C < 1:
        raise ValidationError("need at least one cell per axis")
    if dim not in (1, 2, 3):
        raise ValidationError(f"dimension must be 1, 2 or 3, got {dim}")
    return CubePartition(C=C, dim=dim, order=tuple(_serpentine_indices(C, dim)))


def cell_masses(target, part: CubePartition) -> np.ndarray:
    """Target mass of every partition cell, in serpentine order.

    Discrete targets use point-in-cell assignment (lower-closed cells); grid
    targets are integrated exactly, treating each grid cell's mass as uniform
    over the cell and summing axis-overlap fractions.
    """
    if isinstance(target, DiscreteMeasure):
        cells = part.cell_of(target.points)
        acc = np.zeros((part.C,) * part.dim)
        np.add.at(acc, tuple(cells.T), target.weights)
    elif isinstance(target, GridDensity):
        acc = _grid_cell_masses(target, part)
    else:
        raise ValidationError(f"unsupported target type {type(target).__name__}")
    return np.array([acc[idx] for idx in part.order])


def _axis_overlap(C: int, n: int) -> np.ndarray:
    """(C, n) matrix of overlap fractions between partition intervals of
    width 1/C and grid intervals of width 1/n (fraction of the grid cell)."""
    lo = np.maximum(np.arange(C)[:, None] / C, np.arange(n)[None, :] / n)
    hi = np.minimum((np.arange(C)[:, None] + 1) / C, (np.arange(n)[None, :] + 1) / n)
    return np.maximum(hi - lo, 0.0) * n


def _grid_cell_masses(target: GridDensity, part: CubePartition) -> np.ndarray:
    mass = target.masses * target.quad_weights
    ov = [_axis_overlap(part.C, n) for n in target.dims]
    if part.dim == 1:
        return ov[0] @ mass
    if part.dim == 2:
        return np.einsum("ai,bj,ij->ab", ov[0], ov[1], mass)
    return np.einsum("ai,bj,ck,ijk->abc", ov[0], ov[1], ov[2], mass)


def rounding_recursion(masses: np.ndarray, N: int):
    """Round cell masses to integer multiples of 1/N along the given order.

    Works in units of 1/N: each cell keeps floor(N * mass) counts and hands
    the remainder to the next cell. Returns (counts, trace) where trace holds
    every intermediate mass vector (each sums to 1 exactly up to floats).
    """
    a = np.asarray(masses, dtype=float) * N
    counts = np.zeros(len(a), dtype=int)
    trace = [a.copy() / N]
    carry = 0.0
    for i, ai in enumerate(a):
        val = ai + carry
        if i + 1 == len(a):
            k = int(round(val))
            if abs(val - k) > 1e-6:
                raise AssertionError(f"mass leak in rounding sweep: {val!r}")
        else:
            # guard against float sums sitting a hair under an integer
            k = int(np.floor(val + 1e-9))
        counts[i] = k
        carry = val - k
        step = a.copy()
        step[: i + 1] = counts[: i + 1]
        if i + 1 < len(a):
            step[i + 1] += carry
        trace.append(step / N)
    if counts.sum() != N:
        raise AssertionError(f"rounded counts sum to {counts.sum()}, want {N}")
    return counts, trace


def cube_quantize(target, N: int, jitter: float = 0.0, seed: int = 0) -> DiscreteMeasure:
    """Quantize a probability target into a uniform N-point measure.

    Points may repeat (atoms of mass k/N at cell centers). ``jitter`` > 0
    spreads repeated points by at most half a cell width for rendering; it is
    off by default and destroys none of the mass.
    """
    if N < 1:
        raise ValidationError("need N >= 1 points")
    dim = target.dim
    C = max(1, int(np.floor(N ** (1.0 / dim) + 1e-9)))
    part = serpentine_order(C, dim)
    masses = cell_masses(target, part)
    total = masses.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"target is not a probability measure (mass {total!r})")
    counts, _ = rounding_recursion(masses / total, N)
    centers = part.centers
    pts = np.repeat(centers, counts, axis=0)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        half_cell = 0.5 / C
        reps = np.repeat(counts, counts)
        noise = (rng.random(pts.shape) - 0.5) * 2 * min(jitter, half_cell)
        pts = np.clip(np.where(reps[:, None] > 1, pts + noise, pts), 0.0, 1.0)
    return DiscreteMeasure(pts, np.full(N, 1.0 / N), probability=True)


def quantizer_bound(N: int, dim: int) -> float:
    """Guaranteed W1 radius of the cube quantizer for N points in d dims."""
    root = N ** (1.0 / dim)
    if root <= 1:
        return float("inf")
    return (np.sqrt(dim) / 2.0 + 1.0) / (root - 1.0)
