"""Feasible sets for discrete curves: the box and the derivative-ball sets.

A discrete curve is a flat vector s of length N*d (N samples of a d-point,
row major). ``DiffOperator`` applies the forward difference quotient D1 with
(D1 s)(1) = 0, or D2 = -D1^T D1. The curve set keeps every sample in the box
and every difference vector D_j s inside a mixed-norm ball: the norm takes
the Euclidean length of each of the N d-blocks, then an outer ell_q norm
over the blocks (q in {1, 2, inf}).

``project_curve_set`` computes the Euclidean projection onto the
intersection by accelerated proximal ascent on the dual: the box constraint
folds exactly into the strongly convex conjugate (a clamp per iteration),
and each norm ball contributes a prox that is a Moreau reflection of the
exact ball projection composed with D_j^T. The iterate is certified by its
feasibility residuals before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .measure import ValidationError


class ProjectionError(RuntimeError):
    """Dual ascent ran out of iterations; carries the last residuals."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class DiffOperator:
    """Discrete derivative of order 1 or 2 on N samples with step dt."""

    order: int
    N: int
    dim: int
    dt: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValidationError("difference order must be 1 or 2")
        if self.N < 1 or self.dt <= 0:
            raise ValidationError("need N >= 1 samples and dt > 0")

    def apply(self, s: np.ndarray) -> np.ndarray:
        s = self._blocks(s)
        if self.order == 1:
            return self._d1(s).reshape(-1)
        return -self._d1t(self._d1(s)).reshape(-1)

    def apply_adjoint(self, t: np.ndarray) -> np.ndarray:
        # D2 = -D1^T D1 is symmetric
        t = self._blocks(t)
        if self.order == 1:
            return self._d1t(t).reshape(-1)
        return -self._d1t(self._d1(t)).reshape(-1)

    def _blocks(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if len(v) != self.N * self.dim:
            raise ValidationError(
                f"expected a vector of length {self.N * self.dim}, got {len(v)}")
        return v.reshape(self.N, self.dim)

    def _d1(self, s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s)
        out[1:] = (s[1:] - s[:-1]) / self.dt
        return out

    def _d1t(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        out[:-1] = -t[1:] / self.dt
        out[1:] += t[1:] / self.dt
        return out


def apply_diff(op: DiffOperator, s) -> np.ndarray:
    return op.apply(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class CurveConstraintSpec:
    """Parameters of the discrete curve set: derivative bounds alpha_j."""

    m: int
    q: object          # 1, 2, or the string/float inf
    alphas: tuple
    N: int
    dim: int
    dt: float

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ValidationError("derivative order m must be 1 or 2")
        qq = _norm_q(self.q)
        object.__setattr__(self, "q", qq)
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) != self.m:
            raise ValidationError(f"need {self.m} alpha bounds, got {len(alphas)}")
        if any(a <= 0 or not np.isfinite(a) for a in alphas):
            raise ValidationError("alpha bounds must be positive and finite")
        object.__setattr__(self, "alphas", alphas)
        if self.N < 2:
            raise ValidationError("need at least two curve samples")
        if self.dt <= 0:
            raise ValidationError("need dt > 0")

    def operators(self):
        return tuple(DiffOperator(order=j + 1, N=self.N, dim=self.dim, dt=self.dt)
                     for j in range(self.m))


def _norm_q(q):
    if q in (1, 2):
        return int(q)
    if q in ("inf", "Inf", "INF", np.inf, float("inf")):
        return np.inf
    raise ValidationError(f"outer norm index must be 1, 2 or inf, got {q!r}")


def mixed_norm(v: np.ndarray, q, dim: int) -> float:
    """Outer ell_q over N blocks of the inner Euclidean block lengths."""
    norms = np.linalg.norm(np.asarray(v, dtype=float).reshape(-1, dim), axis=1)
    if q == 1:
        return float(norms.sum())
    if q == 2:
        return float(np.sqrt((norms * norms).sum()))
    return float(norms.max()) if len(norms) else 0.0


def project_mixed_ball(v: np.ndarray, q, radius: float, dim: int) -> np.ndarray:
    """Exact Euclidean projection onto {x : mixed_norm(x, q) <= radius}."""
    blocks = np.asarray(v, dtype=float).reshape(-1, dim).copy()
    norms = np.linalg.norm(blocks, axis=1)
    if q == np.inf:
        scale = np.ones_like(norms)
        over = norms > radius
        scale[over] = radius / norms[over]
        return (blocks * scale[:, None]).reshape(-1)
    if q == 2:
        total = np.sqrt((norms * norms).sum())
        if total <= radius:
            return blocks.reshape(-1)
        return (blocks * (radius / total)).reshape(-1)
    # q == 1: group soft threshold with the exact waterfilling level
    if norms.sum() <= radius:
        return blocks.reshape(-1)
    lam = _simplex_level(norms, radius)
    shrunk = np.maximum(norms - lam, 0.0)
    safe = np.where(norms > 0, norms, 1.0)
    return (blocks * (shrunk / safe)[:, None]).reshape(-1)


def _simplex_level(norms: np.ndarray, radius: float) -> float:
    srt = np.sort(norms)[::-1]
    csum = np.cumsum(srt)
    k = np.arange(1, len(srt) + 1)
    lam_cand = (csum - radius) / k
    ok = srt - lam_cand > 0
    k_star = int(np.max(np.nonzero(ok)[0]))
    return float(lam_cand[k_star])


def project_box(s) -> np.ndarray:
    """Coordinatewise clamp to [0, 1]."""
    return np.clip(np.asarray(s, dtype=float), 0.0, 1.0)


def feasibility_residuals(spec: CurveConstraintSpec, s) -> np.ndarray:
    """Residual vector [r_1, ..., r_m, box] with r_j = max(0, |D_j s|_q - a_j)."""
    s = np.asarray(s, dtype=float).reshape(-1)
    res = []
    for op, alpha in zip(spec.operators(), spec.alphas):
        res.append(max(0.0, mixed_norm(op.apply(s), spec.q, spec.dim) - alpha))
    box = max(0.0, float(-s.min()), float(s.max() - 1.0))
    res.append(box)
    return np.array(res)


def _dual_mixed_norm(v: np.ndarray, q, dim: int) -> float:
    """Dual of the mixed norm: blockwise L2 with the conjugate outer index."""
    norms = np.linalg.norm(np.asarray(v, dtype=float).reshape(-1, dim), axis=1)
    if q == 1:
        return float(norms.max()) if len(norms) else 0.0
    if q == 2:
        return float(np.sqrt((norms * norms).sum()))
    return float(norms.sum())


def _operator_norm_sq(spec: CurveConstraintSpec) -> float:
    return _opnorm_cached(spec.m, spec.N, spec.dim, spec.dt)


@lru_cache(maxsize=128)
def _opnorm_cached(m: int, N: int, dim: int, dt: float, iters: int = 200) -> float:
    """Power iteration for lambda_max(sum_j D_j^T D_j), with 2% headroom."""
    ops = [DiffOperator(order=j + 1, N=N, dim=dim, dt=dt) for j in range(m)]
    rng = np.random.default_rng(7)
    v = rng.standard_normal(N * dim)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = np.zeros_like(v)
        for op in ops:
            w += op.apply_adjoint(op.apply(v))
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 1.0
        v = w / lam
    return 1.02 * lam


def project_curve_set(spec: CurveConstraintSpec, z, tol: float = 1e-8,
                      max_iter: int = 10000, warm_start=None):
    """Euclidean projection of z onto the curve set, within tolerance.

    Returns ``(s, info)`` where s satisfies the box exactly, every norm
    constraint within alpha_j * tol, and whose squared-distance objective is
    certified within tol of the optimum by the Fenchel dual value. ``info``
    carries the dual state for warm starting plus the final residuals.
    Raises ProjectionError when certification fails within ``max_iter``.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    z = np.asarray(z, dtype=float).reshape(-1)
    ops = spec.operators()
    res0 = feasibility_residuals(spec, z)
    if res0.max() <= 0.0:
        return z.copy(), {"iterations": 0, "residuals": res0, "duals": None}

    lip = _operator_norm_sq(spec)
    step = 1.0 / lip
    m = spec.m
    if warm_start is not None and len(warm_start) == m:
        y = [np.array(w, dtype=float) for w in warm_start]
    else:
        y = [np.zeros(spec.N * spec.dim) for _ in range(m)]
    y_prev = [v.copy() for v in y]
    t_mom = 1.0
    s = project_box(z - sum(op.apply_adjoint(v) for op, v in zip(ops, y)))

    check_every = 10
    for it in range(1, max_iter + 1):
        beta = (t_mom - 1.0) / (t_mom + 2.0)
        y_ext = [v + beta * (v - vp) for v, vp in zip(y, y_prev)]
        s = project_box(z - sum(op.apply_adjoint(v) for op, v in zip(ops, y_ext)))
        y_next = []
        for op, v_ext, alpha in zip(ops, y_ext, spec.alphas):
            w = v_ext + step * op.apply(s)
            ball = project_mixed_ball(w / step, spec.q, alpha, spec.dim) * step
            y_next.append(w - ball)
        # adaptive restart when the momentum turns against the prox step
        if sum(float((e - a) @ (a - b)) for a, b, e in zip(y_next, y, y_ext)) > 0:
            t_mom = 1.0
        else:
            t_mom += 1.0
        y_prev, y = y, y_next

        if it % check_every == 0 or it == max_iter:
            w = -sum(op.apply_adjoint(v) for op, v in zip(ops, y))
            s = project_box(z + w)
            res = feasibility_residuals(spec, s)
            primal = 0.5 * float((s - z) @ (s - z))
            dual = -(float(w @ s) - primal) - sum(
                alpha * _dual_mixed_norm(v, spec.q, spec.dim)
                for alpha, v in zip(spec.alphas, y))
            feas_ok = all(res[j] <= spec.alphas[j] * tol for j in range(m))
            gap_ok = primal - dual <= tol * max(1.0, primal)
            if feas_ok and gap_ok:
                return s, {"iterations": it, "residuals": res, "duals": y,
                           "primal": primal, "dual": dual}

    raise ProjectionError(
        f"projection did not certify optimality in {max_iter} iterations",
        residuals=feasibility_residuals(spec, s))
