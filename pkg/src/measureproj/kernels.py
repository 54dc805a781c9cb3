"""Interaction kernels H and the smoothing filter h.

Three kernel families drive the particle energy:

* ``l1s``   smoothed L1 norm, sum_a sqrt(x_a^2 + eps^2)
* ``gauss`` gaussian bump, exp(-|x|^2 / (2 sigma^2))
* ``l2s``   smoothed L2 norm, sqrt(|x|^2 + eps^2)

All are even with an analytic gradient and a known gradient-Lipschitz
constant. The gaussian is kept positive: with the energy J = F - G this is
the orientation for which gradient descent spreads particles apart and pulls
them onto the target mass (the smoothed norms have the opposite orientation,
their raw gradients point particles apart instead).

``FilterSpec`` is the paired low-pass filter h used by the Fourier-domain
energy oracle; only the gaussian filter is supported there, since its
periodization has strictly positive Fourier coefficients and a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import ValidationError

KERNEL_KINDS = ("l1s", "gauss", "l2s")


@dataclass(frozen=True)
class KernelSpec:
    """Interaction kernel selector with its smoothing parameter."""

    kind: str = "l1s"
    eps: float = 0.05
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}, want one of {KERNEL_KINDS}")
        if self.kind in ("l1s", "l2s") and not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValidationError("smoothed norms need eps > 0")
        if self.kind == "gauss" and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError("gaussian kernel needs sigma > 0")

    @property
    def grad_lipschitz(self) -> float:
        return lipschitz_of_grad(self)


def eval_H(k: KernelSpec, x) -> np.ndarray:
    """Kernel value at displacement(s) x, vectorized over leading axes.

    x has shape (..., d); the result drops the last axis.
    """
    x = np.asarray(x, dtype=float)
    if k.kind == "l1s":
        return np.sqrt(x * x + k.eps * k.eps).sum(axis=-1)
    if k.kind == "gauss":
        return np.exp(-(x * x).sum(axis=-1) / (2.0 * k.sigma * k.sigma))
    r2 = (x * x).sum(axis=-1)
    return np.sqrt(r2 + k.eps * k.eps)


def grad_H(k: KernelSpec, x) -> np.ndarray:
    """Analytic gradient of H at x, same shape as x."""
    x = np.asarray(x, dtype=float)
    if k.kind == "l1s":
        return x / np.sqrt(x * x + k.eps * k.eps)
    if k.kind == "gauss":
        s2 = k.sigma * k.sigma
        g = np.exp(-(x * x).sum(axis=-1, keepdims=True) / (2.0 * s2))
        return -(x / s2) * g
    r2 = (x * x).sum(axis=-1, keepdims=True)
    return x / np.sqrt(r2 + k.eps * k.eps)


def lipschitz_of_grad(k: KernelSpec) -> float:
    """Upper bound on |grad H(x) - grad H(y)| / |x - y|.

    The smoothed norms have diagonal (l1s) or rank-one-corrected (l2s)
    Hessians with spectral norm at most 1/eps; the gaussian Hessian peaks at
    the origin with norm 1/sigma^2.
    """
    if k.kind == "gauss":
        return 1.0 / (k.sigma * k.sigma)
    return 1.0 / k.eps


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass filter h for the smoothed-L2 energy; gaussian only."""

    kind: str = "gauss"
    sigma: float = 0.05

    def __post_init__(self):
        if self.kind != "gauss":
            raise ValidationError("only the gaussian filter is supported")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError("filter needs sigma > 0")

    def fourier_coeff(self, xi: np.ndarray) -> np.ndarray:
        """Fourier series coefficients of the periodized gaussian at integer
        frequencies xi (shape (..., d)). All strictly positive."""
        xi = np.asarray(xi, dtype=float)
        d = xi.shape[-1]
        amp = (math.sqrt(2.0 * math.pi) * self.sigma) ** d
        return amp * np.exp(-2.0 * math.pi ** 2 * self.sigma ** 2 * (xi * xi).sum(axis=-1))

    def freq_cutoff(self) -> int:
        """Frequency K beyond which |h_hat|^2 is below 1e-20 of its peak."""
        return max(2, math.ceil(math.sqrt(20.0 * math.log(10.0)) / (2.0 * math.pi * self.sigma)))

    def lipschitz(self, dim: int) -> float:
        """Certified Lipschitz constant of the periodized h on the torus,
        with respect to the L1 ground metric (bounds sup |dh/dx_a|).

        Uses |d_a h| <= sum_xi 2 pi |xi_a| h_hat(xi) over the truncated
        frequency set; the gaussian tail beyond the cutoff is negligible.
        """
        K = self.freq_cutoff()
        ax = np.arange(-K, K + 1, dtype=float)
        grids = np.meshgrid(*([ax] * dim), indexing="ij")
        xi = np.stack([g.reshape(-1) for g in grids], axis=1)
        coeff = self.fourier_coeff(xi)
        return float((2.0 * math.pi * np.abs(xi[:, 0]) * coeff).sum())

    def sample_periodized(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the periodized gaussian at points x (shape (..., d)).

        Separable product over axes; image copies are kept out to 6 sigma.
        """
        x = np.asarray(x, dtype=float)
        reach = max(1, math.ceil(6 * self.sigma))
        out = np.ones(x.shape[:-1])
        for a in range(x.shape[-1]):
            acc = np.zeros(x.shape[:-1])
            for c in range(-reach, reach + 1):
                acc += np.exp(-((x[..., a] - c) ** 2) / (2.0 * self.sigma ** 2))
            out = out * acc
        return out
