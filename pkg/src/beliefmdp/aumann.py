"""Triangular noise maps realizing exactly-known kernels on the unit cube.

Given a kernel whose slices are known in closed form, one can synthesize a
map ``phi(s2, omega)`` on the open unit cube, uniform omega, whose
pushforward reproduces the kernel: coordinate j applies the conditional
quantile of x_j given (s2, x_1..x_{j-1}) to omega_j.  Each component is
nondecreasing in its own omega coordinate by construction.

Two kernel families are supported exactly: finite-support tables with
parameter-dependent probabilities, and Gaussian families with
parameter-dependent mean and covariance (where the triangular map is
``mean(s2) + L(s2) @ ndtri(omega)`` with L the Cholesky factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .diffeo import noise_jacobian
from .noise import Box

__all__ = [
    "FiniteSupportKernel",
    "GaussianFamilyKernel",
    "gaussian_correlation_kernel",
    "AumannMap",
    "build_aumann_map",
]


@dataclass(frozen=True)
class FiniteSupportKernel:
    """Kernel with finitely many outcomes; probabilities may depend on s2."""

    atoms: np.ndarray                                 # (K, n) outcome points
    probs: Callable[[np.ndarray], np.ndarray] | np.ndarray  # (K,) weights, possibly s2-dependent

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        object.__setattr__(self, "atoms", atoms)

    def weights(self, s2) -> np.ndarray:
        w = self.probs(s2) if callable(self.probs) else self.probs
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != self.atoms.shape[0]:
            raise ValueError("probability vector length does not match atoms")
        if np.any(w < 0) or abs(float(np.sum(w)) - 1.0) > 1e-9:
            raise ValueError("probabilities must be a distribution")
        return w / float(np.sum(w))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class GaussianFamilyKernel:
    """Gaussian kernel slices N(mean(s2), cov(s2)) with nonsingular covariance."""

    mean: Callable[[np.ndarray], np.ndarray]
    cov: Callable[[np.ndarray], np.ndarray]
    dim: int


def gaussian_correlation_kernel() -> GaussianFamilyKernel:
    """Bivariate standard Gaussian with correlation s2 in (-1, 1)."""

    def mean(s2):
        return np.zeros(2)

    def cov(s2):
        r = float(np.asarray(s2).reshape(-1)[0])
        if not -1.0 < r < 1.0:
            raise ValueError("correlation parameter must lie in (-1, 1)")
        return np.array([[1.0, r], [r, 1.0]])

    return GaussianFamilyKernel(mean=mean, cov=cov, dim=2)


@dataclass(frozen=True)
class AumannMap:
    """Triangular map on the open unit cube realizing a known kernel.

    ``evaluate(s2, omegas)`` pushes uniform draws through the map;
    ``jacobian_det`` uses central differences (the triangular structure is
    not exploited, so the determinant check is an independent probe).
    """

    dim: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    domain: Box = field(default=None)  # open unit cube, set in __post_init__
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.domain is None:
            object.__setattr__(self, "domain", Box(np.zeros(self.dim), np.ones(self.dim)))

    def __call__(self, s2, omegas: np.ndarray) -> np.ndarray:
        return self.evaluate(s2, omegas)

    def jacobian_det(self, s2, omegas: np.ndarray, step_scale: float = 1e-5) -> np.ndarray:
        J = noise_jacobian(self.evaluate, s2, np.atleast_2d(omegas), step_scale)
        return np.linalg.det(J)


def _finite_support_map(kernel: FiniteSupportKernel) -> AumannMap:
    atoms = kernel.atoms
    n = kernel.dim
    # lexicographic order fixes the triangular conditioning chain
    order = np.lexsort(tuple(atoms[:, j] for j in reversed(range(n))))
    sorted_atoms = atoms[order]

    def evaluate(s2, omegas):
        om = np.atleast_2d(np.asarray(omegas, dtype=float))
        if om.shape[1] != n:
            raise ValueError(f"omega must have dimension {n}")
        w = kernel.weights(s2)[order]
        out = np.empty_like(om)
        # active[i] marks atoms still consistent with the chosen prefix
        active = np.ones((om.shape[0], atoms.shape[0]), dtype=bool)
        for j in range(n):
            col = sorted_atoms[:, j]
            masses = np.where(active, w, 0.0)
            totals = masses.sum(axis=1, keepdims=True)
            # conditional CDF of coordinate j given the prefix, then the
            # right-continuous quantile at omega_j
            uniq = np.unique(col)
            cdf = np.zeros((om.shape[0], uniq.size))
            for u_idx, u in enumerate(uniq):
                cdf[:, u_idx] = masses[:, col <= u].sum(axis=1)
            cdf /= np.maximum(totals, 1e-300)
            pick = (cdf >= om[:, j : j + 1] - 1e-15).argmax(axis=1)
            chosen = uniq[pick]
            out[:, j] = chosen
            active &= np.abs(col[None, :] - chosen[:, None]) <= 1e-12
        return out

    return AumannMap(dim=n, evaluate=evaluate, source={"family": "finite_support"})


def _gaussian_family_map(kernel: GaussianFamilyKernel) -> AumannMap:
    n = kernel.dim

    def evaluate(s2, omegas):
        om = np.clip(np.atleast_2d(np.asarray(omegas, dtype=float)), 1e-300, 1.0 - 1e-16)
        if om.shape[1] != n:
            raise ValueError(f"omega must have dimension {n}")
        m = np.asarray(kernel.mean(s2), dtype=float).reshape(n)
        C = np.asarray(kernel.cov(s2), dtype=float).reshape(n, n)
        L = np.linalg.cholesky(C)  # raises on singular covariance
        z = special.ndtri(om)
        return m + z @ L.T

    return AumannMap(dim=n, evaluate=evaluate, source={"family": "gaussian"})


def build_aumann_map(kernel: FiniteSupportKernel | GaussianFamilyKernel) -> AumannMap:
    """Synthesize the triangular unit-cube map realizing the given kernel."""
    if isinstance(kernel, FiniteSupportKernel):
        return _finite_support_map(kernel)
    if isinstance(kernel, GaussianFamilyKernel):
        return _gaussian_family_map(kernel)
    raise TypeError(f"unsupported kernel family: {type(kernel)!r}")
