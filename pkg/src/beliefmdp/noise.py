"""Primitive noise distributions driving state and observation equations.

A :class:`NoiseDistribution` bundles a seeded sampler with the optional
analytic pieces the diagnostics need: a Lebesgue density, a triangular
inverse-CDF map on the unit cube, and an open-box support description.
Laws without a density (point masses, singular Gaussians) leave ``density``
unset; downstream code switches estimators on that basis rather than
guessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .seeding import substream

__all__ = [
    "Box",
    "NoiseDistribution",
    "gaussian",
    "uniform_box",
    "point_mass",
    "exponential",
]

_TRUNCATION_EPS = 1e-6  # default per-coordinate tail mass cut for grid diagnostics


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, used both as open support and as truncation window."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(hi < lo):
            raise ValueError("box upper bounds below lower bounds")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, points: np.ndarray, *, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class NoiseDistribution:
    """A noise law with seeded sampling and optional analytic structure.

    Attributes
    ----------
    dim : int
        Dimension of one draw.
    kind : str
        Identifier used for serialization ("gaussian", "uniform", ...).
    params : dict
        JSON-serializable parameters that rebuild the law.
    density : callable or None
        Vectorized Lebesgue density, ``(k, dim) -> (k,)``.  None when the
        law has no density with respect to Lebesgue measure.
    inverse_cdf : callable or None
        Triangular quantile map ``(k, dim) in (0,1)^dim -> (k, dim)`` pushing
        the uniform law on the cube onto this law.
    support : Box or None
        Open box carrying all the mass, when one exists.
    """

    dim: int
    kind: str
    params: dict
    _sampler: Callable[[np.random.Generator, int], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray] | None = None
    inverse_cdf: Callable[[np.ndarray], np.ndarray] | None = None
    support: Box | None = None
    _quantile_box: Callable[[float], Box] | None = field(default=None, repr=False)

    def sample(self, seed: int, count: int) -> np.ndarray:
        """Draw ``count`` points, deterministically in (self, seed, count)."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        rng = substream(seed, "noise", self.kind)
        out = self._sampler(rng, count)
        return np.asarray(out, dtype=float).reshape(count, self.dim)

    def truncated_box(self, eps: float = _TRUNCATION_EPS) -> Box:
        """Box holding all but ``eps`` tail mass per coordinate.

        Used as the finite omega-domain for grid diagnostics and Newton
        inversion starts when the support itself is unbounded.
        """
        if self._quantile_box is not None:
            return self._quantile_box(eps)
        if self.support is not None and np.all(np.isfinite(self.support.lo)) and np.all(
            np.isfinite(self.support.hi)
        ):
            return self.support
        # fallback: empirical box from a fixed pilot sample, padded 10%
        pts = self.sample(0, 4096)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = 0.1 * np.maximum(hi - lo, 1e-12)
        return Box(lo - pad, hi + pad)


def _factor_psd(cov: np.ndarray) -> np.ndarray:
    """Square root factor L with L @ L.T = cov, valid for singular PSD cov."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    w, v = np.linalg.eigh(cov)
    if np.any(w < -1e-10 * max(1.0, float(np.max(np.abs(w))))):
        raise ValueError("covariance must be positive semidefinite")
    return v * np.sqrt(np.clip(w, 0.0, None))


def gaussian(mean, cov) -> NoiseDistribution:
    """Gaussian law N(mean, cov); cov may be singular (then no density)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dim = mean.shape[0]
    if cov.shape != (dim, dim):
        raise ValueError("covariance shape does not match mean")
    factor = _factor_psd(cov)
    # tolerance relative to the top eigenvalue: tiny-but-positive variances
    # keep their density, exact rank deficiency does not
    rank = int(np.linalg.matrix_rank(cov, tol=None))
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    def _sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        z = rng.standard_normal((count, dim))
        return mean + z @ factor.T

    density = None
    inverse_cdf = None
    if rank == dim:
        chol = np.linalg.cholesky(cov)
        log_norm = -0.5 * dim * np.log(2.0 * np.pi) - 0.5 * float(
            np.linalg.slogdet(cov)[1]
        )
        inv = np.linalg.inv(cov)

        def density(points: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(points, dtype=float)) - mean
            q = np.einsum("ki,ij,kj->k", pts, inv, pts)
            return np.exp(log_norm - 0.5 * q)

        def inverse_cdf(u: np.ndarray) -> np.ndarray:
            z = special.ndtri(np.clip(np.atleast_2d(u), 1e-300, 1.0 - 1e-16))
            return mean + z @ chol.T

    def _quantile_box(eps: float) -> Box:
        z = float(special.ndtri(1.0 - eps))
        return Box(mean - z * sd, mean + z * sd)

    return NoiseDistribution(
        dim=dim,
        kind="gaussian",
        params={"mean": mean.tolist(), "cov": cov.tolist()},
        _sampler=_sampler,
        density=density,
        inverse_cdf=inverse_cdf,
        support=None,
        _quantile_box=_quantile_box,
    )


def uniform_box(lo, hi) -> NoiseDistribution:
    """Uniform law on the open box (lo, hi)."""
    box = Box(lo, hi)
    if np.any(box.widths <= 0):
        raise ValueError("uniform box must have positive widths")
    vol = float(np.prod(box.widths))

    def _sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(box.lo, box.hi, size=(count, box.dim))

    def density(points: np.ndarray) -> np.ndarray:
        inside = box.contains(points)
        return np.where(inside, 1.0 / vol, 0.0)

    def inverse_cdf(u: np.ndarray) -> np.ndarray:
        return box.lo + np.atleast_2d(u) * box.widths

    return NoiseDistribution(
        dim=box.dim,
        kind="uniform",
        params={"lo": box.lo.tolist(), "hi": box.hi.tolist()},
        _sampler=_sampler,
        density=density,
        inverse_cdf=inverse_cdf,
        support=box,
        _quantile_box=lambda eps: box,
    )


def point_mass(value) -> NoiseDistribution:
    """Deterministic law concentrated at one point; no Lebesgue density."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    dim = value.shape[0]

    def _sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        return np.tile(value, (count, 1))

    def inverse_cdf(u: np.ndarray) -> np.ndarray:
        return np.tile(value, (np.atleast_2d(u).shape[0], 1))

    eps_box = Box(value - 1e-9, value + 1e-9)
    return NoiseDistribution(
        dim=dim,
        kind="point_mass",
        params={"value": value.tolist()},
        _sampler=_sampler,
        density=None,
        inverse_cdf=inverse_cdf,
        support=None,
        _quantile_box=lambda eps: eps_box,
    )


def exponential(scale, dim: int = 1) -> NoiseDistribution:
    """Product of exponential laws with the given scale (mean) per coordinate."""
    scale_vec = np.broadcast_to(np.asarray(scale, dtype=float), (dim,)).copy()
    if np.any(scale_vec <= 0):
        raise ValueError("exponential scale must be positive")

    def _sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.exponential(scale_vec, size=(count, dim))

    def density(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(pts >= 0.0, axis=1)
        vals = np.exp(-np.sum(np.where(pts >= 0, pts, 0.0) / scale_vec, axis=1))
        return np.where(inside, vals / float(np.prod(scale_vec)), 0.0)

    def inverse_cdf(u: np.ndarray) -> np.ndarray:
        u = np.clip(np.atleast_2d(u), 1e-300, 1.0 - 1e-16)
        return -scale_vec * np.log1p(-u)

    def _quantile_box(eps: float) -> Box:
        hi = -scale_vec * np.log(eps)
        return Box(np.zeros(dim), hi)

    return NoiseDistribution(
        dim=dim,
        kind="exponential",
        params={"scale": scale_vec.tolist(), "dim": dim},
        _sampler=_sampler,
        density=density,
        inverse_cdf=inverse_cdf,
        support=Box(np.zeros(dim), np.full(dim, np.inf)),
        _quantile_box=_quantile_box,
    )


_NOISE_BUILDERS: dict[str, Callable[..., NoiseDistribution]] = {
    "gaussian": lambda params: gaussian(params["mean"], params["cov"]),
    "uniform": lambda params: uniform_box(params["lo"], params["hi"]),
    "point_mass": lambda params: point_mass(params["value"]),
    "exponential": lambda params: exponential(params["scale"], int(params["dim"])),
}


def noise_to_json(dist: NoiseDistribution) -> dict:
    blob = {"kind": dist.kind, "params": dist.params}
    if dist.support is not None:
        blob["support"] = {"lo": dist.support.lo.tolist(), "hi": dist.support.hi.tolist()}
    else:
        blob["support"] = None
    return blob


def noise_from_json(blob: dict) -> NoiseDistribution:
    kind = blob.get("kind")
    if kind not in _NOISE_BUILDERS:
        raise ValueError(f"unknown noise kind: {kind!r}")
    return _NOISE_BUILDERS[kind](blob.get("params", {}))
