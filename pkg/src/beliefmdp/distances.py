"""Distances between kernel estimates.

Total variation is computed exactly (half L1) for two densities on one
grid, and as a coupled upper bound (fraction of differing atoms) for two
empirical estimates drawn with matched seeds.  The bounded-Lipschitz
distance is a sup over a seeded dictionary of 1-Lipschitz test functions
clipped to [-1, 1], so it lower-bounds the dual-BL metric and is bounded
by 2x total variation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import EmpiricalKernel, GriddedKernel, KernelEstimate
from .seeding import substream

__all__ = [
    "DistanceEstimate",
    "GridMismatchError",
    "UnmatchedSamplesError",
    "tv_distance",
    "bl_distance",
    "make_bl_dictionary",
    "integrate_kernel",
]

_ATOM_TOL = 1e-9


class GridMismatchError(ValueError):
    """Gridded estimates live on different grids."""


class UnmatchedSamplesError(ValueError):
    """Empirical estimates were not drawn with matched seeds and sizes."""


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    band: float   # 3-sigma Monte Carlo band; 0 for deterministic routes
    mode: str

    def to_json(self) -> dict:
        return {"value": self.value, "band": self.band, "mode": self.mode}


def _check_matched(k1: EmpiricalKernel, k2: EmpiricalKernel) -> None:
    if k1.n_points != k2.n_points:
        raise UnmatchedSamplesError("empirical estimates have different sizes")
    s1, s2 = k1.source.get("seed"), k2.source.get("seed")
    if s1 is None or s1 != s2:
        raise UnmatchedSamplesError(
            "empirical TV needs a common-random-number coupling (same seed)"
        )


def tv_distance(k1: KernelEstimate, k2: KernelEstimate, atom_tol: float = _ATOM_TOL) -> DistanceEstimate:
    """Total variation between two kernel estimates.

    Gridded pair: exact half-L1 of the densities on the shared grid.
    Empirical pair (matched seeds): fraction of coupled atoms differing by
    more than ``atom_tol``, an upper bound on the TV of the coupled laws.
    """
    if isinstance(k1, GriddedKernel) and isinstance(k2, GriddedKernel):
        if len(k1.axes) != len(k2.axes) or any(
            ax1.shape != ax2.shape or not np.array_equal(ax1, ax2)
            for ax1, ax2 in zip(k1.axes, k2.axes)
        ):
            raise GridMismatchError("gridded TV needs identical grids")
        val = 0.5 * float(np.sum(np.abs(k1.values - k2.values))) * k1.cell_volume()
        return DistanceEstimate(value=val, band=0.0, mode="density_l1")
    if isinstance(k1, EmpiricalKernel) and isinstance(k2, EmpiricalKernel):
        _check_matched(k1, k2)
        n = k1.n_points
        differ = np.max(np.abs(k1.points - k2.points), axis=1) > atom_tol
        frac = float(np.mean(differ))
        band = 3.0 * float(np.sqrt(frac * (1.0 - frac) / n))
        return DistanceEstimate(value=frac, band=band, mode="coupled_upper_bound")
    raise TypeError("tv_distance needs two estimates of the same representation")


def make_bl_dictionary(dim: int, anchors: np.ndarray, size: int = 256, seed: int = 0) -> list:
    """Seeded dictionary of test functions with Lipschitz constant <= 1 and
    sup-norm <= 1: the constant, centered coordinate clips, and random
    ramp functions with offsets drawn from the anchor range."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    center = np.median(anchors, axis=0)
    fns = [("const", lambda x: np.ones(np.atleast_2d(x).shape[0]))]
    for j in range(dim):
        fns.append(
            (f"coord{j}", lambda x, j=j: np.clip(np.atleast_2d(x)[:, j] - center[j], -1.0, 1.0))
        )
    rng = substream(seed, "bl_dictionary")
    lo = anchors.min(axis=0)
    hi = anchors.max(axis=0)
    while len(fns) < size:
        w = rng.standard_normal(dim)
        norm = float(np.linalg.norm(w))
        if norm < 1e-12:
            continue
        w = w / norm
        proj_lo = float(np.minimum(w, 0.0) @ hi + np.maximum(w, 0.0) @ lo)
        proj_hi = float(np.maximum(w, 0.0) @ hi + np.minimum(w, 0.0) @ lo)
        c = rng.uniform(proj_lo, proj_hi)
        if len(fns) % 2 == 0:
            fns.append(("ramp+", lambda x, w=w, c=c: np.clip(np.atleast_2d(x) @ w - c, 0.0, 1.0)))
        else:
            fns.append(("ramp-", lambda x, w=w, c=c: np.clip(c - np.atleast_2d(x) @ w, 0.0, 1.0)))
    return fns[:size]


def integrate_kernel(f, est: KernelEstimate) -> float:
    """Integral of a test function against a kernel estimate."""
    if isinstance(est, EmpiricalKernel):
        return float(est.weights @ np.asarray(f(est.points), dtype=float))
    if isinstance(est, GriddedKernel):
        vals = np.asarray(f(est.grid_points()), dtype=float)
        return float(np.sum(vals * est.values) * est.cell_volume())
    raise TypeError(f"not a kernel estimate: {type(est)!r}")


def bl_distance(
    k1: KernelEstimate,
    k2: KernelEstimate,
    dictionary_size: int = 256,
    seed: int = 0,
) -> DistanceEstimate:
    """Dictionary bounded-Lipschitz distance: sup over test functions of the
    difference of integrals.  Deterministic given (estimates, seed)."""
    if isinstance(k1, EmpiricalKernel):
        anchors = [k1.points]
    else:
        anchors = [k1.grid_points()]
    anchors.append(k2.points if isinstance(k2, EmpiricalKernel) else k2.grid_points())
    pooled = np.concatenate(anchors, axis=0)
    dim = pooled.shape[1]
    fns = make_bl_dictionary(dim, pooled, dictionary_size, seed)

    best = 0.0
    best_diff_se = 0.0
    coupled = (
        isinstance(k1, EmpiricalKernel)
        and isinstance(k2, EmpiricalKernel)
        and k1.n_points == k2.n_points
        and k1.source.get("seed") is not None
        and k1.source.get("seed") == k2.source.get("seed")
    )
    for _, f in fns:
        v1 = integrate_kernel(f, k1)
        v2 = integrate_kernel(f, k2)
        gap = abs(v1 - v2)
        if gap >= best:
            best = gap
            if coupled:
                d = np.asarray(f(k1.points), dtype=float) - np.asarray(f(k2.points), dtype=float)
                best_diff_se = float(np.std(d) / np.sqrt(d.shape[0]))
            elif isinstance(k1, EmpiricalKernel) and isinstance(k2, EmpiricalKernel):
                f1 = np.asarray(f(k1.points), dtype=float)
                f2 = np.asarray(f(k2.points), dtype=float)
                best_diff_se = float(
                    np.sqrt(np.var(f1) / f1.shape[0] + np.var(f2) / f2.shape[0])
                )
            else:
                best_diff_se = 0.0
    return DistanceEstimate(value=best, band=3.0 * best_diff_se, mode="bl_dictionary")
