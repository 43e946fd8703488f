"""Belief states: probability measures over the hidden state.

Three representations cover the filtering paths: exact weights on a finite
state set, a Gaussian (for linear models), and a weighted particle cloud.
Constructors validate the measure-theoretic basics so downstream code can
assume a normalized, well-formed belief.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FiniteBelief", "GaussianBelief", "ParticleBelief", "Belief", "belief_summary"]

_WEIGHT_TOL = 1e-12


def _check_weights(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0:
        raise ValueError("belief needs at least one support point")
    if np.any(w < -_WEIGHT_TOL):
        raise ValueError("belief weights must be nonnegative")
    total = float(np.sum(w))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"belief weights must sum to 1 (got {total})")
    return np.clip(w, 0.0, None) / total


@dataclass(frozen=True)
class FiniteBelief:
    """Weights on a finite state set.

    ``states`` is either an (K, d) array of points in R^d or None, in which
    case the support is the index set {0, ..., K-1} of a finite-state model.
    """

    weights: np.ndarray
    states: np.ndarray | None = None

    def __post_init__(self) -> None:
        w = _check_weights(self.weights)
        object.__setattr__(self, "weights", w)
        if self.states is not None:
            pts = np.asarray(self.states, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.shape[0] != w.shape[0]:
                raise ValueError("states and weights length mismatch")
            object.__setattr__(self, "states", pts)

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        if self.states is None:
            raise ValueError("index-set belief has no state-space mean")
        return self.weights @ self.states

    def support_size(self, tol: float = 0.0) -> int:
        return int(np.sum(self.weights > tol))


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian belief N(mean, cov); cov symmetric PSD."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric within 1e-10")
        eigmin = float(np.min(np.linalg.eigvalsh(cov)))
        if eigmin < -1e-10:
            raise ValueError(f"covariance must be PSD (min eigenvalue {eigmin})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ParticleBelief:
    """Weighted particle cloud with a seed lineage for reproducible propagation.

    ``lineage`` is (root_seed, step_count); each Bayes update derives fresh
    propagation noise from it, so a filtering run is a pure function of the
    initial lineage and the observations.
    """

    points: np.ndarray
    weights: np.ndarray
    lineage: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = _check_weights(self.weights)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights length mismatch")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lineage", (int(self.lineage[0]), int(self.lineage[1])))

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def ess(self) -> float:
        """Effective sample size 1 / sum(w^2)."""
        return float(1.0 / np.sum(self.weights**2))


Belief = FiniteBelief | GaussianBelief | ParticleBelief


def belief_summary(z: Belief) -> dict:
    """Compact scalar summary (mean, spread, support size) for logs."""
    if isinstance(z, GaussianBelief):
        return {
            "mean": z.mean.tolist(),
            "spread": np.sqrt(np.clip(np.diag(z.cov), 0.0, None)).tolist(),
            "support_size": None,
        }
    if isinstance(z, ParticleBelief):
        m = z.mean()
        var = z.weights @ (z.points - m) ** 2
        return {
            "mean": m.tolist(),
            "spread": np.sqrt(np.clip(var, 0.0, None)).tolist(),
            "support_size": int(np.sum(z.weights > 0)),
        }
    if isinstance(z, FiniteBelief):
        if z.states is None:
            return {
                "mean": z.weights.tolist(),
                "spread": None,
                "support_size": z.support_size(),
            }
        m = z.mean()
        var = z.weights @ (z.states - m) ** 2
        return {
            "mean": m.tolist(),
            "spread": np.sqrt(np.clip(var, 0.0, None)).tolist(),
            "support_size": z.support_size(),
        }
    raise TypeError(f"not a belief: {type(z)!r}")
