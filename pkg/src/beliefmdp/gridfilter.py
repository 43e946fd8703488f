"""Brute-force grid Bayes oracle.

Independent reference for the closed-form and particle filters: the Bayes
rule is integrated numerically on a fixed rectilinear grid, with the
transition density obtained from the change-of-variables identity (Newton
inversion), never from a closed-form shortcut.  Slow but assumption-free;
used by tests to cross-check bayes_update.
"""

from __future__ import annotations

import numpy as np

from .beliefs import FiniteBelief, GaussianBelief
from .filtering import DegenerateUpdateError
from .inversion import change_of_variables_density
from .kernels import transition_noise_map
from .models import StochasticControlModel

__all__ = ["grid_bayes_oracle", "gaussian_on_grid", "transition_density_matrix"]

_MATRIX_CACHE: dict = {}
_MATRIX_CACHE_LIMIT = 8


def _grid_points(axes) -> tuple[tuple, np.ndarray, float]:
    axes = tuple(np.asarray(ax, dtype=float).reshape(-1) for ax in axes)
    for ax in axes:
        if ax.size < 2 or np.any(np.diff(ax) <= 0):
            raise ValueError("grid axes must be strictly increasing with >= 2 points")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
    return axes, pts, cell


def gaussian_on_grid(z: GaussianBelief, axes) -> FiniteBelief:
    """Project a Gaussian belief to normalized weights on grid nodes."""
    _, pts, _ = _grid_points(axes)
    diff = pts - z.mean
    inv = np.linalg.inv(z.cov)
    q = np.einsum("ki,ij,kj->k", diff, inv, diff)
    w = np.exp(-0.5 * q)
    total = float(np.sum(w))
    if total <= 0:
        raise ValueError("Gaussian has no mass on the grid")
    return FiniteBelief(weights=w / total, states=pts)


def transition_density_matrix(model: StochasticControlModel, axes, a) -> np.ndarray:
    """D[i, j] = transition density at target node j given source node i.

    Each row is one Newton-inversion sweep of the noise map.  The matrix
    depends only on (model, axes, action), so repeated filter steps reuse
    a cached copy; the cache holds strong references, making id-keyed
    lookups collision-safe.
    """
    if model.mu.density is None:
        raise ValueError("grid oracle needs a state-noise density")
    axes, pts, _ = _grid_points(axes)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    key = (id(model), tuple(ax.tobytes() for ax in axes), a.tobytes())
    hit = _MATRIX_CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]

    phi = transition_noise_map(model, a)
    omega_box = model.mu.truncated_box()
    n = pts.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        dens, _ = change_of_variables_density(phi, model.mu, pts[i], pts, omega_box=omega_box)
        out[i] = dens
    if len(_MATRIX_CACHE) >= _MATRIX_CACHE_LIMIT:
        _MATRIX_CACHE.pop(next(iter(_MATRIX_CACHE)))
    _MATRIX_CACHE[key] = (model, out)
    return out


def grid_bayes_oracle(model: StochasticControlModel, axes, prior: FiniteBelief, a, y) -> FiniteBelief:
    """One Bayes step computed by numerical integration on the grid.

    ``prior`` must live on the nodes of ``axes`` (weights per node).  The
    predicted law is sum_i z_i * t(. | x_i, a) with the transition density
    evaluated through Newton inversion of the noise map; the observation
    likelihood comes from the model's observation density.
    """
    if model.obs_density is None:
        raise ValueError("grid oracle needs an observation density on the model")
    axes, pts, cell = _grid_points(axes)
    n = pts.shape[0]
    if prior.weights.shape[0] != n:
        raise ValueError("prior weights do not match the grid")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))

    dens = transition_density_matrix(model, axes, a)
    if model.flavor == "pomdp":
        predicted = (prior.weights @ dens) * cell
        lik = np.asarray(model.obs_density(y, a, pts), dtype=float).reshape(-1)
        joint = predicted * lik
    else:
        # pre-transition likelihood reweights the prior before prediction
        lik = np.asarray(model.obs_density(y, pts, a), dtype=float).reshape(-1)
        joint = ((prior.weights * lik) @ dens) * cell
    norm = float(np.sum(joint))
    if norm <= 0.0:
        raise DegenerateUpdateError("grid oracle: observation has zero mass", prior=prior)
    return FiniteBelief(weights=joint / norm, states=pts)
