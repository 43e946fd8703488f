"""Stochastic-kernel slices and their Monte Carlo / gridded estimates.

A kernel slice kappa(.|s2) is the law of phi(s2, omega) under the noise.
Two estimate representations:

* :class:`EmpiricalKernel`: weighted sample points, produced by pushing a
  seeded noise sample through the map.  The seed is recorded so two slices
  produced with the same seed form a common-random-number coupling.
* :class:`GriddedKernel`: density values on a rectilinear grid, produced
  by the change-of-variables identity.

Both serialize to JSON, and empirical estimates export to CSV with one
coordinate column per dimension plus a weight column.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .models import StochasticControlModel
from .noise import NoiseDistribution
from .seeding import derive_seed

__all__ = [
    "EmpiricalKernel",
    "GriddedKernel",
    "KernelEstimate",
    "pushforward_kernel",
    "transition_kernel",
    "observation_kernel",
    "observation_kernel1",
    "joint_kernel",
    "kernel_to_json",
    "kernel_from_json",
    "kernel_to_csv",
    "transition_noise_map",
    "observation_noise_map",
]

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalKernel:
    """Weighted sample representation of one kernel slice."""

    points: np.ndarray
    weights: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights length mismatch")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


@dataclass(frozen=True)
class GriddedKernel:
    """Density values on a rectilinear grid (one axis array per dimension).

    ``values`` is flattened C-order over the grid; the Riemann sum of the
    density should be 1 up to truncation error.
    """

    axes: tuple
    values: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        axes = tuple(np.asarray(ax, dtype=float).reshape(-1) for ax in self.axes)
        if not axes:
            raise ValueError("gridded kernel needs at least one axis")
        for ax in axes:
            if ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise ValueError("grid axes must be strictly increasing with >= 2 points")
        size = int(np.prod([ax.size for ax in axes]))
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != size:
            raise ValueError("values size does not match the grid")
        if np.any(vals < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.axes)

    def cell_volume(self) -> float:
        return float(np.prod([ax[1] - ax[0] for ax in self.axes]))

    def grid_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def riemann_sum(self) -> float:
        return float(np.sum(self.values) * self.cell_volume())


KernelEstimate = EmpiricalKernel | GriddedKernel


def pushforward_kernel(phi, p: NoiseDistribution, s2, n_samples: int, seed: int) -> EmpiricalKernel:
    """Sample the pushforward of the noise law under omega -> phi(s2, omega).

    The same seed produces the same noise draw for every s2, so slices at
    different parameters are coupled by common random numbers.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    omegas = p.sample(seed, n_samples)
    pts = np.atleast_2d(np.asarray(phi(s2, omegas), dtype=float))
    if pts.shape[0] != n_samples:
        raise ValueError("phi must map the noise batch to one image per draw")
    if not np.all(np.isfinite(pts)):
        raise ValueError("phi produced non-finite image points")
    w = np.full(n_samples, 1.0 / n_samples)
    return EmpiricalKernel(
        points=pts,
        weights=w,
        source={"seed": int(seed), "n_samples": int(n_samples),
                "s2": np.atleast_1d(np.asarray(s2, dtype=float)).tolist()},
    )


def transition_noise_map(model: StochasticControlModel, a):
    """Adapter: the transition as a noise map with the state as parameter."""
    a = np.atleast_1d(np.asarray(a, dtype=float))

    def phi(x, xis):
        return model.transition(np.asarray(x, dtype=float), a, np.atleast_2d(xis))

    return phi


def observation_noise_map(model: StochasticControlModel, a):
    """Adapter: the observation as a noise map parametrized by the state.

    Flavor "pomdp" parametrizes by the post-transition state, flavor
    "pomdp1" by the pre-transition state.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if model.flavor == "pomdp":
        def phi(x_next, etas):
            return model.observation(a, np.asarray(x_next, dtype=float), np.atleast_2d(etas))
    else:
        def phi(x, etas):
            return model.observation(np.asarray(x, dtype=float), a, np.atleast_2d(etas))
    return phi


def transition_kernel(model: StochasticControlModel, x, a, n_samples: int, seed: int) -> EmpiricalKernel:
    """Estimate of the transition kernel slice T(.|x, a)."""
    est = pushforward_kernel(transition_noise_map(model, a), model.mu, x, n_samples, seed)
    est.source["kind"] = "transition"
    return est


def observation_kernel(model: StochasticControlModel, a, x_next, n_samples: int, seed: int) -> EmpiricalKernel:
    """Estimate of the observation kernel slice Q(.|a, x') (flavor pomdp)."""
    if model.flavor != "pomdp":
        raise ValueError("observation_kernel requires flavor 'pomdp'")
    est = pushforward_kernel(observation_noise_map(model, a), model.nu, x_next, n_samples, seed)
    est.source["kind"] = "observation"
    return est


def observation_kernel1(model: StochasticControlModel, x, a, n_samples: int, seed: int) -> EmpiricalKernel:
    """Estimate of the observation kernel slice Q1(.|x, a) (flavor pomdp1)."""
    if model.flavor != "pomdp1":
        raise ValueError("observation_kernel1 requires flavor 'pomdp1'")
    est = pushforward_kernel(observation_noise_map(model, a), model.nu, x, n_samples, seed)
    est.source["kind"] = "observation1"
    return est


def joint_kernel(model: StochasticControlModel, x, a, n_samples: int, seed: int) -> EmpiricalKernel:
    """Joint state-observation kernel slice P(. x .|x, a) as paired samples.

    The state-noise stream matches transition_kernel under the same seed, so
    the x'-marginal of the joint sample coincides point-for-point with the
    transition estimate; observation noise uses a derived substream.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    xis = model.mu.sample(seed, n_samples)
    x_next = np.atleast_2d(model.transition(x, a, xis))
    eta_seed = derive_seed(seed, "joint_obs").generate_state(1)[0]
    etas = model.nu.sample(int(eta_seed), n_samples)
    if model.flavor == "pomdp":
        ys = np.atleast_2d(model.observation(a, x_next, etas))
    else:
        ys = np.atleast_2d(model.observation(x, a, etas))
        ys = np.broadcast_to(ys, (n_samples, model.obs_dim)).copy()
    pts = np.concatenate([x_next, ys], axis=1)
    w = np.full(n_samples, 1.0 / n_samples)
    return EmpiricalKernel(
        points=pts,
        weights=w,
        source={"seed": int(seed), "n_samples": int(n_samples), "kind": "joint",
                "state_dim": model.state_dim, "obs_dim": model.obs_dim,
                "s2": np.concatenate([x, a]).tolist(), "flavor": model.flavor},
    )


def kernel_to_json(est: KernelEstimate) -> dict:
    if isinstance(est, EmpiricalKernel):
        return {
            "schema_version": 1,
            "representation": "empirical",
            "points": est.points.tolist(),
            "weights": est.weights.tolist(),
            "source": est.source,
        }
    if isinstance(est, GriddedKernel):
        return {
            "schema_version": 1,
            "representation": "gridded",
            "axes": [ax.tolist() for ax in est.axes],
            "values": est.values.tolist(),
            "source": est.source,
        }
    raise TypeError(f"not a kernel estimate: {type(est)!r}")


def kernel_from_json(blob: dict) -> KernelEstimate:
    rep = blob.get("representation")
    if rep == "empirical":
        return EmpiricalKernel(
            points=np.asarray(blob["points"], dtype=float),
            weights=np.asarray(blob["weights"], dtype=float),
            source=blob.get("source", {}),
        )
    if rep == "gridded":
        return GriddedKernel(
            axes=tuple(np.asarray(ax, dtype=float) for ax in blob["axes"]),
            values=np.asarray(blob["values"], dtype=float),
            source=blob.get("source", {}),
        )
    raise ValueError(f"unknown kernel representation: {rep!r}")


def kernel_to_csv(est: KernelEstimate) -> str:
    """CSV export: header dim0,...,dimk,weight; one row per atom / grid node."""
    buf = io.StringIO()
    if isinstance(est, EmpiricalKernel):
        pts, w = est.points, est.weights
    elif isinstance(est, GriddedKernel):
        pts = est.grid_points()
        w = est.values * est.cell_volume()
    else:
        raise TypeError(f"not a kernel estimate: {type(est)!r}")
    dim = pts.shape[1]
    buf.write(",".join([f"dim{j}" for j in range(dim)] + ["weight"]) + "\n")
    for row, wi in zip(pts, w):
        buf.write(",".join(repr(float(v)) for v in row) + f",{float(wi)!r}\n")
    return buf.getvalue()
