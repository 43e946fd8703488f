"""Control-system models defined by stochastic state and observation equations.

Two model classes cover the package:

* :class:`StochasticControlModel`: continuous-state dynamics given by maps
  ``x' = F(x, a, xi)`` and either ``y' = G(a, x', eta)`` (flavor "pomdp",
  the new observation sees the new state) or ``y' = G1(x, a, eta)`` (flavor
  "pomdp1", the observation sees the pre-transition state), with iid noise
  laws mu and nu and a known initial belief p0.
* :class:`FiniteTablePOMDP`: finite states/actions/observations with exact
  probability tables, used by the belief-grid solver and as an exact
  filtering reference.

Map callables broadcast over a leading batch dimension: ``F(x, a, xi)``
accepts ``xi`` of shape (n,) or (k, n) (and equally batched ``x``) and
returns the matching shape.  All built-in maps follow this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beliefs import Belief, FiniteBelief, GaussianBelief
from .noise import NoiseDistribution

__all__ = [
    "LssmCoefficients",
    "StochasticControlModel",
    "FiniteTablePOMDP",
    "step_state",
    "observe",
    "observe1",
    "initial_observe",
]


@dataclass(frozen=True)
class LssmCoefficients:
    """Matrices of a linear state-space model with additive Gaussian noise.

    x' = F1 x + F2 a + xi,   y' = G x' + eta,
    xi ~ N(0, cov_xi),       eta ~ N(0, cov_eta).
    """

    F1: np.ndarray
    F2: np.ndarray
    G: np.ndarray
    cov_xi: np.ndarray
    cov_eta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("F1", "F2", "G", "cov_xi", "cov_eta"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        d = self.F1.shape[0]
        if self.F1.shape != (d, d):
            raise ValueError("F1 must be square")
        if self.F2.shape[0] != d or self.G.shape[1] != d:
            raise ValueError("F2 / G shapes inconsistent with state dimension")
        if self.cov_xi.shape != (d, d):
            raise ValueError("cov_xi shape inconsistent with state dimension")
        m = self.G.shape[0]
        if self.cov_eta.shape != (m, m):
            raise ValueError("cov_eta shape inconsistent with observation dimension")


@dataclass(frozen=True)
class StochasticControlModel:
    """Partially observed control system in stochastic-equation form."""

    state_dim: int
    action_dim: int
    obs_dim: int
    flavor: str  # "pomdp" (y' sees x') or "pomdp1" (y' sees x)
    transition: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    observation: Callable[..., np.ndarray]  # G(a, x', eta) or G1(x, a, eta) by flavor
    mu: NoiseDistribution  # state noise law
    nu: NoiseDistribution  # observation noise law
    p0: Belief
    initial_observation: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    obs_density: Callable[..., np.ndarray] | None = None  # likelihood of y, batched over states
    lssm: LssmCoefficients | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.flavor not in ("pomdp", "pomdp1"):
            raise ValueError(f"unknown flavor: {self.flavor!r}")
        for name in ("state_dim", "action_dim", "obs_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def _check_point(v, dim: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {arr.shape}")
    return arr


def step_state(model: StochasticControlModel, x, a, xi) -> np.ndarray:
    """One transition x' = F(x, a, xi) with dimension checks."""
    x = _check_point(x, model.state_dim, "x")
    a = _check_point(a, model.action_dim, "a")
    xi = _check_point(xi, model.mu.dim, "xi")
    out = np.asarray(model.transition(x, a, xi), dtype=float).reshape(-1)
    if out.shape != (model.state_dim,):
        raise ValueError("transition map returned wrong state dimension")
    return out


def observe(model: StochasticControlModel, a, x_next, eta) -> np.ndarray:
    """Observation y' = G(a, x', eta) for flavor "pomdp"."""
    if model.flavor != "pomdp":
        raise ValueError("observe() requires flavor 'pomdp'; use observe1()")
    a = _check_point(a, model.action_dim, "a")
    x_next = _check_point(x_next, model.state_dim, "x_next")
    eta = _check_point(eta, model.nu.dim, "eta")
    out = np.asarray(model.observation(a, x_next, eta), dtype=float).reshape(-1)
    if out.shape != (model.obs_dim,):
        raise ValueError("observation map returned wrong dimension")
    return out


def observe1(model: StochasticControlModel, x, a, eta) -> np.ndarray:
    """Observation y' = G1(x, a, eta) for flavor "pomdp1"."""
    if model.flavor != "pomdp1":
        raise ValueError("observe1() requires flavor 'pomdp1'; use observe()")
    x = _check_point(x, model.state_dim, "x")
    a = _check_point(a, model.action_dim, "a")
    eta = _check_point(eta, model.nu.dim, "eta")
    out = np.asarray(model.observation(x, a, eta), dtype=float).reshape(-1)
    if out.shape != (model.obs_dim,):
        raise ValueError("observation map returned wrong dimension")
    return out


def initial_observe(model: StochasticControlModel, x0, eta0) -> np.ndarray:
    """Initial observation y0 = G0(x0, eta0); logged, never filtered on."""
    if model.initial_observation is None:
        raise ValueError("model has no initial observation map")
    x0 = _check_point(x0, model.state_dim, "x0")
    eta0 = _check_point(eta0, model.nu.dim, "eta0")
    out = np.asarray(model.initial_observation(x0, eta0), dtype=float).reshape(-1)
    if out.shape != (model.obs_dim,):
        raise ValueError("initial observation map returned wrong dimension")
    return out


def _check_stochastic_rows(table: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(table, dtype=float)
    if np.any(arr < -1e-12):
        raise ValueError(f"{name} has negative entries")
    sums = arr.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=1e-10):
        raise ValueError(f"{name} rows must sum to 1")
    return np.clip(arr, 0.0, None)


@dataclass(frozen=True)
class FiniteTablePOMDP:
    """Finite model with exact tables.

    transition[a, x, x']   next-state probabilities
    observation[a, s, y]   observation probabilities; ``s`` is the new
                             state x' under flavor "pomdp" and the old state
                             x under flavor "pomdp1"
    initial_obs[x, y]      optional table for the time-0 observation
    """

    transition: np.ndarray
    observation: np.ndarray
    flavor: str = "pomdp"
    initial_obs: np.ndarray | None = None
    state_values: np.ndarray | None = None  # optional embedding of states in R^d
    obs_values: np.ndarray | None = None
    action_values: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        T = _check_stochastic_rows(self.transition, "transition")
        Q = _check_stochastic_rows(self.observation, "observation")
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise ValueError("transition must have shape (A, K, K)")
        if Q.ndim != 3 or Q.shape[:2] != (T.shape[0], T.shape[1]):
            raise ValueError("observation must have shape (A, K, M)")
        if self.flavor not in ("pomdp", "pomdp1"):
            raise ValueError(f"unknown flavor: {self.flavor!r}")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "observation", Q)
        if self.initial_obs is not None:
            Q0 = _check_stochastic_rows(self.initial_obs, "initial_obs")
            if Q0.shape != (T.shape[1], Q.shape[2]):
                raise ValueError("initial_obs must have shape (K, M)")
            object.__setattr__(self, "initial_obs", Q0)

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_obs(self) -> int:
        return self.observation.shape[2]

    def uniform_belief(self) -> FiniteBelief:
        return FiniteBelief(weights=np.full(self.n_states, 1.0 / self.n_states))

    def to_json(self) -> dict:
        blob = {
            "schema_version": 1,
            "kind": "finite_pomdp",
            "flavor": self.flavor,
            "transition": self.transition.tolist(),
            "observation": self.observation.tolist(),
        }
        if self.initial_obs is not None:
            blob["initial_obs"] = self.initial_obs.tolist()
        for name in ("state_values", "obs_values", "action_values"):
            val = getattr(self, name)
            if val is not None:
                blob[name] = np.asarray(val).tolist()
        if self.metadata:
            blob["metadata"] = self.metadata
        return blob

    @staticmethod
    def from_json(blob: dict) -> "FiniteTablePOMDP":
        if blob.get("kind") != "finite_pomdp":
            raise ValueError("not a finite_pomdp blob")
        opt = {}
        for name in ("initial_obs", "state_values", "obs_values", "action_values"):
            if blob.get(name) is not None:
                opt[name] = np.asarray(blob[name], dtype=float)
        return FiniteTablePOMDP(
            transition=np.asarray(blob["transition"], dtype=float),
            observation=np.asarray(blob["observation"], dtype=float),
            flavor=blob.get("flavor", "pomdp"),
            metadata=blob.get("metadata", {}),
            **opt,
        )
