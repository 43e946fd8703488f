"""Closed-loop simulation of a policy against the hidden-state model.

Each episode samples a hidden trajectory, runs the requested filter in the
loop, feeds the policy with the current belief, and accumulates the
discounted stage cost.  Episodes that hit a zero-mass Bayes update are
counted as degenerate and excluded from the cost average.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beliefs import Belief, FiniteBelief, GaussianBelief, ParticleBelief, belief_summary
from .costs import CostSpec, lift_cost
from .filtering import DegenerateUpdateError, bayes_update, sample_belief
from .models import (
    FiniteTablePOMDP,
    StochasticControlModel,
    initial_observe,
    observe,
    observe1,
    step_state,
)
from .seeding import substream

__all__ = ["SimulationReport", "simulate_policy"]


@dataclass
class SimulationReport:
    mean_cost: float
    band: float                       # 3 standard errors
    episode_costs: list
    degenerate_count: int
    n_episodes: int
    horizon: int
    alpha: float
    trajectories: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mean_cost": self.mean_cost, "band": self.band,
            "episode_costs": self.episode_costs,
            "degenerate_count": self.degenerate_count,
            "n_episodes": self.n_episodes, "horizon": self.horizon,
            "alpha": self.alpha, "trajectories": self.trajectories,
        }


def _resolve_policy(policy, model) -> Callable[[Belief, int], np.ndarray]:
    if callable(policy) and not hasattr(policy, "grid"):
        return lambda z, t: policy(z)
    if hasattr(policy, "grid"):  # grid value function: greedy lookup
        if not isinstance(model, FiniteTablePOMDP):
            raise TypeError("grid policies apply to finite models")
        return lambda z, t: policy.action_at(z.weights)
    arr = np.atleast_1d(np.asarray(policy, dtype=float))
    if isinstance(model, FiniteTablePOMDP):
        fixed = int(arr[0])
        return lambda z, t: fixed
    return lambda z, t: arr


def _finite_episode(model: FiniteTablePOMDP, act, cost_table, alpha, horizon, rng,
                    z0: FiniteBelief, keep_traj: bool):
    z = z0
    x = int(rng.choice(model.n_states, p=z0.weights))
    rows = []
    total = 0.0
    disc = 1.0
    if model.initial_obs is not None:
        y0 = int(rng.choice(model.n_obs, p=model.initial_obs[x]))
        if keep_traj and horizon > 0:
            rows.append({"t": 0, "x": x, "a": None, "y": y0,
                         "belief": z.weights.tolist()})
    for t in range(horizon):
        a = int(act(z, t))
        if cost_table is not None:
            total += disc * float(cost_table[x, a])
        x_next = int(rng.choice(model.n_states, p=model.transition[a, x]))
        if model.flavor == "pomdp":
            y = int(rng.choice(model.n_obs, p=model.observation[a, x_next]))
        else:
            y = int(rng.choice(model.n_obs, p=model.observation[a, x]))
        step = bayes_update(model, z, a, y)
        z = step.posterior
        if keep_traj:
            rows.append({"t": t + 1, "x": x_next, "a": a, "y": y,
                         "belief": z.weights.tolist()})
        x = x_next
        disc *= alpha
    return total, rows


def _sample_hidden_start(model: StochasticControlModel, rng) -> np.ndarray:
    z0 = model.p0
    if isinstance(z0, GaussianBelief):
        L = np.linalg.cholesky(z0.cov + 1e-12 * np.eye(z0.dim))
        return z0.mean + L @ rng.standard_normal(z0.dim)
    if isinstance(z0, ParticleBelief):
        idx = rng.choice(z0.n_points, p=z0.weights)
        return z0.points[idx]
    raise TypeError("continuous simulation needs a Gaussian or particle prior")


def _continuous_episode(model: StochasticControlModel, act, cost_spec, alpha,
                        horizon, rng, z0, keep_traj: bool):
    z = z0
    x = _sample_hidden_start(model, rng)
    rows = []
    total = 0.0
    disc = 1.0
    if model.initial_observation is not None:
        eta0 = model.nu.sample(int(rng.integers(2**31)), 1)[0]
        y0 = initial_observe(model, x, eta0)
        if keep_traj and horizon > 0:
            rows.append({"t": 0, "x": x.tolist(), "a": None, "y": np.atleast_1d(y0).tolist(),
                         "belief": belief_summary(z)})
    for t in range(horizon):
        a = np.atleast_1d(np.asarray(act(z, t), dtype=float))
        if cost_spec is not None:
            total += disc * float(cost_spec(x[None, :], a[None, :]))
        xi = model.mu.sample(int(rng.integers(2**31)), 1)[0]
        x_next = step_state(model, x, a, xi)
        eta = model.nu.sample(int(rng.integers(2**31)), 1)[0]
        if model.flavor == "pomdp":
            y = observe(model, a, x_next, eta)
        else:
            y = observe1(model, x, a, eta)
        step = bayes_update(model, z, a, y)
        z = step.posterior
        if keep_traj:
            rows.append({"t": t + 1, "x": np.asarray(x_next).tolist(), "a": a.tolist(),
                         "y": np.atleast_1d(y).tolist(), "belief": belief_summary(z)})
        x = np.atleast_1d(np.asarray(x_next, dtype=float))
        disc *= alpha
    return total, rows


def simulate_policy(
    model,
    policy,
    horizon: int,
    n_episodes: int = 100,
    alpha: float = 0.95,
    seed: int = 0,
    cost: CostSpec | None = None,
    filter_type: str = "auto",
    n_particles: int = 512,
    record_trajectories: int = 3,
    initial_belief=None,
) -> SimulationReport:
    """Run seeded closed-loop episodes and report the discounted cost.

    ``policy`` may be a grid value function (greedy lookup), a callable
    belief -> action, or a fixed action.  The belief starts at the prior.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    act = _resolve_policy(policy, model)
    costs: list[float] = []
    degenerate = 0
    trajectories = []

    if isinstance(model, FiniteTablePOMDP):
        cost_table = cost.table if (cost is not None and cost.table is not None) else None
        if cost is not None and cost_table is None:
            raise ValueError("finite simulation needs a table cost")
        z0 = FiniteBelief(model.uniform_belief().weights if initial_belief is None
                          else np.asarray(initial_belief, dtype=float))
        for e in range(n_episodes):
            rng = substream(seed, "episode", str(e))
            try:
                total, rows = _finite_episode(model, act, cost_table, alpha,
                                              horizon, rng, z0,
                                              e < record_trajectories)
            except DegenerateUpdateError:
                degenerate += 1
                continue
            costs.append(total)
            if rows:
                trajectories.append(rows)
    else:
        if filter_type == "auto":
            filter_type = "kalman" if model.lssm is not None else "particle"
        if filter_type == "kalman" and not isinstance(model.p0, GaussianBelief):
            raise TypeError("kalman filtering needs a Gaussian prior")
        for e in range(n_episodes):
            rng = substream(seed, "episode", str(e))
            if filter_type == "kalman":
                z0 = GaussianBelief(model.p0.mean, model.p0.cov)
            else:
                root = seed * 1000003 + e
                pts = sample_belief(model.p0, root, n_particles)
                z0 = ParticleBelief(pts, np.full(n_particles, 1.0 / n_particles),
                                    lineage=(root, 0))
            try:
                total, rows = _continuous_episode(model, act, cost, alpha,
                                                  horizon, rng, z0,
                                                  e < record_trajectories)
            except DegenerateUpdateError:
                degenerate += 1
                continue
            costs.append(total)
            if rows:
                trajectories.append(rows)

    arr = np.asarray(costs, dtype=float)
    if arr.size == 0:
        mean = float("nan")
        band = float("nan")
    else:
        mean = float(arr.mean())
        band = 3.0 * float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return SimulationReport(
        mean_cost=mean, band=band, episode_costs=[float(c) for c in costs],
        degenerate_count=degenerate, n_episodes=n_episodes, horizon=horizon,
        alpha=alpha, trajectories=trajectories,
    )
