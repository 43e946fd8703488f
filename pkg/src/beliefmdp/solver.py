"""Value iteration for the belief reformulation of a finite model.

The hidden-state model is lifted to a fully observed problem whose states
are beliefs.  Values live on a simplex lattice (see ``beliefgrid``); the
backup operator uses the exact one-step belief decomposition

    (Lv)(z) = min_a [ cbar(z, a) + alpha * sum_y m(y | z, a) v(post(z, a, y)) ]

where m is the predicted observation mass and post the Bayes posterior,
projected to the nearest grid node.  Posterior node indices and predicted
masses are precomputed per (action, observation), so each sweep is a few
gathers and reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefgrid import BeliefGrid, simplex_grid
from .beliefs import FiniteBelief
from .costs import CostSpec
from .models import FiniteTablePOMDP

__all__ = [
    "ValueFunction",
    "ValueIterationResult",
    "value_iteration",
    "bellman_backup",
    "optimal_action_set",
]


@dataclass
class ValueFunction:
    grid: BeliefGrid
    values: np.ndarray                 # (N,)
    policy: np.ndarray                 # (N,) greedy action indices

    def value_at(self, weights: np.ndarray) -> float:
        return float(self.values[self.grid.project_one(weights)])

    def action_at(self, weights: np.ndarray) -> int:
        return int(self.policy[self.grid.project_one(weights)])


@dataclass
class ValueIterationResult:
    value_fn: ValueFunction
    n_sweeps: int
    stop_reason: str                   # "tolerance" | "horizon" | "max_sweeps"
    convergence_log: list              # rows (sweep, sup_diff)
    contraction_ratios: list
    horizon_values: list = field(default_factory=list)  # horizon mode ladder
    alpha: float = 0.0
    mesh: int = 0

    def to_json(self) -> dict:
        return {
            "n_sweeps": self.n_sweeps,
            "stop_reason": self.stop_reason,
            "alpha": self.alpha,
            "mesh": self.mesh,
            "n_nodes": int(self.value_fn.values.shape[0]),
            "convergence_log": [[int(i), float(d)] for i, d in self.convergence_log],
            "contraction_ratios": [float(r) for r in self.contraction_ratios],
            "values": self.value_fn.values.tolist(),
            "policy": self.value_fn.policy.tolist(),
            "nodes": self.value_fn.grid.nodes.tolist(),
        }


def _stage_table(model: FiniteTablePOMDP, cost: CostSpec) -> np.ndarray:
    if cost.table is not None:
        tab = cost.table
        if tab.shape != (model.n_states, model.n_actions):
            raise ValueError(f"cost table shape {tab.shape} does not match "
                             f"({model.n_states}, {model.n_actions})")
        return tab
    if model.state_values is None or model.action_values is None:
        raise ValueError("callable cost needs state_values/action_values on the model")
    sv = np.atleast_2d(np.asarray(model.state_values, dtype=float).reshape(model.n_states, -1))
    av = np.atleast_2d(np.asarray(model.action_values, dtype=float).reshape(model.n_actions, -1))
    tab = np.empty((model.n_states, model.n_actions))
    for a in range(model.n_actions):
        tab[:, a] = np.asarray(cost(sv, np.broadcast_to(av[a], (model.n_states, av.shape[1]))), dtype=float).reshape(-1)
    return tab


class _BackupOperator:
    """Precomputed vectorized backup over all grid nodes."""

    def __init__(self, model: FiniteTablePOMDP, cost: CostSpec,
                 alpha: float, grid: BeliefGrid) -> None:
        self.model = model
        self.alpha = alpha
        self.grid = grid
        K, A, Y = model.n_states, model.n_actions, model.n_obs
        Z = grid.nodes                                    # (N, K)
        N = Z.shape[0]
        table = _stage_table(model, cost)
        self.cbar = Z @ table                             # (N, A)
        self.mass = np.zeros((A, Y, N))                   # predicted obs mass
        self.post_idx = np.zeros((A, Y, N), dtype=np.int64)
        self.proj_error = 0.0
        for a in range(A):
            T = model.transition[a]                       # (K, K)
            if model.flavor == "pomdp":
                pred = Z @ T                              # (N, K) state mass after move
                for y in range(Y):
                    joint = pred * model.observation[a][:, y][None, :]
                    m = joint.sum(axis=1)
                    self.mass[a, y] = m
                    post = np.divide(joint, m[:, None], out=np.full_like(joint, 1.0 / K),
                                     where=m[:, None] > 0)
                    idx = grid.project(post)
                    self.post_idx[a, y] = idx
                    err = np.abs(grid.nodes[idx] - post).sum(axis=1)
                    self.proj_error = max(self.proj_error, float(np.max(err[m > 0], initial=0.0)))
            else:  # pomdp1: observation depends on the pre-move state
                for y in range(Y):
                    lik = model.observation[a][:, y]      # (K,)
                    contrib = Z * lik[None, :]
                    m = contrib.sum(axis=1)
                    self.mass[a, y] = m
                    post = np.divide(contrib @ T, m[:, None], out=np.full((N, K), 1.0 / K),
                                     where=m[:, None] > 0)
                    idx = grid.project(post)
                    self.post_idx[a, y] = idx
                    err = np.abs(grid.nodes[idx] - post).sum(axis=1)
                    self.proj_error = max(self.proj_error, float(np.max(err[m > 0], initial=0.0)))

    def q_values(self, v: np.ndarray) -> np.ndarray:
        """(N, A) action values against the tail value array v."""
        cont = np.einsum("ayn,ayn->an", self.mass, v[self.post_idx])  # (A, N)
        return self.cbar + self.alpha * cont.T

    def apply(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q = self.q_values(v)
        return q.min(axis=1), q.argmin(axis=1)


def value_iteration(
    model: FiniteTablePOMDP,
    cost: CostSpec,
    alpha: float,
    mesh: int,
    mode: str = "tolerance",
    horizon: int | None = None,
    tol: float = 1e-3,
    max_sweeps: int = 10_000,
) -> ValueIterationResult:
    """Solve the belief problem on a simplex lattice of spacing 1/mesh.

    "tolerance" mode iterates from v = 0 until the sup-norm sweep change
    drops below tol * (1 - alpha) / (2 alpha), certifying a final sup
    error below tol against the grid fixed point.  "horizon" mode runs
    exactly ``horizon`` sweeps and keeps the whole value ladder.
    """
    if not 0.0 <= alpha:
        raise ValueError("alpha must be nonnegative")
    if cost.mode == "D" and not alpha < 1.0:
        raise ValueError("mode 'D' costs require alpha < 1")
    if mode not in ("tolerance", "horizon"):
        raise ValueError("mode must be 'tolerance' or 'horizon'")
    if mode == "tolerance" and alpha >= 1.0:
        raise ValueError("tolerance mode needs alpha < 1")
    if mode == "horizon" and (horizon is None or horizon < 1):
        raise ValueError("horizon mode needs a positive horizon")

    grid = simplex_grid(model.n_states, mesh)
    op = _BackupOperator(model, cost, alpha, grid)
    v = np.zeros(grid.n_nodes)
    policy = np.zeros(grid.n_nodes, dtype=np.int64)
    log: list[tuple[int, float]] = []
    ratios: list[float] = []
    ladder: list[np.ndarray] = []
    prev_diff = None
    stop_reason = "max_sweeps"
    n_sweeps = max_sweeps if mode == "tolerance" else horizon
    sweeps_done = 0

    if mode == "tolerance":
        threshold = tol if alpha == 0.0 else tol * (1.0 - alpha) / (2.0 * alpha)
        for it in range(1, max_sweeps + 1):
            v_new, policy = op.apply(v)
            diff = float(np.max(np.abs(v_new - v)))
            log.append((it, diff))
            if prev_diff is not None and prev_diff > 0:
                ratios.append(diff / prev_diff)
            prev_diff = diff
            v = v_new
            sweeps_done = it
            if diff <= threshold:
                stop_reason = "tolerance"
                break
    else:
        for it in range(1, horizon + 1):
            ladder.append(v.copy())
            v_new, policy = op.apply(v)
            diff = float(np.max(np.abs(v_new - v)))
            log.append((it, diff))
            if prev_diff is not None and prev_diff > 0:
                ratios.append(diff / prev_diff)
            prev_diff = diff
            v = v_new
            sweeps_done = it
        ladder.append(v.copy())
        stop_reason = "horizon"

    vf = ValueFunction(grid=grid, values=v, policy=policy)
    return ValueIterationResult(
        value_fn=vf, n_sweeps=sweeps_done, stop_reason=stop_reason,
        convergence_log=log, contraction_ratios=ratios,
        horizon_values=ladder, alpha=alpha, mesh=mesh,
    )


def bellman_backup(
    model: FiniteTablePOMDP,
    cost: CostSpec,
    alpha: float,
    vf: ValueFunction,
    z: FiniteBelief,
) -> tuple[float, np.ndarray]:
    """One exact backup at an arbitrary belief against a grid value function.

    Returns the backed-up value and the (A,) vector of action values.
    """
    w = np.asarray(z.weights, dtype=float)
    K, A, Y = model.n_states, model.n_actions, model.n_obs
    table = _stage_table(model, cost)
    q = np.empty(A)
    for a in range(A):
        T = model.transition[a]
        total = float(w @ table[:, a])
        cont = 0.0
        for y in range(Y):
            if model.flavor == "pomdp":
                joint = (w @ T) * model.observation[a][:, y]
            else:
                joint = (w * model.observation[a][:, y]) @ T
            m = float(joint.sum())
            if m <= 0.0:
                continue
            cont += m * vf.values[vf.grid.project_one(joint / m)]
        q[a] = total + alpha * cont
    return float(q.min()), q


def optimal_action_set(
    model: FiniteTablePOMDP,
    cost: CostSpec,
    alpha: float,
    vf: ValueFunction,
    z: FiniteBelief,
    argmin_tol: float = 1e-9,
) -> list[int]:
    """Actions within argmin_tol of the best backed-up value, ascending."""
    _, q = bellman_backup(model, cost, alpha, vf, z)
    best = float(q.min())
    return [a for a in range(q.shape[0]) if q[a] <= best + argmin_tol]
