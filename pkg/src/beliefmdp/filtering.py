"""Bayesian filtering: posterior beliefs, predictive laws, filter-kernel draws.

``bayes_update`` dispatches on the (model, belief) pair:

* finite-table model + finite belief  -> exact table Bayes rule
* linear-Gaussian model + Gaussian    -> Kalman step (Joseph-form update)
* continuous model + particle cloud   -> bootstrap particle update with
  systematic resampling below half effective sample size

A zero observation normalizer raises :class:`DegenerateUpdateError`
carrying the prior, so callers can skip, report, or abort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .beliefs import Belief, FiniteBelief, GaussianBelief, ParticleBelief
from .kernels import EmpiricalKernel
from .models import FiniteTablePOMDP, LssmCoefficients, StochasticControlModel
from .seeding import derive_seed, substream

__all__ = [
    "DegenerateUpdateError",
    "SingularInnovationError",
    "FilterStep",
    "KalmanResult",
    "kalman_step",
    "bayes_update",
    "predictive_observation",
    "FilterKernelSample",
    "filter_kernel_sample",
    "sample_belief",
    "systematic_resample",
]

_RESAMPLE_FRACTION = 0.5  # resample when ESS drops below this fraction of N


class DegenerateUpdateError(RuntimeError):
    """Observation has zero probability under the predicted law."""

    def __init__(self, message: str, prior: Belief | None = None):
        super().__init__(message)
        self.prior = prior


class SingularInnovationError(RuntimeError):
    """Kalman innovation covariance is numerically singular."""


@dataclass(frozen=True)
class FilterStep:
    prior: Belief
    action: object
    observation: object
    posterior: Belief
    predictive_likelihood: float
    metadata: dict = field(default_factory=dict)


class KalmanResult(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray
    predictive_density: float


def kalman_step(coeffs: LssmCoefficients, mean, cov, a, y) -> KalmanResult:
    """One predict-update cycle of the Kalman filter.

    Returns the posterior mean and covariance (Joseph form, so the result
    stays PSD even with zero observation noise) and the predictive density
    of the observation.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    F1, F2, G = coeffs.F1, coeffs.F2, coeffs.G

    m_pred = F1 @ mean + F2 @ a
    P_pred = F1 @ cov @ F1.T + coeffs.cov_xi
    S = G @ P_pred @ G.T + coeffs.cov_eta
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularInnovationError("innovation covariance is singular")
    innov = y - G @ m_pred
    K = P_pred @ G.T @ np.linalg.inv(S)
    m_post = m_pred + K @ innov
    eye = np.eye(mean.shape[0])
    P_post = (eye - K @ G) @ P_pred @ (eye - K @ G).T + K @ coeffs.cov_eta @ K.T
    P_post = 0.5 * (P_post + P_post.T)
    m = y.shape[0]
    quad = float(innov @ np.linalg.solve(S, innov))
    density = float(np.exp(-0.5 * (quad + logdet + m * np.log(2.0 * np.pi))))
    return KalmanResult(mean=m_post, cov=P_post, predictive_density=density)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform offset, stratified positions."""
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(0, n - 1)


def _finite_update(model: FiniteTablePOMDP, z: FiniteBelief, a: int, y: int) -> FilterStep:
    a = int(a)
    y = int(y)
    if not 0 <= a < model.n_actions:
        raise ValueError(f"action index {a} out of range")
    if not 0 <= y < model.n_obs:
        raise ValueError(f"observation index {y} out of range")
    if z.weights.shape[0] != model.n_states:
        raise ValueError("belief length does not match the state count")
    T = model.transition[a]
    Q = model.observation[a]
    if model.flavor == "pomdp":
        predicted = z.weights @ T
        joint = predicted * Q[:, y]
    else:
        lik = Q[:, y]  # observation reads the pre-transition state
        joint = (z.weights * lik) @ T
    norm = float(np.sum(joint))
    if norm <= 0.0:
        raise DegenerateUpdateError(
            f"observation {y} has zero probability under action {a}", prior=z
        )
    post = FiniteBelief(weights=joint / norm, states=z.states)
    return FilterStep(prior=z, action=a, observation=y, posterior=post,
                      predictive_likelihood=norm, metadata={"kind": "finite"})


def _kalman_update(model: StochasticControlModel, z: GaussianBelief, a, y) -> FilterStep:
    res = kalman_step(model.lssm, z.mean, z.cov, a, y)
    post = GaussianBelief(res.mean, res.cov)
    return FilterStep(prior=z, action=a, observation=y, posterior=post,
                      predictive_likelihood=res.predictive_density,
                      metadata={"kind": "kalman"})


def _particle_update(model: StochasticControlModel, z: ParticleBelief, a, y) -> FilterStep:
    if model.obs_density is None:
        raise ValueError("particle filtering needs an observation density on the model")
    root, step = z.lineage
    a = np.atleast_1d(np.asarray(a, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = z.n_points
    xi_seed = int(derive_seed(root, "particle_xi", step).generate_state(1)[0])
    xis = model.mu.sample(xi_seed, n)
    if model.flavor == "pomdp":
        new_pts = np.atleast_2d(model.transition(z.points, a, xis))
        lik = np.asarray(model.obs_density(y, a, new_pts), dtype=float).reshape(-1)
    else:
        # observation reads the pre-transition state: weight first, then move
        lik = np.asarray(model.obs_density(y, z.points, a), dtype=float).reshape(-1)
        new_pts = np.atleast_2d(model.transition(z.points, a, xis))
    w = z.weights * np.where(np.isfinite(lik), lik, 0.0)
    norm = float(np.sum(w))
    if norm <= 0.0:
        raise DegenerateUpdateError("all particle likelihoods vanished", prior=z)
    w = w / norm
    ess = float(1.0 / np.sum(w**2))
    resampled = ess < _RESAMPLE_FRACTION * n
    if resampled:
        rng = substream(root, "particle_resample", step)
        idx = systematic_resample(w, rng)
        new_pts = new_pts[idx]
        w = np.full(n, 1.0 / n)
    post = ParticleBelief(points=new_pts, weights=w, lineage=(root, step + 1))
    return FilterStep(prior=z, action=a, observation=y, posterior=post,
                      predictive_likelihood=norm,
                      metadata={"kind": "particle", "ess": ess, "resampled": resampled,
                                "resample_threshold": _RESAMPLE_FRACTION})


def bayes_update(model, z: Belief, a, y) -> FilterStep:
    """Posterior belief after acting and observing; dispatches on types."""
    if isinstance(model, FiniteTablePOMDP):
        if not isinstance(z, FiniteBelief):
            raise TypeError("finite-table models update FiniteBelief only")
        return _finite_update(model, z, a, y)
    if isinstance(model, StochasticControlModel):
        if isinstance(z, GaussianBelief):
            if model.lssm is None:
                raise TypeError("Gaussian beliefs update in closed form only on linear models")
            return _kalman_update(model, z, a, y)
        if isinstance(z, ParticleBelief):
            return _particle_update(model, z, a, y)
        raise TypeError("continuous models update Gaussian or particle beliefs")
    raise TypeError(f"unknown model type: {type(model)!r}")


def sample_belief(z: Belief, seed: int, count: int) -> np.ndarray:
    """Draw hidden states from a belief (deterministic in seed)."""
    rng = substream(seed, "belief_sample")
    if isinstance(z, GaussianBelief):
        w, v = np.linalg.eigh(z.cov)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
        return z.mean + rng.standard_normal((count, z.dim)) @ factor.T
    if isinstance(z, ParticleBelief):
        idx = rng.choice(z.n_points, size=count, p=z.weights)
        return z.points[idx]
    if isinstance(z, FiniteBelief):
        if z.states is None:
            raise ValueError("index-set belief cannot be sampled as points; use indices")
        idx = rng.choice(z.weights.shape[0], size=count, p=z.weights)
        return z.states[idx]
    raise TypeError(f"not a belief: {type(z)!r}")


def predictive_observation(model, z: Belief, a, n_samples: int = 10_000, seed: int = 0) -> EmpiricalKernel:
    """Law of the next observation given belief and action.

    Exact atoms for finite-table models; otherwise a seeded Monte Carlo
    sample through state draw -> transition -> observation.
    """
    if isinstance(model, FiniteTablePOMDP):
        if not isinstance(z, FiniteBelief):
            raise TypeError("finite-table models take FiniteBelief")
        a = int(a)
        T = model.transition[a]
        Q = model.observation[a]
        if model.flavor == "pomdp":
            probs = (z.weights @ T) @ Q
        else:
            probs = z.weights @ Q
        obs_vals = model.obs_values
        pts = (np.arange(model.n_obs, dtype=float)[:, None]
               if obs_vals is None else np.atleast_2d(np.asarray(obs_vals, dtype=float).reshape(model.n_obs, -1)))
        return EmpiricalKernel(points=pts, weights=probs,
                               source={"kind": "predictive_exact", "action": a})
    a = np.atleast_1d(np.asarray(a, dtype=float))
    xs = sample_belief(z, int(derive_seed(seed, "pred_x").generate_state(1)[0]), n_samples)
    xis = model.mu.sample(int(derive_seed(seed, "pred_xi").generate_state(1)[0]), n_samples)
    etas = model.nu.sample(int(derive_seed(seed, "pred_eta").generate_state(1)[0]), n_samples)
    x_next = np.atleast_2d(model.transition(xs, a, xis))
    if model.flavor == "pomdp":
        ys = np.atleast_2d(model.observation(a, x_next, etas))
    else:
        ys = np.atleast_2d(model.observation(xs, a, etas))
    return EmpiricalKernel(points=ys, weights=np.full(n_samples, 1.0 / n_samples),
                           source={"kind": "predictive_mc", "seed": int(seed),
                                   "n_samples": int(n_samples)})


@dataclass
class FilterKernelSample:
    """Beliefs drawn from the filter kernel, plus the degenerate-draw count."""

    beliefs: list
    degenerate_count: int


def filter_kernel_sample(model, z: Belief, a, n_draws: int, seed: int) -> FilterKernelSample:
    """Sample next beliefs by drawing observations from their predictive law
    and applying the Bayes operator; degenerate draws are skipped and counted."""
    beliefs: list[Belief] = []
    degenerate = 0
    if isinstance(model, FiniteTablePOMDP):
        pred = predictive_observation(model, z, a)
        rng = substream(seed, "filter_kernel")
        ys = rng.choice(pred.weights.shape[0], size=n_draws, p=pred.weights)
        for y in ys:
            try:
                beliefs.append(bayes_update(model, z, int(a), int(y)).posterior)
            except DegenerateUpdateError:
                degenerate += 1
        return FilterKernelSample(beliefs=beliefs, degenerate_count=degenerate)
    pred = predictive_observation(model, z, a, n_samples=n_draws, seed=seed)
    for y in pred.points:
        try:
            beliefs.append(bayes_update(model, z, a, y).posterior)
        except DegenerateUpdateError:
            degenerate += 1
    return FilterKernelSample(beliefs=beliefs, degenerate_count=degenerate)
