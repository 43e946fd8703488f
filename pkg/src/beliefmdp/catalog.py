"""Built-in model catalog.

Eight named models: a linear-Gaussian state-space model, two inventory
variants, additive- and multiplicative-noise nonlinear systems, a
bounded-image arctan system whose transition kernel is weakly but not
totally-variation continuous, and two counterexample kernels whose noise
has no Lebesgue density.  Each builder wires the maps, noise laws, initial
belief, observation likelihood (when it exists), and diagnostic defaults.

Models serialize to JSON as {name, dims, flavor, params, noise} and are
rebuilt by name, so configs reference built-in maps by identifier only;
user-supplied maps enter through the library API.
"""

from __future__ import annotations

import numpy as np

from . import noise as noiselib
from .beliefs import GaussianBelief
from .models import LssmCoefficients, StochasticControlModel
from .noise import NoiseDistribution

__all__ = ["CATALOG_NAMES", "FIXTURE_NAMES", "catalog_model", "fixture_model",
           "model_to_json", "model_from_json", "CatalogError"]

CATALOG_NAMES = (
    "lssm",
    "inventory_backorder",
    "inventory_lost_sales",
    "additive_nonlinear",
    "multiplicative_nonlinear",
    "arctan_example",
    "delta_noise_counterexample",
    "singular_gaussian_counterexample",
)

FIXTURE_NAMES = ("pomdp1_pointmass",)


class CatalogError(ValueError):
    """Unknown catalog name or invalid model parameters."""


def _as_matrix(v, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(rows, cols)
    arr = np.atleast_2d(arr)
    if arr.shape != (rows, cols):
        raise CatalogError(f"{name} must have shape ({rows}, {cols}), got {arr.shape}")
    return arr


def _cov(v, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(dim)
    arr = np.atleast_2d(arr)
    if arr.shape != (dim, dim):
        raise CatalogError(f"{name} must be a ({dim}, {dim}) covariance")
    return arr


def _gaussian_or_raise(mean, cov, name: str) -> NoiseDistribution:
    try:
        return noiselib.gaussian(mean, cov)
    except ValueError as exc:
        raise CatalogError(f"invalid {name}: {exc}") from exc


def _build_lssm(params: dict) -> StochasticControlModel:
    d = int(params.get("state_dim", 1))
    ell = int(params.get("action_dim", d))
    m = int(params.get("obs_dim", d))
    F1 = _as_matrix(params.get("F1", 0.9), d, d, "F1")
    F2 = _as_matrix(params.get("F2", 1.0), d, ell, "F2")
    G = _as_matrix(params.get("G", 1.0), m, d, "G")
    cov_xi = _cov(params.get("sigma_xi2", 1.0), d, "sigma_xi2")
    cov_eta = _cov(params.get("sigma_eta2", 0.25), m, "sigma_eta2")
    mean0 = np.broadcast_to(np.asarray(params.get("mean0", 0.0), dtype=float), (d,)).copy()
    cov0 = _cov(params.get("cov0", 1.0), d, "cov0")

    mu = _gaussian_or_raise(np.zeros(d), cov_xi, "state noise")
    nu = _gaussian_or_raise(np.zeros(m), cov_eta, "observation noise")

    def transition(x, a, xi):
        return x @ F1.T + a @ F2.T + xi

    def observation(a, x_next, eta):
        return x_next @ G.T + eta

    def initial_observation(x, eta):
        return x @ G.T + eta

    def obs_density(y, a, x_next):
        return nu.density(np.asarray(y, dtype=float) - np.atleast_2d(x_next) @ G.T)

    return StochasticControlModel(
        state_dim=d, action_dim=ell, obs_dim=m, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu, p0=GaussianBelief(mean0, cov0),
        obs_density=obs_density,
        lssm=LssmCoefficients(F1, F2, G, cov_xi, cov_eta),
        metadata={
            "name": "lssm",
            "assumption_compliant": True,
            "transition_diffeomorphic": True,
            "profile_base_state": mean0.tolist(),
            "profile_action": [0.0] * ell,
        },
    )


def _build_inventory(params: dict, lost_sales: bool) -> StochasticControlModel:
    d = int(params.get("state_dim", 1))
    demand_kind = params.get("demand", "uniform")
    if demand_kind == "uniform":
        hi = float(params.get("demand_hi", 1.0))
        if hi <= 0:
            raise CatalogError("demand_hi must be positive")
        mu = noiselib.uniform_box(np.zeros(d), np.full(d, hi))
    elif demand_kind == "exponential":
        mu = noiselib.exponential(float(params.get("demand_scale", 1.0)), d)
    else:
        raise CatalogError(f"unknown demand kind: {demand_kind!r}")
    cov_eta = _cov(params.get("sigma_eta2", 0.25), d, "sigma_eta2")
    nu = _gaussian_or_raise(np.zeros(d), cov_eta, "observation noise")
    mean0 = np.broadcast_to(np.asarray(params.get("mean0", 1.0), dtype=float), (d,)).copy()
    cov0 = _cov(params.get("cov0", 0.25), d, "cov0")

    if lost_sales:
        def transition(x, a, xi):
            return np.maximum(x + a - xi, 0.0)
    else:
        def transition(x, a, xi):
            return x + a - xi

    def observation(a, x_next, eta):
        return x_next + eta

    def initial_observation(x, eta):
        return x + eta

    def obs_density(y, a, x_next):
        return nu.density(np.asarray(y, dtype=float) - np.atleast_2d(x_next))

    name = "inventory_lost_sales" if lost_sales else "inventory_backorder"
    return StochasticControlModel(
        state_dim=d, action_dim=d, obs_dim=d, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu, p0=GaussianBelief(mean0, cov0),
        obs_density=obs_density,
        metadata={
            "name": name,
            "assumption_compliant": True,
            # censoring at zero kills the Jacobian on part of the domain
            "transition_diffeomorphic": not lost_sales,
            "profile_base_state": mean0.tolist(),
            "profile_action": [0.0] * d,
        },
    )


def _build_additive_nonlinear(params: dict) -> StochasticControlModel:
    d = int(params.get("state_dim", 1))
    cov_xi = _cov(params.get("sigma_xi2", 1.0), d, "sigma_xi2")
    cov_eta = _cov(params.get("sigma_eta2", 0.25), d, "sigma_eta2")
    mu = _gaussian_or_raise(np.zeros(d), cov_xi, "state noise")
    nu = _gaussian_or_raise(np.zeros(d), cov_eta, "observation noise")

    def drift(x, a):
        return x + np.tanh(a)

    def obs_map(x):
        return x + 0.5 * np.sin(x)

    def transition(x, a, xi):
        return drift(x, a) + xi

    def observation(a, x_next, eta):
        return obs_map(x_next) + eta

    def initial_observation(x, eta):
        return obs_map(x) + eta

    def obs_density(y, a, x_next):
        return nu.density(np.asarray(y, dtype=float) - obs_map(np.atleast_2d(x_next)))

    return StochasticControlModel(
        state_dim=d, action_dim=d, obs_dim=d, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief(np.zeros(d), np.eye(d)),
        obs_density=obs_density,
        metadata={
            "name": "additive_nonlinear",
            "assumption_compliant": True,
            "transition_diffeomorphic": True,
            "profile_base_state": [0.0] * d,
            "profile_action": [0.0] * d,
        },
    )


def _build_multiplicative_nonlinear(params: dict) -> StochasticControlModel:
    d = int(params.get("state_dim", 1))
    cov_xi = _cov(params.get("sigma_xi2", 0.25), d, "sigma_xi2")
    cov_eta = _cov(params.get("sigma_eta2", 0.04), d, "sigma_eta2")
    mu = _gaussian_or_raise(np.ones(d), cov_xi, "state noise")
    nu = _gaussian_or_raise(np.ones(d), cov_eta, "observation noise")

    def gain(x, a):
        return 1.0 + x**2 + a**2  # strictly positive, so the noise Jacobian never vanishes

    def obs_gain(x):
        return 1.0 + x**2

    def transition(x, a, xi):
        return xi * gain(x, a)

    def observation(a, x_next, eta):
        return eta * obs_gain(x_next)

    def initial_observation(x, eta):
        return eta * obs_gain(x)

    def obs_density(y, a, x_next):
        g = obs_gain(np.atleast_2d(x_next))
        vals = nu.density(np.asarray(y, dtype=float) / g)
        return vals / np.prod(np.abs(g), axis=1)

    return StochasticControlModel(
        state_dim=d, action_dim=d, obs_dim=d, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief(np.ones(d), 0.25 * np.eye(d)),
        obs_density=obs_density,
        metadata={
            "name": "multiplicative_nonlinear",
            "assumption_compliant": True,
            "transition_diffeomorphic": True,
            "profile_base_state": [1.0] * d,
            "profile_action": [0.0] * d,
        },
    )


def _build_arctan(params: dict) -> StochasticControlModel:
    # Transition image is the bounded interval
    # (-(x^2+1)(a^2+1) pi/2, +(x^2+1)(a^2+1) pi/2), so the kernel moves
    # weakly but not in total variation as (x, a) moves.  The wide default
    # noise scale lets truncated samples reach deep into the arctan tails.
    sigma_xi = float(params.get("sigma_xi", 25.0))
    sigma_eta2 = float(params.get("sigma_eta2", 0.25))
    if sigma_xi <= 0:
        raise CatalogError("sigma_xi must be positive")
    mu = _gaussian_or_raise([0.0], [[sigma_xi**2]], "state noise")
    nu = _gaussian_or_raise([0.0], [[sigma_eta2]], "observation noise")

    def transition(x, a, xi):
        return (x**2 + 1.0) * (a**2 + 1.0) * np.arctan(xi)

    def observation(a, x_next, eta):
        return x_next + eta

    def initial_observation(x, eta):
        return x + eta

    def obs_density(y, a, x_next):
        return nu.density(np.asarray(y, dtype=float) - np.atleast_2d(x_next))

    return StochasticControlModel(
        state_dim=1, action_dim=1, obs_dim=1, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief([0.0], [[1.0]]),
        obs_density=obs_density,
        metadata={
            "name": "arctan_example",
            "assumption_compliant": True,
            "transition_diffeomorphic": True,
            "image_varies_with_state": True,
            "profile_base_state": [0.0],
            "profile_action": [0.0],
        },
    )


def _build_delta_noise(params: dict) -> StochasticControlModel:
    mu = noiselib.point_mass([0.0])
    nu = noiselib.point_mass([0.0])

    def transition(x, a, xi):
        return x + xi

    def observation(a, x_next, eta):
        return x_next + eta

    def initial_observation(x, eta):
        return x + eta

    return StochasticControlModel(
        state_dim=1, action_dim=1, obs_dim=1, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief([0.0], [[1.0]]),
        obs_density=None,
        metadata={
            "name": "delta_noise_counterexample",
            "assumption_compliant": False,
            "violation": "state noise is a point mass with no Lebesgue density",
            "transition_diffeomorphic": True,
            "profile_base_state": [0.0],
            "profile_action": [0.0],
        },
    )


def _build_singular_gaussian(params: dict) -> StochasticControlModel:
    # State noise lives on the x1-axis; the transition drags its support
    # line vertically with the first state coordinate, so kernels at
    # different parameters are mutually singular.
    mu = noiselib.gaussian([0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]])
    cov_eta = _cov(params.get("sigma_eta2", 0.25), 2, "sigma_eta2")
    nu = _gaussian_or_raise(np.zeros(2), cov_eta, "observation noise")

    def transition(x, a, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return np.concatenate(
            [xi[..., 0:1], x[..., 0:1] + xi[..., 1:2]], axis=-1
        )

    def observation(a, x_next, eta):
        return x_next + eta

    def initial_observation(x, eta):
        return x + eta

    def obs_density(y, a, x_next):
        return nu.density(np.asarray(y, dtype=float) - np.atleast_2d(x_next))

    return StochasticControlModel(
        state_dim=2, action_dim=1, obs_dim=2, flavor="pomdp",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief([0.0, 0.0], np.eye(2)),
        obs_density=obs_density,
        metadata={
            "name": "singular_gaussian_counterexample",
            "assumption_compliant": False,
            "violation": "state noise covariance is singular; no Lebesgue density",
            "transition_diffeomorphic": True,
            "profile_base_state": [0.0, 0.0],
            "profile_action": [0.0],
            "profile_directions": [[1.0, 0.0]],
        },
    )


def _build_pomdp1_pointmass(params: dict) -> StochasticControlModel:
    # Observation channel reads the pre-transition state exactly; the
    # observation kernel is a moving point mass, hence not TV-continuous,
    # and the joint kernel fails the semi-uniform continuity property.
    mu = _gaussian_or_raise([0.0], [[float(params.get("sigma_xi2", 1.0))]], "state noise")
    nu = noiselib.point_mass([0.0])

    def transition(x, a, xi):
        return 0.9 * x + a + xi

    def observation(x, a, eta):
        return x + eta

    def initial_observation(x, eta):
        return x + eta

    return StochasticControlModel(
        state_dim=1, action_dim=1, obs_dim=1, flavor="pomdp1",
        transition=transition, observation=observation,
        initial_observation=initial_observation,
        mu=mu, nu=nu,
        p0=GaussianBelief([0.0], [[1.0]]),
        obs_density=None,
        metadata={
            "name": "pomdp1_pointmass",
            "assumption_compliant": False,
            "violation": "observation noise is a point mass; observation kernel not TV-continuous",
            "transition_diffeomorphic": True,
            "profile_base_state": [0.0],
            "profile_action": [0.0],
        },
    )


_BUILDERS = {
    "lssm": _build_lssm,
    "inventory_backorder": lambda p: _build_inventory(p, lost_sales=False),
    "inventory_lost_sales": lambda p: _build_inventory(p, lost_sales=True),
    "additive_nonlinear": _build_additive_nonlinear,
    "multiplicative_nonlinear": _build_multiplicative_nonlinear,
    "arctan_example": _build_arctan,
    "delta_noise_counterexample": _build_delta_noise,
    "singular_gaussian_counterexample": _build_singular_gaussian,
}

_FIXTURE_BUILDERS = {
    "pomdp1_pointmass": _build_pomdp1_pointmass,
}

# typos in experiment configs must fail loudly, never fall back to defaults
_ALLOWED_PARAMS = {
    "lssm": {"state_dim", "action_dim", "obs_dim", "F1", "F2", "G",
             "sigma_xi2", "sigma_eta2", "mean0", "cov0"},
    "inventory_backorder": {"state_dim", "demand", "demand_hi", "demand_scale",
                            "sigma_eta2", "mean0", "cov0"},
    "inventory_lost_sales": {"state_dim", "demand", "demand_hi", "demand_scale",
                             "sigma_eta2", "mean0", "cov0"},
    "additive_nonlinear": {"state_dim", "sigma_xi2", "sigma_eta2"},
    "multiplicative_nonlinear": {"state_dim", "sigma_xi2", "sigma_eta2"},
    "arctan_example": {"sigma_xi", "sigma_eta2"},
    "delta_noise_counterexample": set(),
    "singular_gaussian_counterexample": {"sigma_eta2"},
    "pomdp1_pointmass": {"sigma_xi2"},
}


def _check_param_keys(name: str, params: dict) -> None:
    unknown = set(params) - _ALLOWED_PARAMS[name]
    if unknown:
        raise CatalogError(
            f"unknown parameter(s) for {name!r}: {sorted(unknown)}; "
            f"allowed: {sorted(_ALLOWED_PARAMS[name])}")


def catalog_model(name: str, params: dict | None = None) -> StochasticControlModel:
    """Build a catalog model by name; raises CatalogError for unknown names."""
    if name not in _BUILDERS:
        raise CatalogError(f"unknown catalog model: {name!r} (choose from {CATALOG_NAMES})")
    _check_param_keys(name, params or {})
    model = _BUILDERS[name](dict(params or {}))
    model.metadata["params"] = dict(params or {})
    return model


def fixture_model(name: str, params: dict | None = None) -> StochasticControlModel:
    """Build a non-catalog diagnostic fixture by name."""
    if name not in _FIXTURE_BUILDERS:
        raise CatalogError(f"unknown fixture model: {name!r} (choose from {FIXTURE_NAMES})")
    _check_param_keys(name, params or {})
    model = _FIXTURE_BUILDERS[name](dict(params or {}))
    model.metadata["params"] = dict(params or {})
    return model


def model_to_json(model: StochasticControlModel) -> dict:
    name = model.metadata.get("name")
    if name not in _BUILDERS and name not in _FIXTURE_BUILDERS:
        raise CatalogError("only built-in models serialize to JSON")
    return {
        "schema_version": 1,
        "name": name,
        "dims": {
            "state": model.state_dim,
            "action": model.action_dim,
            "obs": model.obs_dim,
            "state_noise": model.mu.dim,
            "obs_noise": model.nu.dim,
        },
        "flavor": model.flavor,
        "params": model.metadata.get("params", {}),
        "noise": {
            "mu": noiselib.noise_to_json(model.mu),
            "nu": noiselib.noise_to_json(model.nu),
        },
    }


def model_from_json(blob: dict) -> StochasticControlModel:
    name = blob.get("name")
    params = blob.get("params", {})
    if name in _BUILDERS:
        model = catalog_model(name, params)
    elif name in _FIXTURE_BUILDERS:
        model = fixture_model(name, params)
    else:
        raise CatalogError(f"unknown model name in JSON: {name!r}")
    dims = blob.get("dims")
    if dims and (
        dims.get("state", model.state_dim) != model.state_dim
        or dims.get("obs", model.obs_dim) != model.obs_dim
        or dims.get("action", model.action_dim) != model.action_dim
    ):
        raise CatalogError("dims in JSON do not match the rebuilt model")
    return model
