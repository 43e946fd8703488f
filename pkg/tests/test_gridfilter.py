import numpy as np
import pytest
from scipy import stats

from beliefmdp.beliefs import GaussianBelief
from beliefmdp.catalog import catalog_model, fixture_model
from beliefmdp.filtering import kalman_step
from beliefmdp.gridfilter import (
    gaussian_on_grid,
    grid_bayes_oracle,
    transition_density_matrix,
)


def _grid_l1(grid_belief, gaussian_belief):
    pts = grid_belief.states[:, 0]
    cell = pts[1] - pts[0]
    dens = stats.norm(gaussian_belief.mean[0], np.sqrt(gaussian_belief.cov[0, 0])).pdf(pts)
    ref = dens / np.sum(dens)
    return float(np.sum(np.abs(grid_belief.weights - ref)))


def test_gaussian_on_grid_matches_density_shape():
    z = GaussianBelief([0.5], [[2.0]])
    axes = (np.linspace(-8.0, 8.0, 401),)
    g = gaussian_on_grid(z, axes)
    assert _grid_l1(g, z) < 1e-10
    mean = float(g.weights @ g.states[:, 0])
    assert mean == pytest.approx(0.5, abs=1e-6)


def test_gaussian_on_grid_rejects_empty_mass():
    z = GaussianBelief([1e6], [[1e-6]])
    axes = (np.linspace(-1.0, 1.0, 11),)
    with pytest.raises(ValueError):
        gaussian_on_grid(z, axes)


def test_transition_density_matrix_rows_are_densities():
    m = catalog_model("lssm")
    axes = (np.linspace(-8.0, 8.0, 161),)
    D = transition_density_matrix(m, axes, [0.0])
    pts = axes[0]
    cell = pts[1] - pts[0]
    # row i is the N(0.9 x_i, 1) density over target nodes; the noise box
    # is cut at the 1e-6 tail, so compare inside that radius only
    cut = stats.norm.ppf(1.0 - 1e-6) - 0.1
    for i in (0, 80, 160):
        expected = stats.norm(0.9 * pts[i], 1.0).pdf(pts)
        near = np.abs(pts - 0.9 * pts[i]) < cut
        assert np.allclose(D[i][near], expected[near], rtol=1e-8, atol=1e-12)
        assert np.all(D[i][~near] <= stats.norm.pdf(cut) + 1e-12)
    sums = D.sum(axis=1) * cell
    inner = np.abs(0.9 * pts) < 8.0 - 5.0  # rows whose mass stays on the grid
    assert np.allclose(sums[inner], 1.0, atol=1e-5)


def test_transition_density_matrix_cached_by_identity():
    m = catalog_model("lssm")
    axes = (np.linspace(-2.0, 2.0, 21),)
    D1 = transition_density_matrix(m, axes, [0.0])
    D2 = transition_density_matrix(m, axes, [0.0])
    assert D1 is D2
    # a separate model instance with identical parameters gets its own entry
    m2 = catalog_model("lssm")
    D3 = transition_density_matrix(m2, axes, [0.0])
    assert D3 is not D1
    assert np.allclose(D3, D1)


def test_grid_oracle_matches_kalman_one_step():
    m = catalog_model("lssm")
    axes = (np.linspace(-8.0, 8.0, 401),)
    z0 = GaussianBelief([0.0], [[1.0]])
    prior = gaussian_on_grid(z0, axes)
    post = grid_bayes_oracle(m, axes, prior, [0.0], [0.3])
    exact = kalman_step(m.lssm, z0.mean, z0.cov, [0.0], [0.3])
    assert _grid_l1(post, GaussianBelief(exact.mean, exact.cov)) < 0.002


def _pomdp1_linear(sigma_eta2=0.25):
    from beliefmdp.models import StochasticControlModel
    from beliefmdp.noise import gaussian

    def obs_density(y, x_pts, a):
        pts = np.atleast_2d(x_pts)
        return stats.norm(pts[:, 0], np.sqrt(sigma_eta2)).pdf(float(np.atleast_1d(y)[0]))

    return StochasticControlModel(
        state_dim=1,
        action_dim=1,
        obs_dim=1,
        flavor="pomdp1",
        transition=lambda x, a, xi: 0.8 * np.asarray(x) + np.atleast_1d(a)[0] + np.atleast_2d(xi),
        observation=lambda x, a, eta: np.asarray(x) + np.atleast_2d(eta),
        mu=gaussian([0.0], [[1.0]]),
        nu=gaussian([0.0], [[sigma_eta2]]),
        p0=GaussianBelief([0.0], [[1.0]]),
        obs_density=obs_density,
    )


def test_grid_oracle_pre_move_flavor():
    m = _pomdp1_linear()
    axes = (np.linspace(-6.0, 6.0, 201),)
    z0 = GaussianBelief([0.0], [[1.0]])
    prior = gaussian_on_grid(z0, axes)
    post = grid_bayes_oracle(m, axes, prior, [0.0], [0.2])
    # independent route: closed-form scipy densities instead of Newton sweeps
    pts = axes[0]
    lik = stats.norm(pts, 0.5).pdf(0.2)
    trans = stats.norm.pdf(pts[None, :] - 0.8 * pts[:, None])
    joint = (prior.weights * lik) @ trans
    ref = joint / joint.sum()
    assert float(np.sum(np.abs(post.weights - ref))) < 1e-4
    # flavor matters: the post-move order gives a different posterior
    joint_wrong = (prior.weights @ trans) * lik
    wrong = joint_wrong / joint_wrong.sum()
    assert float(np.sum(np.abs(ref - wrong))) > 1e-3


def test_grid_oracle_requires_density():
    m = catalog_model("delta_noise_counterexample")
    axes = (np.linspace(-1.0, 1.0, 11),)
    z0 = GaussianBelief([0.0], [[1.0]])
    prior = gaussian_on_grid(z0, axes)
    with pytest.raises(ValueError):
        grid_bayes_oracle(m, axes, prior, [0.0], [0.0])
