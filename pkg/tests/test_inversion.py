import numpy as np
import pytest
from scipy import stats

from beliefmdp.inversion import (
    SingularJacobianError,
    change_of_variables_density,
    density_on_grid,
    density_via_change_of_variables,
    newton_invert,
)
from beliefmdp.noise import Box, gaussian, uniform_box


def test_newton_invert_affine():
    phi = lambda s2, om: 2.0 * np.atleast_2d(om) + 1.0
    targets = np.array([[1.0], [3.0], [-5.0]])
    res = newton_invert(phi, np.zeros(1), targets, Box([-10.0], [10.0]))
    assert res.converged.all()
    assert np.allclose(res.omegas, (targets - 1.0) / 2.0, atol=1e-8)
    assert np.allclose(res.dets, 2.0, atol=1e-5)


def test_newton_invert_nonlinear_scalar():
    # strictly increasing cubic-plus-line; unique real root everywhere
    phi = lambda s2, om: np.atleast_2d(om) ** 3 + np.atleast_2d(om)
    targets = np.array([[0.0], [2.0], [10.0], [-2.0]])
    res = newton_invert(phi, np.zeros(1), targets, Box([-4.0], [4.0]))
    assert res.converged.all()
    recon = phi(None, res.omegas)
    assert np.allclose(recon, targets, atol=1e-6)


def test_newton_invert_reports_misses():
    # image of the box [-1, 1] under cube is [-1, 1]; 9 lies outside
    phi = lambda s2, om: np.atleast_2d(om) ** 3
    res = newton_invert(phi, np.zeros(1), np.array([[9.0]]), Box([-1.0], [1.0]))
    assert res.n_failures == 1
    assert not res.converged[0]


def test_newton_invert_2d_rotation():
    theta = 0.4
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    phi = lambda s2, om: np.atleast_2d(om) @ R.T
    t = np.array([[1.0, 2.0], [-0.5, 0.25]])
    res = newton_invert(phi, np.zeros(1), t, Box([-5.0, -5.0], [5.0, 5.0]))
    assert res.converged.all()
    assert np.allclose(res.omegas, t @ R, atol=1e-6)  # R^{-1} = R^T
    assert np.allclose(res.dets, 1.0, atol=1e-4)


def test_change_of_variables_linear_gaussian():
    # X = 3 omega + 1, omega ~ N(0,1)  =>  X ~ N(1, 9)
    phi = lambda s2, om: 3.0 * np.atleast_2d(om) + 1.0
    p = gaussian([0.0], [[1.0]])
    pts = np.array([[1.0], [4.0], [-2.0]])
    vals, res = change_of_variables_density(phi, p, np.zeros(1), pts)
    expected = stats.norm(1.0, 3.0).pdf(pts[:, 0])
    assert np.allclose(vals, expected, rtol=1e-6)
    assert res.converged.all()


def test_change_of_variables_exponential_of_gaussian():
    # X = exp(omega), omega ~ N(0,1): lognormal density
    phi = lambda s2, om: np.exp(np.atleast_2d(om))
    p = gaussian([0.0], [[1.0]])
    pts = np.array([[0.5], [1.0], [2.5]])
    vals, _ = change_of_variables_density(phi, p, np.zeros(1), pts)
    expected = stats.lognorm(s=1.0).pdf(pts[:, 0])
    assert np.allclose(vals, expected, rtol=1e-5)


def test_points_outside_image_get_zero():
    phi = lambda s2, om: np.atleast_2d(om) ** 2  # image of R is [0, inf)
    p = gaussian([0.0], [[1.0]])
    val = density_via_change_of_variables(phi, p, np.zeros(1), [-1.0])
    assert val == 0.0


def test_singular_jacobian_raises_with_witness():
    # near-flat slope at the root: Newton still converges, |det| stays tiny
    phi = lambda s2, om: 1e-9 * np.atleast_2d(om) + np.atleast_2d(om) ** 3
    p = uniform_box([-1.0], [1.0])
    with pytest.raises(SingularJacobianError) as exc:
        change_of_variables_density(phi, p, np.zeros(1), np.array([[0.0]]))
    err = exc.value
    assert err.target == [0.0]
    assert abs(err.omega[0]) < 1e-3


def test_density_requires_density():
    from beliefmdp.noise import point_mass

    phi = lambda s2, om: np.atleast_2d(om)
    with pytest.raises(ValueError):
        change_of_variables_density(phi, point_mass([0.0]), np.zeros(1), np.zeros((1, 1)))


def test_density_on_grid_integrates_to_one():
    phi = lambda s2, om: 0.5 * np.atleast_2d(om)
    p = gaussian([0.0], [[1.0]])
    axes = (np.linspace(-4.0, 4.0, 161),)
    g = density_on_grid(phi, p, np.zeros(1), axes)
    assert abs(g.riemann_sum() - 1.0) < 1e-3
    peak = g.values[80]  # x = 0
    assert abs(peak - stats.norm(0.0, 0.5).pdf(0.0)) < 1e-6
