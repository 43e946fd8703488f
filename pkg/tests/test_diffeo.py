import numpy as np
import pytest

from beliefmdp.diffeo import check_diffeomorphic, noise_jacobian
from beliefmdp.noise import Box


def test_noise_jacobian_matches_analytic():
    phi = lambda s2, om: np.stack(
        [np.atleast_2d(om)[:, 0] ** 2, 3.0 * np.atleast_2d(om)[:, 1]], axis=-1
    )
    omegas = np.array([[1.0, 0.5], [2.0, -1.0]])
    J = noise_jacobian(phi, np.zeros(1), omegas)
    assert J.shape == (2, 2, 2)
    assert np.allclose(J[0], [[2.0, 0.0], [0.0, 3.0]], atol=1e-6)
    assert np.allclose(J[1], [[4.0, 0.0], [0.0, 3.0]], atol=1e-6)


def test_affine_map_passes():
    phi = lambda s2, om: 2.0 * np.atleast_2d(om) + float(s2[0])
    rep = check_diffeomorphic(
        phi, Box([-1.0], [1.0]), Box([-3.0], [3.0]), grid_res=7
    )
    assert rep.verdict == "pass"
    assert rep.min_abs_det == pytest.approx(2.0, abs=1e-4)
    assert rep.n_injectivity_collisions == 0


def test_parameter_scaled_map_passes():
    # multiplicative coupling stays a diffeomorphism while s2 is away from 0
    phi = lambda s2, om: (1.0 + float(s2[0]) ** 2) * np.atleast_2d(om)
    rep = check_diffeomorphic(phi, Box([0.5], [2.0]), Box([-2.0], [2.0]), grid_res=7)
    assert rep.verdict == "pass"


def test_constant_map_fails_with_witness():
    phi = lambda s2, om: np.zeros_like(np.atleast_2d(om))
    rep = check_diffeomorphic(phi, Box([-1.0], [1.0]), Box([-1.0], [1.0]), grid_res=5)
    assert rep.verdict == "fail"
    assert rep.min_abs_det <= 1e-8
    kinds = {w["kind"] for w in rep.witnesses}
    assert "singular_jacobian" in kinds or "injectivity_collision" in kinds


def test_folding_map_fails():
    # omega -> omega^2 folds the line; zero derivative at 0 and 2-to-1 images
    phi = lambda s2, om: np.atleast_2d(om) ** 2
    rep = check_diffeomorphic(phi, Box([0.0], [1.0]), Box([-1.0], [1.0]), grid_res=7)
    assert rep.verdict == "fail"


def test_2d_rotation_passes():
    theta = 0.3
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    phi = lambda s2, om: np.atleast_2d(om) @ R.T
    rep = check_diffeomorphic(
        phi, Box([0.0], [1.0]), Box([-1.0, -1.0], [1.0, 1.0]), grid_res=5
    )
    assert rep.verdict == "pass"
    assert rep.min_abs_det == pytest.approx(1.0, abs=1e-4)


def test_rank_deficient_2d_fails():
    # projects the plane onto a line: determinant identically zero
    P = np.array([[1.0, 0.0], [1.0, 0.0]])
    phi = lambda s2, om: np.atleast_2d(om) @ P.T
    rep = check_diffeomorphic(
        phi, Box([0.0], [1.0]), Box([-1.0, -1.0], [1.0, 1.0]), grid_res=5
    )
    assert rep.verdict == "fail"
    assert rep.min_abs_det <= 1e-8


def test_report_serializes():
    phi = lambda s2, om: np.atleast_2d(om)
    rep = check_diffeomorphic(phi, Box([0.0], [1.0]), Box([-1.0], [1.0]), grid_res=3)
    blob = rep.to_json()
    assert blob["verdict"] == "pass"
    assert isinstance(blob["witnesses"], list)


def test_grid_size_guard():
    phi = lambda s2, om: np.atleast_2d(om)
    with pytest.raises(ValueError):
        check_diffeomorphic(
            phi,
            Box([-1.0] * 4, [1.0] * 4),
            Box([-1.0] * 4, [1.0] * 4),
            grid_res=9,
        )
