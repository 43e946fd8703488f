import numpy as np
import pytest
from scipy.special import erf

from beliefmdp.continuity import continuity_profile, profile_csv
from beliefmdp.noise import gaussian, point_mass


def _shift_map(s2, om):
    return np.atleast_2d(om) + np.atleast_1d(s2)[0]


def test_additive_gaussian_tv_matches_analytic():
    # shifting N(0,1) by r gives TV = erf(r / (2 sqrt 2))
    p = gaussian([0.0], [[1.0]])
    radii = [0.5, 0.1, 0.02]
    prof = continuity_profile(
        _shift_map, p, [0.0], radii, n_samples=4000, density_grid_res=241, seed=0
    )
    assert prof.tv_mode == "density_l1"
    for row in prof.rows:
        expected = float(erf(row.radius / (2.0 * np.sqrt(2.0))))
        assert row.tv == pytest.approx(expected, abs=0.01)
    assert prof.verdicts["tv"] == "continuous"
    assert prof.verdicts["bl"] == "continuous"


def test_point_mass_shift_is_tv_discontinuous():
    # coupled route: every atom moves, TV upper bound stays 1 at any radius
    p = point_mass([0.0])
    prof = continuity_profile(
        _shift_map, p, [0.0], [0.5, 0.25, 0.125, 0.0625], n_samples=500, seed=1
    )
    assert prof.tv_mode == "coupled_upper_bound"
    assert all(row.tv == 1.0 for row in prof.rows)
    assert prof.verdicts["tv"] == "discontinuous"
    # the images converge weakly: BL equals the shift radius exactly
    for row in prof.rows:
        assert row.bl == pytest.approx(row.radius, rel=1e-9)
    assert prof.verdicts["bl"] == "continuous"


def test_radii_validation():
    p = gaussian([0.0], [[1.0]])
    with pytest.raises(ValueError):
        continuity_profile(_shift_map, p, [0.0], [0.1, 0.5], n_samples=100)
    with pytest.raises(ValueError):
        continuity_profile(_shift_map, p, [0.0], [0.5, -0.1], n_samples=100)
    with pytest.raises(ValueError):
        continuity_profile(_shift_map, p, [0.0], [0.5], directions=[[0.0]], n_samples=100)
    with pytest.raises(ValueError):
        continuity_profile(_shift_map, p, [0.0], [0.5], mode="exact", n_samples=100)


def test_density_mode_requires_density():
    with pytest.raises(ValueError):
        continuity_profile(_shift_map, point_mass([0.0]), [0.0], [0.5], mode="density", n_samples=100)


def test_direction_achieving_maximum_is_reported():
    # the map ignores the second coordinate of s2, so direction 0 dominates
    def phi(s2, om):
        return np.atleast_2d(om) + np.atleast_1d(s2)[0]

    p = gaussian([0.0], [[1.0]])
    prof = continuity_profile(
        phi, p, [0.0, 0.0], [0.5], directions=[[0.0, 1.0], [1.0, 0.0]],
        n_samples=2000, density_grid_res=161, seed=0,
    )
    assert prof.rows[0].tv_direction == 1
    assert prof.rows[0].tv > 0.1


def test_profile_reproducible_and_serializable():
    p = gaussian([0.0], [[1.0]])
    a = continuity_profile(_shift_map, p, [0.0], [0.5, 0.25], n_samples=600, seed=4)
    b = continuity_profile(_shift_map, p, [0.0], [0.5, 0.25], n_samples=600, seed=4)
    assert a.to_json() == b.to_json()
    csv = profile_csv(a)
    lines = csv.strip().split("\n")
    assert lines[0] == "radius,tv,tv_band,bl,bl_band"
    assert len(lines) == 3
    assert csv.endswith("\n")
