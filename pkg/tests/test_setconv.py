import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from beliefmdp.noise import Box
from beliefmdp.setconv import Ball, set_convergence_check


def _scaling(s2, om):
    return float(np.atleast_1d(s2)[0]) * np.atleast_2d(om)


def _shear(s2, om):
    om = np.atleast_2d(om)
    s = float(np.atleast_1d(s2)[0])
    return np.stack([om[:, 0] + s * om[:, 1], om[:, 1]], axis=-1)


def test_ball_geometry():
    b = Ball(center=[0.0, 0.0], radius=2.0)
    assert b.dim == 2
    assert b.contains([[1.0, 1.0], [2.5, 0.0]]).tolist() == [True, False]
    with pytest.raises(ValueError):
        Ball(center=[0.0], radius=0.0)
    from beliefmdp.seeding import substream

    pts = b.sample(substream(0, "t"), 200)
    assert b.contains(pts).all()
    # half the draws sit on the boundary sphere
    on_edge = np.isclose(np.linalg.norm(pts, axis=1), 2.0, atol=1e-9)
    assert np.sum(on_edge) >= 100


def test_disk_scaling_against_analytic_areas():
    region = Ball(center=[0.0, 0.0], radius=1.0)
    rep = set_convergence_check(_scaling, region, [1.0], [1.1], resolution=220, seed=0)
    assert not rep.inconclusive
    assert rep.symdiff == pytest.approx(np.pi * (1.1**2 - 1.0), rel=0.08)
    assert rep.hausdorff == pytest.approx(0.1, abs=0.03)


def test_shear_square_against_shapely_oracle():
    region = Box([0.0, 0.0], [1.0, 1.0])
    s = 0.5
    rep = set_convergence_check(_shear, region, [0.0], [s], resolution=200, seed=0)
    square = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    slanted = Polygon([(0, 0), (1, 0), (1 + s, 1), (s, 1)])
    exact_sym = square.symmetric_difference(slanted).area
    # filled-set Hausdorff of convex shapes is attained at a vertex
    verts = list(square.exterior.coords) + list(slanted.exterior.coords)
    exact_haus = max(
        max(Point(v).distance(slanted) for v in square.exterior.coords),
        max(Point(v).distance(square) for v in slanted.exterior.coords),
    )
    assert not rep.inconclusive
    assert rep.symdiff == pytest.approx(exact_sym, rel=0.08)
    assert rep.hausdorff == pytest.approx(exact_haus, abs=0.04)


def test_discrepancy_shrinks_along_parameter_ladder():
    region = Ball(center=[0.0, 0.0], radius=1.0)
    syms, hauss = [], []
    for s in (1.2, 1.05, 1.01):
        rep = set_convergence_check(_scaling, region, [1.0], [s], resolution=160, seed=0)
        syms.append(rep.symdiff)
        hauss.append(rep.hausdorff)
    assert syms[0] > syms[1] > syms[2]
    assert hauss[0] > hauss[1] >= hauss[2]


def test_identical_parameters_give_zero_discrepancy():
    region = Ball(center=[0.0, 0.0], radius=1.0)
    rep = set_convergence_check(_scaling, region, [1.0], [1.0], resolution=120, seed=0)
    assert rep.symdiff == 0.0
    assert rep.hausdorff == 0.0
    assert rep.n_cells_base == rep.n_cells_perturbed


def test_noninvertible_map_is_flagged_inconclusive():
    collapse = lambda s2, om: 0.0 * np.atleast_2d(om)
    region = Ball(center=[0.0, 0.0], radius=1.0)
    rep = set_convergence_check(collapse, region, [1.0], [2.0], resolution=64, seed=0)
    assert rep.inconclusive
    assert rep.notes


def test_report_deterministic_and_serializable():
    region = Box([-1.0], [1.0])
    f = lambda s2, om: np.atleast_2d(om) + float(np.atleast_1d(s2)[0])
    r1 = set_convergence_check(f, region, [0.0], [0.3], resolution=100, seed=7)
    r2 = set_convergence_check(f, region, [0.0], [0.3], resolution=100, seed=7)
    assert r1.to_json() == r2.to_json()
    assert r1.symdiff == pytest.approx(2.0 * 0.3, rel=0.05)  # two sticks, offset 0.3
    assert r1.hausdorff == pytest.approx(0.3, abs=0.05)
