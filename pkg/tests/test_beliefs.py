import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefmdp.beliefs import (
    FiniteBelief,
    GaussianBelief,
    ParticleBelief,
    belief_summary,
)


def test_finite_belief_normalizes_and_validates():
    z = FiniteBelief([0.25, 0.75])
    assert np.allclose(z.weights, [0.25, 0.75])
    with pytest.raises(ValueError):
        FiniteBelief([0.5, 0.4])  # does not sum to one
    with pytest.raises(ValueError):
        FiniteBelief([1.5, -0.5])
    with pytest.raises(ValueError):
        FiniteBelief([])


def test_finite_belief_mean_requires_states():
    z = FiniteBelief([0.5, 0.5])
    with pytest.raises(ValueError):
        z.mean()
    z2 = FiniteBelief([0.25, 0.75], states=[[0.0], [4.0]])
    assert np.allclose(z2.mean(), [3.0])
    assert z2.support_size() == 2


def test_gaussian_belief_validation():
    z = GaussianBelief([0.0, 1.0], [[1.0, 0.2], [0.2, 2.0]])
    assert z.dim == 2
    with pytest.raises(ValueError):
        GaussianBelief([0.0], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianBelief([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])  # asymmetric
    with pytest.raises(ValueError):
        GaussianBelief([0.0], [[-1.0]])
    # singular but PSD is allowed
    GaussianBelief([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])


def test_particle_belief_ess():
    z = ParticleBelief(np.zeros((4, 1)), np.full(4, 0.25))
    assert z.ess() == pytest.approx(4.0)
    z2 = ParticleBelief(np.zeros((4, 1)), [1.0, 0.0, 0.0, 0.0])
    assert z2.ess() == pytest.approx(1.0)


def test_particle_belief_mean_and_lineage():
    z = ParticleBelief([[0.0], [2.0]], [0.5, 0.5], lineage=(7, 3))
    assert np.allclose(z.mean(), [1.0])
    assert z.lineage == (7, 3)
    with pytest.raises(ValueError):
        ParticleBelief([[0.0]], [0.5, 0.5])


@settings(max_examples=50, deadline=None)
@given(
    raw=st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8).filter(
        lambda xs: sum(xs) > 1e-6
    )
)
def test_finite_belief_weights_live_on_simplex(raw):
    total = sum(raw)
    z = FiniteBelief([x / total for x in raw])
    assert np.all(z.weights >= 0)
    assert np.isclose(np.sum(z.weights), 1.0)


def test_belief_summary_shapes():
    s1 = belief_summary(FiniteBelief([0.3, 0.7]))
    assert s1["mean"] == pytest.approx([0.3, 0.7])
    assert s1["spread"] is None

    s2 = belief_summary(GaussianBelief([1.0], [[4.0]]))
    assert s2["mean"] == [1.0]
    assert s2["spread"] == [2.0]

    s3 = belief_summary(ParticleBelief([[0.0], [2.0]], [0.5, 0.5]))
    assert s3["mean"] == pytest.approx([1.0])
    assert s3["spread"] == pytest.approx([1.0])
    assert s3["support_size"] == 2

    with pytest.raises(TypeError):
        belief_summary("not a belief")
