import numpy as np
import pytest
from scipy import stats

from beliefmdp.beliefs import FiniteBelief, GaussianBelief, ParticleBelief
from beliefmdp.catalog import catalog_model
from beliefmdp.filtering import (
    DegenerateUpdateError,
    SingularInnovationError,
    bayes_update,
    filter_kernel_sample,
    kalman_step,
    predictive_observation,
    sample_belief,
    systematic_resample,
)
from beliefmdp.fixtures import load_fixture
from beliefmdp.models import FiniteTablePOMDP
from beliefmdp.seeding import substream


def _two_state(flavor="pomdp"):
    m = load_fixture("two_state_pomdp")
    if flavor == "pomdp":
        return m
    return FiniteTablePOMDP(
        transition=m.transition,
        observation=m.observation,
        flavor="pomdp1",
        metadata=m.metadata,
    )


def test_finite_update_matches_hand_computation():
    # prior (1/2, 1/2), T[0] rows (0.9,0.1)/(0.2,0.8), Q[0] col0 (0.8, 0.3):
    # predicted (0.55, 0.45), joint (0.44, 0.135), norm 0.575
    m = _two_state()
    step = bayes_update(m, m.uniform_belief(), 0, 0)
    assert step.predictive_likelihood == pytest.approx(0.575)
    assert np.allclose(step.posterior.weights, [88.0 / 115.0, 27.0 / 115.0])


def test_finite_update_pre_move_observation():
    # pomdp1 weights by the likelihood of the pre-transition state first:
    # (0.4, 0.15) @ T[0] = (0.39, 0.16), norm 0.55
    m = _two_state("pomdp1")
    step = bayes_update(m, m.uniform_belief(), 0, 0)
    assert step.predictive_likelihood == pytest.approx(0.55)
    assert np.allclose(step.posterior.weights, [39.0 / 55.0, 16.0 / 55.0])


def test_finite_update_validates_indices():
    m = _two_state()
    with pytest.raises(ValueError):
        bayes_update(m, m.uniform_belief(), 5, 0)
    with pytest.raises(ValueError):
        bayes_update(m, m.uniform_belief(), 0, 9)
    with pytest.raises(TypeError):
        bayes_update(m, GaussianBelief([0.0], [[1.0]]), 0, 0)


def test_impossible_observation_raises_degenerate():
    T = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    Q = np.array([[[1.0, 0.0], [1.0, 0.0]]])  # observation 1 never happens
    m = FiniteTablePOMDP(transition=T, observation=Q)
    with pytest.raises(DegenerateUpdateError) as exc:
        bayes_update(m, m.uniform_belief(), 0, 1)
    assert isinstance(exc.value.prior, FiniteBelief)


def test_kalman_step_scalar_oracle():
    # F1=0.9, cov_xi=1, G=1, cov_eta=0.25, prior N(0,1), y=0.3:
    # P_pred=1.81, S=2.06, mean=1.81*0.3/2.06, cov via Joseph form
    m = catalog_model("lssm")
    res = kalman_step(m.lssm, [0.0], [[1.0]], [0.0], [0.3])
    assert res.mean[0] == pytest.approx(0.2635922330097087, abs=1e-12)
    assert res.cov[0, 0] == pytest.approx(0.2196601941747573, abs=1e-12)
    expected_pred = stats.norm(0.0, np.sqrt(2.06)).pdf(0.3)
    assert res.predictive_density == pytest.approx(expected_pred, rel=1e-10)


def test_kalman_update_via_bayes_dispatch():
    m = catalog_model("lssm")
    step = bayes_update(m, GaussianBelief([0.0], [[1.0]]), [0.0], [0.3])
    assert step.posterior.mean[0] == pytest.approx(0.2635922330097087)
    assert step.metadata["kind"] == "kalman"


def test_singular_innovation_raises():
    m = catalog_model("lssm", {"G": [[0.0]], "sigma_eta2": 0.0})
    with pytest.raises(SingularInnovationError):
        kalman_step(m.lssm, [0.0], [[1.0]], [0.0], [0.0])


def test_particle_update_tracks_kalman():
    m = catalog_model("lssm")
    pts = sample_belief(GaussianBelief([0.0], [[1.0]]), 11, 4000)
    z = ParticleBelief(points=pts, weights=np.full(4000, 1.0 / 4000), lineage=(11, 0))
    step = bayes_update(m, z, [0.0], [0.3])
    exact = kalman_step(m.lssm, [0.0], [[1.0]], [0.0], [0.3])
    assert step.posterior.mean()[0] == pytest.approx(exact.mean[0], abs=0.05)
    assert step.posterior.lineage == (11, 1)
    assert step.metadata["kind"] == "particle"


def test_particle_update_reproducible():
    m = catalog_model("lssm")
    z = ParticleBelief(points=np.zeros((64, 1)), weights=np.full(64, 1 / 64), lineage=(3, 0))
    p1 = bayes_update(m, z, [0.0], [0.5]).posterior
    p2 = bayes_update(m, z, [0.0], [0.5]).posterior
    assert np.array_equal(p1.points, p2.points)
    assert np.array_equal(p1.weights, p2.weights)


def test_particle_degenerate_when_all_likelihoods_vanish():
    m = catalog_model("lssm", {"sigma_eta2": 1e-12})
    z = ParticleBelief(points=np.zeros((8, 1)), weights=np.full(8, 1 / 8), lineage=(0, 0))
    with pytest.raises(DegenerateUpdateError):
        bayes_update(m, z, [0.0], [100.0])


def test_systematic_resample_counts_follow_weights():
    w = np.array([0.5, 0.25, 0.125, 0.125])
    idx = systematic_resample(w, substream(0, "t"))
    assert idx.shape == (4,)
    counts = np.bincount(idx, minlength=4)
    # systematic resampling keeps counts within 1 of n * w
    assert np.all(np.abs(counts - 4 * w) <= 1)


def test_sample_belief_paths():
    g = sample_belief(GaussianBelief([2.0], [[0.0]]), 0, 5)
    assert np.allclose(g, 2.0)
    f = sample_belief(FiniteBelief([1.0], states=[[7.0]]), 0, 3)
    assert np.allclose(f, 7.0)
    p = sample_belief(ParticleBelief([[1.0], [1.0]], [0.5, 0.5]), 0, 4)
    assert np.allclose(p, 1.0)
    with pytest.raises(ValueError):
        sample_belief(FiniteBelief([0.5, 0.5]), 0, 2)


def test_predictive_observation_exact_atoms():
    m = _two_state()
    pred = predictive_observation(m, m.uniform_belief(), 0)
    # y-law is predicted @ Q[0] = (0.55, 0.45) @ [[0.8,0.2],[0.3,0.7]]
    assert np.allclose(pred.weights, [0.575, 0.425])
    m1 = _two_state("pomdp1")
    pred1 = predictive_observation(m1, m1.uniform_belief(), 0)
    # pre-move observation: law is prior @ Q[0]
    assert np.allclose(pred1.weights, [0.55, 0.45])


def test_predictive_observation_mc_matches_lssm():
    m = catalog_model("lssm")
    z = GaussianBelief([0.0], [[1.0]])
    pred = predictive_observation(m, z, [0.0], n_samples=40_000, seed=5)
    # y ~ N(0, F1^2 + cov_xi + cov_eta) = N(0, 2.06)
    assert pred.mean()[0] == pytest.approx(0.0, abs=0.03)
    assert float(np.var(pred.points)) == pytest.approx(2.06, rel=0.05)


def test_filter_kernel_sample_finite():
    m = _two_state()
    out = filter_kernel_sample(m, m.uniform_belief(), 0, n_draws=50, seed=2)
    assert len(out.beliefs) + out.degenerate_count == 50
    posts = {tuple(np.round(b.weights, 6)) for b in out.beliefs}
    # only two possible posteriors, one per observation symbol
    assert len(posts) == 2
