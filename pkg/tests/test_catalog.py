import numpy as np
import pytest

from beliefmdp.catalog import (
    CATALOG_NAMES,
    FIXTURE_NAMES,
    CatalogError,
    catalog_model,
    fixture_model,
    model_from_json,
    model_to_json,
)
from beliefmdp.models import observe, observe1, step_state


def test_every_catalog_name_builds():
    for name in CATALOG_NAMES:
        m = catalog_model(name)
        assert m.state_dim >= 1 and m.obs_dim >= 1
        xi = m.mu.sample(0, 1)[0]
        x = np.zeros(m.state_dim)
        a = np.zeros(m.action_dim)
        xn = step_state(m, x, a, xi)
        eta = m.nu.sample(0, 1)[0]
        if m.flavor == "pomdp":
            observe(m, a, xn, eta)
        else:
            observe1(m, x, a, eta)


def test_every_fixture_name_builds():
    for name in FIXTURE_NAMES:
        m = fixture_model(name)
        assert m.flavor == "pomdp1"


def test_unknown_names_rejected():
    with pytest.raises(CatalogError):
        catalog_model("no_such_model")
    with pytest.raises(CatalogError):
        fixture_model("lssm")  # fixture namespace is separate


def test_unknown_params_rejected():
    with pytest.raises(CatalogError) as exc:
        catalog_model("lssm", {"sigma_eta_sq": 0.25})
    assert "sigma_eta_sq" in str(exc.value)
    with pytest.raises(CatalogError):
        catalog_model("delta_noise_counterexample", {"radius": 1.0})


def test_lssm_default_is_linear_gaussian():
    m = catalog_model("lssm")
    assert m.lssm is not None
    # the transition map agrees with the stored matrices
    x = np.array([0.7] * m.state_dim)
    a = np.array([0.3] * m.action_dim)
    xi = np.array([0.1] * m.state_dim)
    expected = m.lssm.F1 @ x + m.lssm.F2 @ a + xi
    assert np.allclose(step_state(m, x, a, xi), expected)


def test_lssm_param_override():
    m = catalog_model("lssm", {"F1": [[0.5]], "sigma_eta2": 0.04})
    assert np.allclose(m.lssm.F1, [[0.5]])
    assert np.allclose(m.lssm.cov_eta, [[0.04]])


def test_arctan_example_shape():
    m = catalog_model("arctan_example")
    xn = step_state(m, [0.0], [0.0], [100.0])
    assert -np.pi / 2 < xn[0] < np.pi / 2  # image stays inside the open arc
    with pytest.raises(CatalogError):
        catalog_model("arctan_example", {"sigma_xi": 0.0})


def test_delta_noise_counterexample_is_deterministic():
    m = catalog_model("delta_noise_counterexample")
    draws = m.mu.sample(3, 8)
    assert np.allclose(draws, draws[0])
    assert m.mu.density is None


def test_singular_counterexample_noise_is_rank_deficient():
    m = catalog_model("singular_gaussian_counterexample")
    draws = m.mu.sample(0, 256)
    cov = np.cov(draws.T)
    assert np.linalg.matrix_rank(np.atleast_2d(cov), tol=1e-8) < m.mu.dim


def test_inventory_models_censor_or_not():
    back = catalog_model("inventory_backorder")
    lost = catalog_model("inventory_lost_sales")
    xi = np.array([5.0])  # demand draw
    x, a = np.array([1.0]), np.array([2.0])
    xb = step_state(back, x, a, xi)
    xl = step_state(lost, x, a, xi)
    assert xb[0] == pytest.approx(1.0 + 2.0 - 5.0)  # may go negative
    assert xl[0] == pytest.approx(max(1.0 + 2.0 - 5.0, 0.0))


def test_metadata_profiles_present():
    for name in CATALOG_NAMES:
        m = catalog_model(name)
        assert "profile_base_state" in m.metadata
        assert "profile_action" in m.metadata


def test_json_round_trip():
    m = catalog_model("lssm", {"sigma_eta2": 0.25})
    blob = model_to_json(m)
    clone = model_from_json(blob)
    assert clone.state_dim == m.state_dim
    x, a = np.zeros(m.state_dim), np.zeros(m.action_dim)
    xi = m.mu.sample(0, 1)[0]
    assert np.allclose(step_state(clone, x, a, xi), step_state(m, x, a, xi))
    with pytest.raises(CatalogError):
        model_from_json({"name": "mystery", "params": {}})
