import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from jointsense.estimator import JointSensingAllocator
from jointsense.exceptions import ConvergenceWarning, DimensionError
from jointsense.ra import UserConfig, su_iri_arrays
from jointsense.sim import ScenarioConfig

FAST = dict(grid_size=40, n_fading=60, replications=5, inner_slots=60, outer_rounds=2, dual_iters=15)


@pytest.fixture(scope="module")
def small_scenario(scenario):
    return ScenarioConfig(scenario.channels[:2], [UserConfig(1.0, 8.0), UserConfig(1.0, 5.0), UserConfig(2.0, 6.0)])


@pytest.fixture(scope="module")
def fitted(small_scenario):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return JointSensingAllocator(random_state=3, **FAST).fit(small_scenario)


def test_params_and_clone():
    est = JointSensingAllocator(policy="myopic", grid_size=50)
    params = est.get_params()
    assert params["policy"] == "myopic" and params["grid_size"] == 50
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(step_size=0.1)
    assert est.step_size == 0.1


def test_unfitted_use_raises():
    with pytest.raises(NotFittedError):
        JointSensingAllocator().transform(np.ones((1, 2, 2)))


def test_fit_requires_scenario():
    with pytest.raises(TypeError):
        JointSensingAllocator().fit(np.zeros((3, 3)))


def test_fitted_attributes(fitted, small_scenario):
    assert fitted.n_channels_ == 2 and fitted.n_users_ == 3
    assert fitted.duals_.power_price.shape == (3,)
    assert len(fitted.tables_) == 2
    assert fitted.scenario_ is small_scenario


def test_transform_is_best_su_iri(fitted):
    g = np.random.default_rng(0).exponential(3.0, size=(7, 2, 3))
    out = fitted.transform(g)
    _, _, iri = su_iri_arrays(g, fitted.scenario_.beta, fitted.duals_.power_price)
    assert out.shape == (7, 2)
    np.testing.assert_array_equal(out, iri.max(axis=-1))
    assert fitted.transform(g[0]).shape == (1, 2)


def test_predict_and_allocate(fitted):
    g = np.random.default_rng(1).exponential(3.0, size=(25, 2, 3))
    beliefs = np.random.default_rng(2).uniform(size=(25, 2))
    s = fitted.predict(g, beliefs)
    assert s.shape == (25, 2) and set(np.unique(s)) <= {0, 1}
    assert np.all(fitted.predict(g, np.zeros(2)) == 0)
    winner, power = fitted.allocate(g, beliefs)
    assert winner.shape == power.shape == (25, 2)
    assert np.all(power[winner < 0] == 0.0) and np.all(power >= 0.0)


def test_input_checks(fitted):
    with pytest.raises(DimensionError):
        fitted.transform(np.ones((2, 3, 3)))
    with pytest.raises(ValueError):
        fitted.transform(-np.ones((1, 2, 3)))
    with pytest.raises(DimensionError):
        fitted.predict(np.ones((4, 2, 3)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        fitted.predict(np.ones((1, 2, 3)), [0.5, 1.5])


def test_simulate_and_score(fitted):
    m = fitted.simulate(n_slots=40, replications=3)
    assert m.policy == "optimal" and m.n_slots == 40
    assert np.isfinite(fitted.score())
    assert fitted.simulate(n_slots=40, replications=3, policy="never").sensing_rate.sum() == 0.0


def test_decision_map(fitted):
    B, L, regions = fitted.decision_map(1, grid_B=30, grid_L=20)
    assert regions.shape == (30, 20)
    assert L[-1] == pytest.approx(fitted.duals_.interference_price.max())
    with pytest.raises(ValueError):
        fitted.decision_map(3)


def test_refit_is_deterministic(fitted, small_scenario):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        again = clone(fitted).fit(small_scenario)
    assert again.duals_ == fitted.duals_
