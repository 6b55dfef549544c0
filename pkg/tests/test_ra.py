import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_oracle, objective

from jointsense.belief import Belief
from jointsense.exceptions import DimensionError, UnboundedObjectiveError
from jointsense.ra import (
    DualState,
    LinkState,
    UserConfig,
    allocate,
    compute_iri_bundle,
    optimal_power,
    su_iri,
    su_iri_arrays,
)


def _bundle(gains, theta, busy, pi=(0.5,), beta=(1.0,)):
    users = [UserConfig(b, 1.0) for b in beta]
    duals = DualState(np.array(pi, float), np.array(theta, float))
    return compute_iri_bundle(LinkState(np.array(gains, float)), users, duals, busy)


# -- waterfilling ------------------------------------------------------------


def test_optimal_power_example():
    p, val = grid_oracle(1.0, 1.0, 0.5, 1.0)
    assert optimal_power(1.0, 1.0, 0.5, 1.0) == pytest.approx(1.88539, abs=1e-5)
    assert optimal_power(1.0, 1.0, 0.5, 1.0) == pytest.approx(p, abs=1e-3)
    assert objective(optimal_power(1.0, 1.0, 0.5, 1.0), 1.0, 1.0, 0.5, 1.0) >= val - 1e-12


def test_optimal_power_zero_cases():
    assert optimal_power(0.1, 1.0, 2.0, 1.0) == 0.0
    assert optimal_power(0.0, 1.0, 0.5, 1.0) == 0.0
    assert optimal_power(0.0, 1.0, 0.0, 1.0) == 0.0


def test_zero_price_is_unbounded():
    with pytest.raises(UnboundedObjectiveError):
        optimal_power(1.0, 1.0, 0.0)


@pytest.mark.parametrize("args", [(-1.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -0.5), (1.0, 1.0, 1.0, 0.0)])
def test_rejects_invalid_inputs(args):
    with pytest.raises(ValueError):
        optimal_power(*args)


def test_su_iri_example():
    p, rate, iri = su_iri(1.0, 1.0, 0.5, 1.0)
    assert rate == pytest.approx(1.52877, abs=1e-5)
    assert iri == pytest.approx(0.58608, abs=1e-5)
    assert iri == pytest.approx(objective(p, 1.0, 1.0, 0.5, 1.0), abs=1e-14)
    assert su_iri(0.1, 1.0, 2.0, 1.0) == (0.0, 0.0, 0.0)
    assert su_iri(1.0, 2.0, 0.5, 1.0)[2] > iri


def test_waterfilling_matches_grid_search():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        h = rng.exponential(3.0)
        beta = rng.uniform(0.1, 3.0)
        pi = rng.uniform(0.05, 3.0)
        gap = rng.uniform(0.5, 4.0)
        _, best = grid_oracle(h, beta, pi, gap)
        mine = objective(optimal_power(h, beta, pi, gap), h, beta, pi, gap)
        assert mine >= best - 1e-4 * max(abs(best), 1e-12)


@given(
    st.floats(0.0, 50.0),
    st.floats(0.01, 5.0),
    st.floats(0.01, 5.0),
    st.floats(0.1, 5.0),
)
def test_su_iri_nonnegative_and_zero_iff_no_power(h, beta, pi, gap):
    p, _, iri = su_iri(h, beta, pi, gap)
    assert p >= 0.0 and iri >= 0.0
    assert (iri == 0.0) == (p == 0.0) or iri < 1e-12


def test_array_form_broadcasts():
    p, c, l = su_iri_arrays(np.array([[1.0, 0.1], [0.0, 2.0]]), np.array([1.0, 1.0]), np.array([0.5, 2.0]))
    assert p.shape == c.shape == l.shape == (2, 2)
    assert p[0, 0] == pytest.approx(optimal_power(1.0, 1.0, 0.5))
    assert p[1, 0] == 0.0 and l[1, 0] == 0.0


# -- IRI bundle ---------------------------------------------------------------


def test_bundle_no_winner_example():
    b = _bundle([[1.0]], [2.0], [Belief(0.5)])
    assert b.su_best[0] == pytest.approx(0.58608, abs=1e-5)
    assert b.full_iri[0, 0] == pytest.approx(0.58608 - 1.0, abs=1e-5)
    assert b.winner[0] == -1
    assert b.channel_iri[0] == 0.0
    assert b.channel_iri_dot()[0] == 0.0
    d = allocate(b)
    assert d.winner[0] == -1 and d.power[0] == 0.0


def test_bundle_without_interference_price():
    b = _bundle([[1.0, 3.0]], [0.0], [0.7], pi=(0.5, 0.5), beta=(1.0, 1.0))
    assert b.winner[0] == 1
    assert b.channel_iri[0] == pytest.approx(b.su_iri[0].max())


def test_bundle_certain_idle():
    b = _bundle([[1.0, 3.0]], [5.0], [0.0], pi=(0.5, 0.5), beta=(1.0, 1.0))
    np.testing.assert_array_equal(b.full_iri, b.su_iri)


def test_allocate_picks_highest_iri():
    b = _bundle([[4.0, 2.0]], [0.0], [0.0], pi=(0.5, 0.5), beta=(1.0, 1.0))
    d = allocate(b)
    assert d.winner[0] == 0
    assert d.power[0] == pytest.approx(b.power[0, 0])


def test_allocate_ties_go_to_lowest_index():
    b = _bundle([[2.0, 2.0, 2.0]], [0.0], [0.0], pi=(0.5,) * 3, beta=(1.0,) * 3)
    assert allocate(b).winner[0] == 0


def test_allocate_orthogonality():
    rng = np.random.default_rng(3)
    for _ in range(200):
        gains = rng.exponential(2.0, size=(4, 3))
        b = _bundle(gains, rng.uniform(0, 3, 4), rng.uniform(0, 1, 4), pi=rng.uniform(0.1, 1, 3), beta=(1.0,) * 3)
        w = allocate(b).access_matrix(3)
        assert np.all(w.sum(axis=1) <= 1)
        np.testing.assert_allclose(b.channel_iri, b.channel_iri_dot(), atol=1e-12)


def test_bundle_dimension_errors():
    with pytest.raises(DimensionError):
        _bundle([[1.0, 2.0]], [0.0], [0.0])
    with pytest.raises(DimensionError):
        _bundle([[1.0]], [0.0, 1.0], [0.0])
    with pytest.raises(DimensionError):
        _bundle([[1.0]], [0.0], [0.0, 0.1])


def test_channel_iri_monotone_in_belief_and_price():
    rng = np.random.default_rng(5)
    gains = rng.exponential(2.0, size=(1, 3))
    beliefs = np.linspace(0, 1, 41)
    vals = [_bundle(gains, [2.0], [b], pi=(0.3,) * 3, beta=(1.0,) * 3).channel_iri[0] for b in beliefs]
    assert np.all(np.diff(vals) <= 1e-15)
    thetas = np.linspace(0, 5, 41)
    vals = [_bundle(gains, [t], [0.6], pi=(0.3,) * 3, beta=(1.0,) * 3).channel_iri[0] for t in thetas]
    assert np.all(np.diff(vals) <= 1e-15)


def test_dual_state_rejects_negative():
    with pytest.raises(ValueError):
        DualState(np.array([-1.0]), np.array([0.0]))
