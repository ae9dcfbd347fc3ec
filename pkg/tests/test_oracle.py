import math

import numpy as np
import pytest

from riskctmdp import (
    CtmdpModel,
    Gradual,
    Impulse,
    StationaryPolicy,
    brute_force_value,
    build_tilde,
    enumerate_policies,
    evaluate_policy,
    linear_policy_value,
    random_model,
    rat_example,
    validate_model,
    value_iterate,
    zero_cost_model,
)
from riskctmdp.oracle import EnumerationTooLarge, count_policies


def free_model(n_states, n_gradual, n_impulse, seed=0):
    """Model whose impulses all move somewhere else, so none are excluded."""
    rng = np.random.default_rng(seed)
    q = np.zeros((n_states, n_gradual, n_states))
    Q = np.zeros((n_states, n_impulse, n_states))
    for x in range(n_states):
        Q[x, :, (x + 1) % n_states] = 1.0
    return CtmdpModel(q, Q, rng.random((n_states, n_gradual)),
                      rng.random((n_states, n_impulse, n_states)))


def test_rat_has_two_policies():
    pols = list(enumerate_policies(build_tilde(rat_example())))
    assert len(pols) == 2
    assert [p.choice[0].__class__.__name__ for p in pols] == ["Gradual", "Impulse"]


def test_counts():
    assert count_policies(build_tilde(rat_example())) == 2
    # a self-impulse that costs something is a real action
    one_state = CtmdpModel(np.zeros((1, 2, 1)), np.ones((1, 1, 1)), np.zeros((1, 2)),
                           np.ones((1, 1, 1)))
    assert len(list(enumerate_policies(build_tilde(one_state)))) == 3
    assert count_policies(build_tilde(free_model(4, 3, 2))) == 625


def test_enumeration_order_is_mixed_radix():
    t = build_tilde(free_model(2, 1, 1))
    idx = [tuple(p.tilde_indices(1)) for p in enumerate_policies(t)]
    assert idx == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_enumeration_cap_refuses_with_count():
    t = build_tilde(free_model(4, 3, 2))
    with pytest.raises(EnumerationTooLarge) as e:
        brute_force_value(t, cap=100)
    assert e.value.count == 625


def test_rat_closed_form():
    bf = brute_force_value(build_tilde(rat_example(2, 1, 0.5, 0.1)))
    expected = math.exp(0.1) * 0.5 / (1 - math.exp(0.1) * 0.5)
    assert bf.V[0] == pytest.approx(expected, abs=1e-8)
    assert bf.n_policies == 2


def test_zero_cost_model():
    np.testing.assert_array_equal(brute_force_value(build_tilde(zero_cost_model(3))).V, 1.0)


def test_seed_42_matches_value_iteration():
    m = random_model(42, 3, 2, 2)
    assert validate_model(m) == []
    t = build_tilde(m)
    vi = value_iterate(t).V
    bf = brute_force_value(t).V
    np.testing.assert_allclose(bf, vi, rtol=0, atol=1e-8)


def test_diverged_state_is_infinite_for_every_policy():
    t = build_tilde(rat_example(2, 2.5, 0.2, 3))
    bf = brute_force_value(t, keep_values=True)
    assert np.isinf(bf.V[0])
    assert np.isinf(bf.values[:, 0]).all()


@pytest.mark.parametrize("seed", range(10))
def test_minimum_is_attained_by_an_enumerated_policy(seed):
    t = build_tilde(random_model(seed, 3, 2, 2))
    bf = brute_force_value(t, keep_values=True)
    pols = list(enumerate_policies(t))
    for x in range(t.n_states):
        witness = evaluate_policy(t, pols[bf.argmin[x]])[x]
        if np.isfinite(bf.V[x]):
            assert witness == pytest.approx(bf.V[x], abs=1e-9)
        else:
            assert np.isinf(witness)


@pytest.mark.parametrize("seed", range(15))
def test_linear_solve_agrees_with_iteration(seed):
    t = build_tilde(random_model(seed, 3, 2, 2))
    for pol in enumerate_policies(t):
        a = linear_policy_value(t, pol)
        b = evaluate_policy(t, pol, method="doubling")
        np.testing.assert_array_equal(np.isinf(a), np.isinf(b))
        f = np.isfinite(a)
        np.testing.assert_allclose(a[f], b[f], rtol=0, atol=1e-8)


def test_linear_solve_rat_closed_forms():
    t = build_tilde(rat_example(2, 1, 0.5, 0.1))
    never = StationaryPolicy([Gradual(0), Gradual(0)])
    shoot = StationaryPolicy([Impulse(0), Gradual(0)])
    assert linear_policy_value(t, never)[0] == pytest.approx(2.0, abs=1e-12)
    assert linear_policy_value(t, shoot)[0] == pytest.approx(1.2350637014377652, abs=1e-12)


def test_random_model_shape_and_sink():
    m = random_model(7, 4, 3, 2)
    assert (m.n_states, m.n_gradual, m.n_impulse) == (4, 3, 2)
    assert validate_model(m) == []
    np.testing.assert_array_equal(m.q[3], 0.0)
    np.testing.assert_array_equal(m.c_gradual[3], 0.0)
    assert (m.q[:3, 0, 3] > 0).all()
    m2 = random_model(7, 4, 3, 2)
    np.testing.assert_array_equal(m.Q, m2.Q)
