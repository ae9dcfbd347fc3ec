import numpy as np
import pytest

from riskctmdp import (
    CtmdpModel,
    ModelStructureError,
    default_bounding_function,
    rat_example,
    validate_model,
    zero_cost_model,
)
from riskctmdp.oracle import random_model


def test_rat_is_valid_with_expected_w():
    m = rat_example(2, 1, 0.5, 0.1)
    assert validate_model(m) == []
    np.testing.assert_array_equal(m.w, [4.0, 1.0])
    assert m.state_names == ("rat", "gone")


def test_small_w_names_the_offending_state():
    m = rat_example(2, 1, 0.5, 0.1, w=[3.0, 1.0])
    v = validate_model(m)
    assert len(v) == 1
    assert v[0].kind == "bounding_function" and v[0].index == (0,)
    assert v[0].magnitude == pytest.approx(1.0)


def test_impulse_row_summing_below_one():
    m = rat_example()
    Q = m.Q.copy()
    Q[0, 0] = [0.4, 0.5]
    v = validate_model(CtmdpModel(m.q, Q, m.c_gradual, m.c_impulse))
    assert [x.kind for x in v] == ["non_stochastic"]
    assert v[0].index == (0, 0)
    assert v[0].magnitude == pytest.approx(0.1)


def test_numeric_violations_are_all_reported():
    m = rat_example()
    q = m.q.copy()
    q[0, 0] = [-2.0, 1.0]  # not conservative
    cg = m.c_gradual.copy()
    cg[1, 0] = -0.5
    kinds = sorted(v.kind for v in validate_model(CtmdpModel(q, m.Q, cg, m.c_impulse, w=[9, 9])))
    assert kinds == ["negative_cost", "non_conservative"]


def test_negative_off_diagonal_rate():
    q = np.array([[[0.5, -0.5]], [[0.0, 0.0]]])
    m = rat_example()
    v = validate_model(CtmdpModel(q, m.Q, m.c_gradual, m.c_impulse, w=[5, 5]))
    assert {x.kind for x in v} == {"negative_rate"}


def test_non_finite_entries_short_circuit():
    m = rat_example()
    ci = m.c_impulse.copy()
    ci[0, 0, 0] = np.inf
    v = validate_model(CtmdpModel(m.q, m.Q, m.c_gradual, ci))
    assert [x.kind for x in v] == ["non_finite"]
    assert v[0].index == ("c_impulse", 0, 0, 0)


def test_shape_mismatch_is_structural():
    m = rat_example()
    with pytest.raises(ModelStructureError):
        CtmdpModel(m.q, m.Q, m.c_gradual[:1], m.c_impulse)
    with pytest.raises(ModelStructureError):
        CtmdpModel(m.q, m.Q[:, :, :1], m.c_gradual, m.c_impulse)
    with pytest.raises(ModelStructureError):
        m.with_w([1.0, 2.0, 3.0])


def test_model_is_immutable():
    m = rat_example()
    with pytest.raises(ValueError):
        m.q[0, 0, 0] = 1.0
    with pytest.raises(AttributeError):
        m.w = np.ones(2)


def test_default_w_examples():
    assert default_bounding_function(rat_example().q, rat_example().c_gradual)[0] == 4.0
    absorbing = np.zeros((1, 1, 1))
    assert default_bounding_function(absorbing, np.zeros((1, 1)))[0] == 1.0
    q = np.zeros((2, 2, 2))
    q[0, 0] = [-1.0, 1.0]
    q[0, 1] = [-0.1, 0.1]
    cg = np.array([[0.5, 2.0], [0.0, 0.0]])
    assert default_bounding_function(q, cg)[0] == pytest.approx(3.1)


@pytest.mark.parametrize("seed", range(20))
def test_default_w_is_admissible_and_tight(seed):
    m = random_model(seed, 4, 3, 2)
    assert validate_model(m) == []
    slack = m.w[:, None] - (m.c_gradual - m.q[np.arange(4), :, np.arange(4)] + 1)
    np.testing.assert_allclose(slack.min(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("mu", [0.1, 1.0, 2.0, 7.5])
@pytest.mark.parametrize("l", [0.0, 0.5, 3.0])
@pytest.mark.parametrize("p", [0.01, 0.5, 0.99])
@pytest.mark.parametrize("C", [1e-3, 0.1, 5.0])
def test_rat_valid_over_parameter_grid(mu, l, p, C):
    assert validate_model(rat_example(mu, l, p, C)) == []


@pytest.mark.parametrize("kwargs", [dict(mu=0), dict(l=-1), dict(p=0), dict(p=1.5), dict(C=0)])
def test_rat_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        rat_example(**kwargs)


def test_zero_cost_model_is_valid():
    for n in (1, 2, 5):
        assert validate_model(zero_cost_model(n)) == []


def test_with_w_keeps_everything_else():
    m = rat_example()
    m2 = m.with_w(m.w + 3)
    np.testing.assert_array_equal(m2.w, [7.0, 4.0])
    np.testing.assert_array_equal(m2.q, m.q)
    assert m2.impulse_actions == m.impulse_actions
