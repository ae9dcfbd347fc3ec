import math

import numpy as np
import pytest

from riskctmdp import (
    Gradual,
    Impulse,
    StationaryPolicy,
    estimate_utility,
    rat_example,
    simulate_path,
    suggest_horizon,
    utility_second_moment,
    zero_cost_model,
)
from riskctmdp.oracle import random_model
from riskctmdp.simulator import (
    IMPULSE_BLOCK,
    NATURAL_JUMP,
    Termination,
    format_trace,
    path_stream,
)

NEVER = StationaryPolicy([Gradual(0), Gradual(0)])
SHOOT = StationaryPolicy([Impulse(0), Gradual(0)])
IDLE = StationaryPolicy([Impulse(1), Gradual(0)])


def test_stream_matches_documented_construction():
    u = [next(s) for s in [path_stream(3, 9)] for _ in range(5)]
    raw = np.random.Philox(key=np.array([3, 9], dtype=np.uint64)).random_raw(5)
    expected = [float(r >> np.uint64(11)) * 2.0**-53 for r in raw]
    assert u == expected


def test_never_shoot_path_is_one_jump():
    m = rat_example(2, 1, 0.5, 0.1)
    rec = simulate_path(m, NEVER, 0, rng_seed=1, horizon=1e6)
    assert len(rec.events) == 1
    e = rec.events[0]
    assert e.kind == NATURAL_JUMP and (e.pre_state, e.post_state) == (0, 1)
    assert rec.total_cost == pytest.approx(1.0 * e.time)
    assert rec.termination is Termination.ABSORBED


def test_never_shoot_sojourn_uses_inversion():
    m = rat_example(2, 1, 0.5, 0.1)
    rec = simulate_path(m, NEVER, 0, rng_seed=4, horizon=1e6, path_index=17)
    u = next(path_stream(4, 17))
    assert rec.events[0].time == -math.log1p(-u) / 2.0


def test_always_shoot_is_one_geometric_block():
    m = rat_example(2, 1, 0.5, 0.1)
    counts = []
    for i in range(4000):
        rec = simulate_path(m, SHOOT, 0, rng_seed=2, path_index=i)
        assert len(rec.events) == 1 and rec.events[0].kind == IMPULSE_BLOCK
        assert rec.events[0].time == 0.0 and rec.final_state == 1
        k = len(rec.events[0].intervention)
        assert rec.total_cost == pytest.approx(0.1 * k)
        assert rec.termination is Termination.ABSORBED
        counts.append(k)
    # Geometric(1/2) on {1, 2, ...}: mean 2, variance 2
    assert np.mean(counts) == pytest.approx(2.0, abs=4 * math.sqrt(2 / 4000))


def test_idle_impulse_hits_the_cap():
    rec = simulate_path(rat_example(), IDLE, 0, impulse_cap=50)
    assert rec.termination is Termination.IMPULSE_CAP
    assert len(rec.events[0].intervention) == 50
    assert rec.total_cost == 0.0


def test_jump_cap():
    m = zero_cost_model(3)
    pol = StationaryPolicy([Gradual(0)] * 3)
    rec = simulate_path(m, pol, 0, horizon=1e9, jump_cap=10)
    assert rec.termination is Termination.JUMP_CAP and len(rec.events) == 10


def test_horizon_truncates_and_charges_the_tail():
    m = rat_example(2, 1, 0.5, 0.1)
    rec = simulate_path(m, NEVER, 0, rng_seed=0, horizon=1e-6)
    assert rec.termination is Termination.HORIZON and rec.events == []
    assert rec.total_cost == pytest.approx(1e-6)


def test_event_times_and_cost_bookkeeping():
    m = random_model(5, 4, 2, 2)
    pol = StationaryPolicy([Impulse(0), Gradual(1), Gradual(0), Gradual(0)])
    for i in range(200):
        rec = simulate_path(m, pol, 0, rng_seed=9, path_index=i)
        times = [e.time for e in rec.events]
        assert times == sorted(times)
        for a, b in zip(rec.events, rec.events[1:]):
            assert b.time > a.time or a.kind != b.kind or a.kind == IMPULSE_BLOCK
        assert math.isclose(math.fsum(rec.cost_increments()), rec.total_cost, rel_tol=1e-12,
                            abs_tol=1e-300)


def test_zero_cost_estimate_is_exactly_one():
    m = zero_cost_model(3)
    pol = StationaryPolicy([Gradual(0), Impulse(0), Gradual(0)])
    rep = estimate_utility(m, pol, 0, n_paths=500, horizon=20)
    assert rep.estimate == 1.0 and rep.std_error == 0.0


@pytest.mark.parametrize("policy,exact", [
    (NEVER, 2.0),
    (SHOOT, math.exp(0.1) * 0.5 / (1 - math.exp(0.1) * 0.5)),
])
def test_rat_estimates_within_three_standard_errors(policy, exact):
    rep = estimate_utility(rat_example(2, 1, 0.5, 0.1), policy, 0, n_paths=100_000,
                           master_seed=11, horizon=50)
    assert abs(rep.estimate - exact) <= 3 * rep.std_error + rep.truncation_bias_bound


def test_report_is_reproducible_across_workers():
    m = random_model(8, 3, 2, 2)
    pol = StationaryPolicy([Gradual(0), Impulse(1), Gradual(0)])
    reps = [estimate_utility(m, pol, 0, 3001, master_seed=123, workers=w) for w in (1, 2, 7)]
    for r in reps[1:]:
        assert r.estimate == reps[0].estimate and r.std_error == reps[0].std_error
        assert r.terminations == reps[0].terminations
        np.testing.assert_array_equal(r.values, reps[0].values)


def test_different_seeds_differ():
    m = rat_example()
    a = estimate_utility(m, NEVER, 0, 100, master_seed=1, horizon=50)
    b = estimate_utility(m, NEVER, 0, 100, master_seed=2, horizon=50)
    assert a.estimate != b.estimate


def test_termination_histogram_and_truncation_fraction():
    rep = estimate_utility(rat_example(), NEVER, 0, 1000, horizon=0.1)
    assert sum(rep.terminations.values()) == 1000
    truncated = rep.terminations["horizon_reached"]
    assert 0 < truncated < 1000
    assert rep.truncation_bias_bound == truncated / 1000
    assert "lower bound" in rep.lower_bound_note


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        estimate_utility(rat_example(), NEVER, 0, n_paths=1)
    with pytest.raises(ValueError):
        simulate_path(rat_example(), NEVER, 0, horizon=0)
    with pytest.raises(ValueError):
        simulate_path(rat_example(), NEVER, 5)


def test_suggested_horizon_leaves_few_paths_alive():
    m = rat_example(2, 1, 0.5, 0.1)
    h = suggest_horizon(m, NEVER, 0)
    # P(alive at t) = exp(-2 t) must be below 1e-3 at h but not at h / 2
    assert math.exp(-2 * h) < 1e-3 <= math.exp(-2 * h / 2)
    assert suggest_horizon(m, SHOOT, 0) == 1.0


def test_suggested_horizon_falls_back_without_absorption():
    m = zero_cost_model(3)
    assert suggest_horizon(m, StationaryPolicy([Gradual(0)] * 3), 0, fallback=12.5) == 12.5


def test_second_moment():
    m = rat_example(2, 1, 0.5, 0.1)
    # E[exp(2 l tau)] with tau ~ Exp(2) and l = 1 is infinite
    assert np.isinf(utility_second_moment(m, NEVER)[0])
    m = rat_example(4, 1, 0.2, 0.5)
    assert utility_second_moment(m, NEVER)[0] == pytest.approx(4 / (4 - 2), abs=1e-8)
    e = math.exp(0.2)
    assert utility_second_moment(rat_example(2, 1, 0.5, 0.1), SHOOT)[0] == pytest.approx(
        e * 0.5 / (1 - e * 0.5), abs=1e-8)


def test_trace_format():
    m = rat_example()
    rec = simulate_path(m, SHOOT, 0, rng_seed=3)
    text = format_trace(rec, m)
    lines = text.splitlines()
    assert lines[0] == "# time\tkind\tpre_state\tactions\tpost_state\tcost"
    fields = lines[1].split("\t")
    assert fields[1] == "impulse_block" and fields[3].startswith("shoot->")
    assert float(fields[5]) == rec.events[0].cost
    assert lines[-1].split("\t")[1] == "absorbed_zero_cost"
