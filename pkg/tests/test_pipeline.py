import numpy as np

from riskctmdp import rat_example
from riskctmdp.oracle import random_model
from riskctmdp.pipeline import compare, format_comparison, format_table, solve


def test_solve_bundles_everything():
    res = solve(rat_example())
    assert res.residuals.ok and res.policy.labels(res.model)[0] == "Impulse(shoot)"
    table = format_table(res)
    assert "optimality relations hold (tol 1e-08): True" in table


def test_infinite_variance_skips_the_sigma_check():
    # under the optimal policy exp(total cost) from state 0 has no second moment
    c = compare(random_model(3009, 2, 2, 1), n_paths=2000)
    assert "vi_vs_mc" not in c.checks and "infinite variance" in c.mc_note
    assert c.checks["vi_vs_oracle"]
    assert "monte carlo check: not checked" in format_comparison(c)


def test_diverged_start_skips_simulation():
    c = compare(rat_example(2, 2.5, 0.2, 3))
    assert c.simulation is None and np.isinf(c.solved.solution.V[0])
