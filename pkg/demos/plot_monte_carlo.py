"""
Checking values by simulation
=============================

Simulated paths give an independent estimate of ``E[exp(total cost)]``
under a fixed policy. The estimate is a validator only: it is noisy,
truncated at a horizon, and its standard error means nothing when the
utility has no second moment.
"""

import numpy as np

from riskctmdp import build_tilde, estimate_utility, evaluate_policy, extract_policy
from riskctmdp import random_model, rat_example, utility_second_moment, value_iterate
from riskctmdp.simulator import format_trace, simulate_path

# %%
# The shooting regime of the rat example.
model = rat_example(mu=2, l=1, p=0.5, C=0.1)
tilde = build_tilde(model)
policy = extract_policy(tilde, value_iterate(tilde).V)
rep = estimate_utility(model, policy, x0=0, n_paths=50_000, master_seed=1)
exact = evaluate_policy(tilde, policy)[0]
print(f"estimate {rep.estimate:.5f} +/- {rep.std_error:.5f}, exact {exact:.5f}")
print(rep.terminations)

# %%
# One path, event by event. All shots happen at time zero.
print(format_trace(simulate_path(model, policy, 0, rng_seed=1), model))

# %%
# A random model whose utility has infinite variance. The sample mean
# sits well below the exact value and the standard error is too small
# to notice.
model = random_model(3009, 2, 2, 1)
tilde = build_tilde(model)
policy = extract_policy(tilde, value_iterate(tilde).V)
print("second moment:", utility_second_moment(model, policy)[0])
for seed in range(3):
    rep = estimate_utility(model, policy, 0, 20_000, master_seed=seed)
    print(f"seed {seed}: {rep.estimate:.4f} +/- {rep.std_error:.4f}  "
          f"exact {evaluate_policy(tilde, policy)[0]:.4f}")
