"""
Value iteration against brute force
===================================

On small models every deterministic stationary policy can be evaluated
on its own. Their pointwise minimum must equal the value-iteration
fixed point, which gives a check that never touches the Bellman
minimization.
"""

import numpy as np

from riskctmdp import brute_force_value, build_tilde, random_model, value_iterate
from riskctmdp.oracle import count_policies, linear_policy_value, enumerate_policies

# %%
# A handful of random models with a zero-cost absorbing state.
for seed in range(8):
    tilde = build_tilde(random_model(seed, n_states=4, n_gradual=2, n_impulse=2))
    vi = value_iterate(tilde).V
    bf = brute_force_value(tilde).V
    both = np.isfinite(vi) & np.isfinite(bf)
    gap = np.abs(vi[both] - bf[both]).max() if both.any() else 0.0
    print(f"seed {seed}: {count_policies(tilde):4d} policies  max gap {gap:.1e}  "
          f"diverged {np.flatnonzero(np.isinf(vi)).tolist()}")

# %%
# Each policy value can also be computed without iterating: split the
# policy graph into strongly connected classes and solve a linear
# system on the transient part.
tilde = build_tilde(random_model(3, 3, 2, 2))
lin = np.min([linear_policy_value(tilde, pol) for pol in enumerate_policies(tilde)], axis=0)
print("linear solve:", lin)
print("iteration:   ", value_iterate(tilde).V)
