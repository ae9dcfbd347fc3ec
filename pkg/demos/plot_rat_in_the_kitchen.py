"""
A rat in the kitchen
====================

A rat sits in the kitchen and leaves on its own at rate ``mu``; while it
stays we pay ``l`` per unit time. We may also shoot at it: each shot
costs ``C`` and kills it with probability ``p``. Under the criterion
``E[exp(total cost)]`` the best plan is either to shoot until it is gone
or never to shoot, depending on whether ``exp(C) (1 - p)`` is below one.
"""

import math

import numpy as np

from riskctmdp import build_tilde, evaluate_policy, extract_policy, rat_example
from riskctmdp import value_iterate, verify_optimality
from riskctmdp.solver import Gradual, Impulse, StationaryPolicy

# %%
# Solve the shooting regime and compare with the geometric closed form.
model = rat_example(mu=2, l=1, p=0.5, C=0.1)
tilde = build_tilde(model)
sol = value_iterate(tilde)
policy = extract_policy(tilde, sol.V)
closed = math.exp(0.1) * 0.5 / (1 - math.exp(0.1) * 0.5)
print(sol.status.value, sol.iterations, "iterations")
print("V(rat) =", sol.V[0], "closed form", closed)
print("policy:", policy.labels(model))

# %%
# The residual report says which optimality relation is tight.
report = verify_optimality(model, sol.V)
print("rat state is in", report.membership(0))

# %%
# Sweep the kill probability with dearer bullets.
# Shooting has a finite value once exp(C)(1-p) < 1, but it must also
# beat waiting, which is worth mu/(mu-l) = 2 here.
never = StationaryPolicy([Gradual(0), Gradual(0)])
always = StationaryPolicy([Impulse(0), Gradual(0)])
for p in np.linspace(0.1, 0.9, 9):
    m = rat_example(mu=2, l=1, p=p, C=0.2)
    t = build_tilde(m)
    V = value_iterate(t).V
    shoot = evaluate_policy(t, always)[0]
    wait = evaluate_policy(t, never)[0]
    choice = extract_policy(t, V).labels(m)[0]
    print(f"p={p:.1f}  V*={V[0]:.5f}  shoot={shoot:8.5f}  wait={wait:.5f}  {choice}")

# %%
# When neither waiting nor shooting has a finite expected utility, the
# solver flags the state instead of returning a number.
bad = value_iterate(build_tilde(rat_example(mu=2, l=2.5, p=0.2, C=3)))
print("status:", bad.status.value, "at states", bad.diverged_states)
