"""Exact Gittins indices from known arm models.

Walks through the retirement formulation on two small chains: the value of
holding a retirement option, the bisection that locates each state's
indifference point, and the resulting index table.
"""

import numpy as np

from gittins import gittins_exact, retirement_value
from gittins.envs import elementary_two_arm_instance, toy_arm

# The five-state chain: pulls either advance the state (prob 0.7) or reset
# it to 0 (prob 0.3); rewards decay geometrically with the state.
arm = toy_arm()
print("reward vector:", np.round(arm.reward, 5))

# The retirement value V(x, M) dominates M everywhere and grows with M.
for m in (0.0, 5.0, 9.0, 12.0):
    v = retirement_value(arm, m, gamma=0.9)
    print(f"M={m:5.1f}  V(., M) = {np.round(v, 3)}")

# The index of state x is (1 - gamma) times the smallest M with V(x, M) = M.
sol = gittins_exact(arm, gamma=0.9, tol=1e-9)
print("\nstate  M*        G* = (1-gamma) M*")
for s in range(arm.num_states):
    print(f"{s:4d}  {sol.M_star[s]:9.5f}  {sol.G_star[s]:.5f}")

# A two-arm heterogeneous example: same rewards, different mixing speeds.
inst = elementary_two_arm_instance(gamma=0.9)
print("\ntwo-state arms, rewards (1, 10):")
for a, model in enumerate(inst.arms):
    g = gittins_exact(model, 0.9, 1e-9).G_star
    print(f"arm {a}: transition row 0 = {model.transition[0]},  G = {np.round(g, 5)}")
print("\nThe slow-mixing arm discounts its good state less, so its bad-state "
      "index is lower.")
