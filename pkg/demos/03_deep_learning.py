"""Index learning with a neural approximator instead of a Q-table.

The network maps an encoded (state, reference state) pair to the continue
value; stored transitions carry no action and no reference (references are
expanded at sampling time, so one tuple yields N regression targets).
Demonstrates convergence on the toy bandit and parameter serialization.
"""

from pathlib import Path

import numpy as np

from gittins.core import ConstantRateSchedule, EpsilonSchedule
from gittins.deep import DgnConfig, train_dgn
from gittins.envs import toy_arm, toy_instance
from gittins.nn import load_params, mlp_forward, save_params
from gittins.oracle import gittins_exact

OUT = Path(__file__).parent / "output" / "deep"
OUT.mkdir(parents=True, exist_ok=True)

exact = gittins_exact(toy_arm(), 0.9).G_star
config = DgnConfig(
    batch_size=32,
    tau=1e-3,
    sync_period=10,
    step_size=5e-3,
    beta_schedule=ConstantRateSchedule(alpha_value=1.0, beta_value=1.0, phi=5),
)

state, log = train_dgn(
    toy_instance(), config, EpsilonSchedule(initial=1.0), steps=5000, seed=7, cadence=1
)
learned = log.indices[-200:].mean(axis=0)
print("exact:  ", np.round(exact, 4))
print("learned:", np.round(learned, 4))
print(f"max error {np.abs(learned - exact).max():.4f}")
print(
    f"steps {state.counters.steps}, learn steps {state.counters.learn_steps}, "
    f"target evaluations {state.counters.target_evaluations} "
    f"(= learn steps x batch x states)"
)

# The online network round-trips through the documented flat-vector format.
path = OUT / "dgn_toy.npz"
save_params(state.online[0], path, seed=7)
loaded, header = load_params(path)
probe = [(s, x) for s in (0, 4) for x in (0, 4)]
same = all(
    mlp_forward(state.online[0], s, x) == mlp_forward(loaded, s, x) for s, x in probe
)
print(f"saved {path.name} (dims {header['dims']}), reload exact: {same}")

# A 50-state random chain: the table would hold 2500 continue values, the
# network still carries one scalar head, and each stored transition yields
# 50 regression targets.
from gittins.envs import dirichlet_arm, dirichlet_instance

big_arm = dirichlet_arm(num_states=50, seed=0)
big_exact = gittins_exact(big_arm, 0.9).G_star
state50, log50 = train_dgn(
    dirichlet_instance(num_states=50, seed=0),
    config,
    EpsilonSchedule(initial=1.0),
    steps=5000,
    seed=1,
    cadence=50,
)
win50 = log50.indices[-4:].mean(axis=0)
print(
    f"50-state chain: value error {log50.bre[0]:.1f} -> {log50.bre[-1]:.2f}, "
    f"mean index error {np.abs(win50 - big_exact).mean():.3f} "
    f"(index range {big_exact.min():.2f}..{big_exact.max():.2f})"
)
