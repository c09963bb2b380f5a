"""DGN: a deep Q-network for the retirement-formulation index.

One network per arm table approximates the continue value Q^x(s, 1) from an
encoded (state, reference) pair.  Stored experience carries no action field
(only pulls generate transitions) and no reference state; each sampled tuple
is expanded across all N reference states at learning time, so a minibatch
of B tuples produces exactly B*N target evaluations.  Index estimates M(x)
follow the online network's diagonal on their own schedule, and arm
selection is epsilon-greedy on (1-gamma)-scaled M.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import BanditInstance, EpsilonSchedule, RandomSource, epsilon_greedy_select, step_arm
from .nn import AdamState, MlpParams, StateEncoder, adam_apply, mlp_forward_batch, mlp_gradient, soft_update
from .tabular import TERMINAL, _oracle_tables, _table_layout

__all__ = [
    "ExperienceTuple",
    "ReplayBuffer",
    "DgnConfig",
    "DgnCounters",
    "DgnState",
    "dgn_target",
    "dgn_m_update",
    "train_dgn",
    "DgnLog",
]


@dataclass(frozen=True)
class ExperienceTuple:
    """One observed pull: (arm, state, reward, next state).

    There is deliberately no action field (every stored transition is a
    pull) and no reference state (references are expanded when sampling).
    A completed/terminal transition stores next_state = TERMINAL.
    """

    arm: int
    state: int
    reward: float
    next_state: int


class ReplayBuffer:
    """Bounded FIFO store of experience tuples; oldest evicted first."""

    def __init__(self, capacity=10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._items = deque(maxlen=self.capacity)

    def push(self, item: ExperienceTuple):
        self._items.append(item)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def sample_indices(self, batch_size, rng):
        """Uniform with replacement."""
        return (rng.rng.random(batch_size) * len(self._items)).astype(np.int64)


@dataclass
class DgnConfig:
    """Hyperparameters for a DGN run."""

    batch_size: int = 32
    tau: float = 1e-3
    sync_period: int = 10
    step_size: float = 5e-3
    beta_schedule: object = None  # object exposing beta(n)
    encoding: str = "one-hot"
    replay_capacity: int = 10_000

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sync_period < 1:
            raise ValueError("sync_period must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.beta_schedule is None:
            raise ValueError("a beta schedule is required")


@dataclass
class DgnCounters:
    steps: int = 0
    learn_steps: int = 0
    target_evaluations: int = 0
    m_updates: int = 0


@dataclass
class DgnState:
    """Per-table online/target networks, optimisers, and index estimates."""

    online: list
    target: list
    adams: list
    ms: list
    arm_to_table: list
    buffer: ReplayBuffer
    counters: DgnCounters = field(default_factory=DgnCounters)

    def value_estimates(self, table):
        n = self.ms[table].size
        d = np.arange(n)
        diag = mlp_forward_batch(self.online[table], d, d)
        return np.maximum(diag, self.ms[table])

    def index_tables(self, gamma):
        return [(1.0 - gamma) * m for m in self.ms]


def dgn_target(tup: ExperienceTuple, reference, target_params, m, gamma):
    """Bootstrap target r + gamma * max(Q_target(s', x), M(x)).

    A terminal next state bootstraps from M(x) alone, the retirement value
    of an arm that can no longer be pulled.
    """
    if tup.next_state == TERMINAL:
        boot = m[reference]
    else:
        boot = max(
            float(mlp_forward_batch(target_params, [tup.next_state], [reference])[0]),
            float(m[reference]),
        )
    return float(tup.reward + gamma * boot)


def dgn_m_update(m, online_params, beta):
    """Relax every M(x) toward the online network's diagonal value."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta == 0.0:
        return m
    n = m.size
    d = np.arange(n)
    diag = mlp_forward_batch(online_params, d, d)
    m += beta * (diag - m)
    return m


@dataclass
class DgnLog:
    step: np.ndarray
    bre: np.ndarray
    chosen_arm: np.ndarray
    optimal: np.ndarray
    indices: np.ndarray
    learn_steps: np.ndarray

    def __len__(self):
        return len(self.step)


def _learn_minibatch(state: DgnState, config: DgnConfig, gamma, sample_rs):
    """One minibatch update: expand tuples over references, regress, sync."""
    idx = state.buffer.sample_indices(config.batch_size, sample_rs)
    by_table = {}
    for i in idx:
        tup = state.buffer[int(i)]
        by_table.setdefault(state.arm_to_table[tup.arm], []).append(tup)
    b = config.batch_size
    for t, tuples in sorted(by_table.items()):
        m = state.ms[t]
        n = m.size
        refs = np.tile(np.arange(n), len(tuples))
        states_rep = np.repeat([tp.state for tp in tuples], n)
        rewards_rep = np.repeat([tp.reward for tp in tuples], n)
        next_rep = np.repeat([tp.next_state for tp in tuples], n)
        terminal = next_rep == TERMINAL
        next_safe = np.where(terminal, 0, next_rep)
        boot_net = mlp_forward_batch(state.target[t], next_safe, refs)
        boot = np.where(terminal, m[refs], np.maximum(boot_net, m[refs]))
        targets = rewards_rep + gamma * boot
        inputs = state.online[t].encoder.encode_batch(states_rep, refs)
        _, grad_ws, grad_bs = mlp_gradient(state.online[t], inputs, targets)
        # The loss is summed over reference states and averaged over the B
        # sampled tuples, so rescale the per-item mean gradient.
        scale = len(tuples) * n / b
        grad_ws = [g * scale for g in grad_ws]
        grad_bs = [g * scale for g in grad_bs]
        adam_apply(state.online[t], state.adams[t], grad_ws, grad_bs)
        soft_update(state.target[t], state.online[t], config.tau)
        state.counters.target_evaluations += len(tuples) * n
    state.counters.learn_steps += 1


def train_dgn(env: BanditInstance, config: DgnConfig, epsilon: EpsilonSchedule, steps, seed, cadence=1, oracle_tables=None):
    """Run DGN for `steps` environment steps.

    Every step stores one experience tuple and applies the index relaxation
    with beta(n); when the buffer holds more than B tuples and the step index
    is a multiple of the sync period, one minibatch regression plus a soft
    target update runs.  Returns the final state and a log.
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    counts, mapping = _table_layout(env)
    shared = len(counts) == 1 and env.num_arms > 1
    if oracle_tables is None:
        oracle_tables = _oracle_tables(env, shared)
    g_tables, v_tables = oracle_tables

    rs = RandomSource(seed)
    sel_rs = rs.spawn(0)
    env_rs = rs.spawn(1)
    init_rng = rs.spawn(2).rng
    sample_rs = rs.spawn(3)

    online, target, adams, ms = [], [], [], []
    for n_states in counts:
        enc = StateEncoder(n_states, config.encoding)
        net = MlpParams.init(enc, init_rng)
        online.append(net)
        target.append(net.copy())
        adams.append(AdamState.for_params(net, config.step_size))
        ms.append(np.zeros(n_states))
    state = DgnState(
        online=online,
        target=target,
        adams=adams,
        ms=ms,
        arm_to_table=mapping,
        buffer=ReplayBuffer(config.replay_capacity),
    )

    gamma = env.gamma
    k = env.num_arms
    available = np.ones(k, dtype=bool)
    rows_step, rows_bre, rows_arm, rows_opt, rows_idx, rows_ls = [], [], [], [], [], []
    for n in range(1, steps + 1):
        eps = epsilon.value(n)
        cur = env.current_states
        learner_idx = np.array(
            [(1.0 - gamma) * state.ms[mapping[i]][cur[i]] for i in range(k)]
        )
        arm = epsilon_greedy_select(learner_idx, available, eps, sel_rs)
        oracle_idx = np.array([g_tables[mapping[i]][cur[i]] for i in range(k)])
        optimal = bool(oracle_idx[arm] >= oracle_idx.max() - 1e-12)
        s = int(cur[arm])
        s_next, r = step_arm(env, arm, env_rs)
        state.buffer.push(ExperienceTuple(arm, s, r, s_next))
        if len(state.buffer) > config.batch_size and n % config.sync_period == 0:
            _learn_minibatch(state, config, gamma, sample_rs)
        beta = config.beta_schedule.beta(n)
        if beta > 0.0:
            for t in range(len(state.ms)):
                dgn_m_update(state.ms[t], state.online[t], beta)
            state.counters.m_updates += 1
        state.counters.steps += 1
        if n % cadence == 0:
            gaps = [
                np.abs(state.value_estimates(t) - v_tables[t]) for t in range(len(v_tables))
            ]
            rows_step.append(n)
            rows_bre.append(float(np.concatenate(gaps).mean()))
            rows_arm.append(arm)
            rows_opt.append(optimal)
            rows_idx.append(np.concatenate(state.index_tables(gamma)))
            rows_ls.append(state.counters.learn_steps)
    log = DgnLog(
        step=np.asarray(rows_step, dtype=np.int64),
        bre=np.asarray(rows_bre),
        chosen_arm=np.asarray(rows_arm, dtype=np.int64),
        optimal=np.asarray(rows_opt, dtype=bool),
        indices=np.asarray(rows_idx) if rows_idx else np.zeros((0, 0)),
        learn_steps=np.asarray(rows_ls, dtype=np.int64),
    )
    return state, log
