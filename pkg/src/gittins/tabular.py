"""Tabular index learners: QGI, restart-in-state, and QWI.

All three learn per-reference-state tables from single-arm transitions and
expose the current index estimate per state:

* QGI keeps continue-action Q-values Q^x(s, 1) plus a retirement estimate
  M(x) per reference state, updated on a slower timescale.  No passive-action
  values are stored at all, which halves the table relative to the others.
* Restart-in-state keeps Q^x(s, a) for both continue and restart actions;
  the index is read off the diagonal continue value.
* QWI keeps two-action Q-values plus a subsidy estimate lambda(x) driven by
  the diagonal action gap.

Each step function mutates the learner state in place and returns the
update-count delta, so runs can be audited against closed-form counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BanditInstance, EpsilonSchedule, RandomSource, epsilon_greedy_select, step_arm
from .oracle import gittins_exact, reference_value_star

__all__ = [
    "TERMINAL",
    "QGI",
    "RESTART",
    "QWI",
    "UpdateCounters",
    "IndexTable",
    "QgiState",
    "RestartState",
    "QwiState",
    "make_learner",
    "qgi_step",
    "restart_step",
    "qwi_step",
    "extract_indices",
    "train_tabular",
    "train_tabular_batch",
    "MetricsLog",
    "BatchResult",
]

# Sentinel next-state for transitions that remove the arm from play
# (a completed job).  Bootstrapping then falls back to the learner's own
# estimate of the terminal value: M(x) for QGI, Q^x(x, 1) for restart.
TERMINAL = -1

QGI = "qgi"
RESTART = "restart"
QWI = "qwi"


@dataclass
class UpdateCounters:
    """Cumulative update accounting; every field is non-decreasing."""

    q_updates: int = 0
    index_updates: int = 0
    steps: int = 0

    def add(self, q=0, index=0, steps=0):
        self.q_updates += int(q)
        self.index_updates += int(index)
        self.steps += int(steps)


@dataclass
class IndexTable:
    """Per-table index vectors plus the arm-to-table map."""

    tables: list
    arm_to_table: list

    def for_arm(self, arm):
        return self.tables[self.arm_to_table[arm]]

    def arm_state_value(self, arm, state):
        return float(self.tables[self.arm_to_table[arm]][state])

    def flat(self):
        return np.concatenate([np.asarray(t) for t in self.tables])


def _table_layout(instance: BanditInstance, shared_table=None):
    """Number of tables and the arm->table map for a bandit instance."""
    if shared_table is None:
        shared_table = instance.homogeneous
    if shared_table and not instance.homogeneous:
        raise ValueError("shared-table request requires homogeneous arms")
    if shared_table:
        return [instance.arms[0].num_states], [0] * instance.num_arms
    return [a.num_states for a in instance.arms], list(range(instance.num_arms))


class QgiState:
    """Continue-action Q tables (one N x N per table) and retirement estimates M."""

    def __init__(self, state_counts, arm_to_table):
        self.qs = [np.zeros((n, n)) for n in state_counts]
        self.ms = [np.zeros(n) for n in state_counts]
        self.arm_to_table = list(arm_to_table)
        self.counters = UpdateCounters()

    @classmethod
    def from_instance(cls, instance, shared_table=None):
        counts, mapping = _table_layout(instance, shared_table)
        return cls(counts, mapping)

    def tracked_entries(self):
        return sum(q.size + m.size for q, m in zip(self.qs, self.ms))

    def value_estimates(self, table):
        q, m = self.qs[table], self.ms[table]
        return np.maximum(np.diagonal(q), m)

    def index_tables(self, gamma):
        return [(1.0 - gamma) * m for m in self.ms]


class RestartState:
    """Two-action Q tables (N x N x 2); action 1 continues, action 0 restarts."""

    def __init__(self, state_counts, arm_to_table):
        self.qs = [np.zeros((n, n, 2)) for n in state_counts]
        self.arm_to_table = list(arm_to_table)
        self.counters = UpdateCounters()

    @classmethod
    def from_instance(cls, instance, shared_table=None):
        counts, mapping = _table_layout(instance, shared_table)
        return cls(counts, mapping)

    def tracked_entries(self):
        return sum(q.size for q in self.qs)

    def value_estimates(self, table):
        q = self.qs[table]
        d = np.arange(q.shape[0])
        return q[d, d, :].max(axis=1)

    def index_tables(self, gamma):
        out = []
        for q in self.qs:
            d = np.arange(q.shape[0])
            out.append((1.0 - gamma) * q[d, d, 1])
        return out


class QwiState:
    """Two-action Q tables plus subsidy estimates lambda per reference state."""

    def __init__(self, state_counts, arm_to_table):
        self.qs = [np.zeros((n, n, 2)) for n in state_counts]
        self.lams = [np.zeros(n) for n in state_counts]
        self.arm_to_table = list(arm_to_table)
        self.counters = UpdateCounters()

    @classmethod
    def from_instance(cls, instance, shared_table=None):
        counts, mapping = _table_layout(instance, shared_table)
        return cls(counts, mapping)

    def tracked_entries(self):
        return sum(q.size + lam.size for q, lam in zip(self.qs, self.lams))

    def value_estimates(self, table):
        q = self.qs[table]
        d = np.arange(q.shape[0])
        return q[d, d, :].max(axis=1)

    def index_tables(self, gamma):
        return [lam.copy() for lam in self.lams]


def make_learner(algo, instance, shared_table=None):
    if algo == QGI:
        return QgiState.from_instance(instance, shared_table)
    if algo == RESTART:
        return RestartState.from_instance(instance, shared_table)
    if algo == QWI:
        return QwiState.from_instance(instance, shared_table)
    raise ValueError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------------------
# Per-transition updates
# ---------------------------------------------------------------------------


def qgi_step(state: QgiState, transition, alpha, beta, gamma):
    """One QGI update from a single observed transition.

    Every reference row of the pulled arm's table relaxes Q^x(s, 1) toward
    r + gamma * max(Q^x(s', 1), M(x)); afterwards, if the index rate is
    active, every table's M relaxes toward its just-updated diagonal.
    Returns the (q_updates, index_updates) delta.
    """
    arm, s, r, s_next = transition
    t = state.arm_to_table[arm]
    q, m = state.qs[t], state.ms[t]
    if s_next == TERMINAL:
        boot = m
    else:
        boot = np.maximum(q[:, s_next], m)
    q[:, s] = (1.0 - alpha) * q[:, s] + alpha * (r + gamma * boot)
    dq = q.shape[0]
    di = 0
    if beta > 0.0:
        for qt, mt in zip(state.qs, state.ms):
            mt += beta * (np.diagonal(qt) - mt)
            di += mt.size
    state.counters.add(q=dq, index=di, steps=1)
    return dq, di


def restart_step(state: RestartState, transition, alpha, gamma):
    """One restart-in-state update pair from a single observed transition.

    For every reference k, the continue value Q^k(s, 1) and the restart value
    Q^{s}(k, 0) both relax toward targets bootstrapped from the pre-update
    table.  Returns the (q_updates, index_updates) delta.
    """
    arm, s, r, s_next = transition
    t = state.arm_to_table[arm]
    q = state.qs[t]
    n = q.shape[0]
    if s_next == TERMINAL:
        d = np.arange(n)
        boot_k = q[d, d, 1].copy()
        boot_s = q[s, s, 1]
    else:
        boot_k = q[:, s_next, :].max(axis=1)
        boot_s = q[s, s_next, :].max()
    target_cont = r + gamma * boot_k
    target_restart = r + gamma * boot_s
    q[:, s, 1] = (1.0 - alpha) * q[:, s, 1] + alpha * target_cont
    q[s, :, 0] = (1.0 - alpha) * q[s, :, 0] + alpha * target_restart
    state.counters.add(q=2 * n, steps=1)
    return 2 * n, 0


def qwi_step(state: QwiState, active, passive_states, alpha, beta, gamma):
    """One QWI update: the pulled arm's transition plus frozen passive arms.

    The active transition relaxes Q^x(s, 1) toward r + gamma * max_a Q^x(s', a);
    each passive arm j relaxes Q^x(s_j, 0) toward lambda(x) + gamma * max_a
    Q^x(s_j, a) at its frozen state.  All bootstrap values are read from the
    table as it stood on entry.  If the index rate is active, lambda relaxes
    toward the diagonal action gap on every table.
    """
    arm, s, r, s_next = active
    t = state.arm_to_table[arm]
    q_act = state.qs[t]
    boot_a = q_act[:, s_next, :].max(axis=1)
    passive_targets = []
    for p_arm, p_state in passive_states:
        pt = state.arm_to_table[p_arm]
        qp = state.qs[pt]
        boot_p = qp[:, p_state, :].max(axis=1)
        passive_targets.append((pt, p_state, state.lams[pt] + gamma * boot_p))
    q_act[:, s, 1] = (1.0 - alpha) * q_act[:, s, 1] + alpha * (r + gamma * boot_a)
    dq = q_act.shape[0]
    for pt, p_state, target in passive_targets:
        qp = state.qs[pt]
        qp[:, p_state, 0] = (1.0 - alpha) * qp[:, p_state, 0] + alpha * target
        dq += qp.shape[0]
    di = 0
    if beta > 0.0:
        for qt, lam in zip(state.qs, state.lams):
            d = np.arange(qt.shape[0])
            lam += beta * (qt[d, d, 1] - qt[d, d, 0])
            di += lam.size
    state.counters.add(q=dq, index=di, steps=1)
    return dq, di


def extract_indices(state, gamma):
    """Current index estimate per table: (1-gamma)*M for QGI, (1-gamma) times
    the diagonal continue value for restart, and lambda itself for QWI."""
    return IndexTable(tables=state.index_tables(gamma), arm_to_table=state.arm_to_table)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


@dataclass
class MetricsLog:
    """Per-cadence training records; all arrays share one length."""

    step: np.ndarray
    bre: np.ndarray
    chosen_arm: np.ndarray
    optimal: np.ndarray
    indices: np.ndarray
    q_updates: np.ndarray
    index_updates: np.ndarray

    def __len__(self):
        return len(self.step)


def _oracle_tables(instance, shared):
    """Exact index and value vectors per learner table."""
    arms = [instance.arms[0]] if shared else list(instance.arms)
    sols = [gittins_exact(a, instance.gamma) for a in arms]
    g_tables = [s.G_star for s in sols]
    v_tables = [reference_value_star(s) for s in sols]
    return g_tables, v_tables


def _bre_of(state, v_tables):
    gaps = [np.abs(state.value_estimates(t) - v_tables[t]) for t in range(len(v_tables))]
    return float(np.concatenate(gaps).mean())


def train_tabular(
    env: BanditInstance,
    algo,
    schedule,
    epsilon: EpsilonSchedule,
    steps,
    seed,
    cadence=1,
    shared_table=None,
    oracle_tables=None,
):
    """Run the select / pull / update loop for `steps` iterations.

    Returns the final learner state and a MetricsLog sampled every `cadence`
    steps (extracted indices, error against the exact values, the chosen arm
    and whether it was optimal under the exact indices).  Identical seeds
    give bit-identical logs.  Two independent substreams of the seed drive
    arm selection and environment transitions.
    """
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    state = make_learner(algo, env, shared_table)
    shared = len(state.qs) == 1 and env.num_arms > 1
    if oracle_tables is None:
        oracle_tables = _oracle_tables(env, shared)
    g_tables, v_tables = oracle_tables

    rs = RandomSource(seed)
    sel_rs = rs.spawn(0)
    env_rs = rs.spawn(1)
    gamma = env.gamma
    k = env.num_arms
    available = np.ones(k, dtype=bool)
    a2t = state.arm_to_table

    rows_step, rows_bre, rows_arm, rows_opt = [], [], [], []
    rows_idx, rows_qu, rows_iu = [], [], []
    for n in range(1, steps + 1):
        eps = epsilon.value(n)
        cur = env.current_states
        idx_tables = state.index_tables(gamma)
        learner_idx = np.array([idx_tables[a2t[i]][cur[i]] for i in range(k)])
        arm = epsilon_greedy_select(learner_idx, available, eps, sel_rs)
        oracle_idx = np.array([g_tables[a2t[i]][cur[i]] for i in range(k)])
        optimal = bool(oracle_idx[arm] >= oracle_idx.max() - 1e-12)
        s = int(cur[arm])
        s_next, r = step_arm(env, arm, env_rs)
        alpha = schedule.alpha(n)
        beta = schedule.beta(n)
        if algo == QGI:
            qgi_step(state, (arm, s, r, s_next), alpha, beta, gamma)
        elif algo == RESTART:
            restart_step(state, (arm, s, r, s_next), alpha, gamma)
        else:
            passive = [(j, int(cur[j])) for j in range(k) if j != arm]
            qwi_step(state, (arm, s, r, s_next), passive, alpha, beta, gamma)
        if n % cadence == 0:
            rows_step.append(n)
            rows_bre.append(_bre_of(state, v_tables))
            rows_arm.append(arm)
            rows_opt.append(optimal)
            rows_idx.append(np.concatenate(state.index_tables(gamma)))
            rows_qu.append(state.counters.q_updates)
            rows_iu.append(state.counters.index_updates)
    log = MetricsLog(
        step=np.asarray(rows_step, dtype=np.int64),
        bre=np.asarray(rows_bre),
        chosen_arm=np.asarray(rows_arm, dtype=np.int64),
        optimal=np.asarray(rows_opt, dtype=bool),
        indices=np.asarray(rows_idx) if rows_idx else np.zeros((0, 0)),
        q_updates=np.asarray(rows_qu, dtype=np.int64),
        index_updates=np.asarray(rows_iu, dtype=np.int64),
    )
    return state, log


@dataclass
class BatchResult:
    """Outcome of a batched multi-seed run on one homogeneous instance."""

    seeds: list
    final_indices: np.ndarray  # (runs, states) in index units
    window_mean_indices: np.ndarray  # (runs, states), mean of the last `window` records
    final_bre: np.ndarray  # (runs,)
    counters: UpdateCounters
    oracle_indices: np.ndarray = field(default=None)


def train_tabular_batch(env: BanditInstance, algo, schedule, steps, seeds, window=200):
    """Run many seeds of one configuration in lock-step with full exploration.

    Vectorises across runs, so a hyperparameter-sensitivity grid stays
    tractable on one core.  Only homogeneous instances with epsilon = 1 are
    supported; per-seed streams are derived exactly as in train_tabular, so
    results match the reference loop bit for bit.
    """
    if not env.homogeneous:
        raise ValueError("batched training requires a homogeneous instance")
    steps = int(steps)
    model = env.arms[0]
    n_states = model.num_states
    k = env.num_arms
    gamma = env.gamma
    rew = model.reward
    cum = model._cum_rows
    runs = len(seeds)
    dd = np.arange(n_states)
    ar = np.arange(runs)

    sel_gens = [RandomSource(s).spawn(0).rng for s in seeds]
    env_gens = [RandomSource(s).spawn(1).rng for s in seeds]

    if algo == QGI:
        q = np.zeros((runs, n_states, n_states))
        m = np.zeros((runs, n_states))
    elif algo == RESTART:
        q = np.zeros((runs, n_states, n_states, 2))
    elif algo == QWI:
        q = np.zeros((runs, n_states, n_states, 2))
        lam = np.zeros((runs, n_states))
    else:
        raise ValueError(f"unknown algorithm {algo!r}")

    states = np.zeros((runs, k), dtype=np.int64)
    window = min(window, steps) if steps else 0
    ring = np.zeros((runs, max(window, 1), n_states))
    alphas = schedule.alpha_array(np.arange(1, steps + 1)) if steps else np.zeros(0)
    betas = np.array([schedule.beta(n) for n in range(1, steps + 1)])

    block = 4096
    n = 0
    while n < steps:
        b = min(block, steps - n)
        sel_u = np.stack([g.random((b, 2)) for g in sel_gens])  # (runs, b, 2)
        env_u = np.stack([g.random(b) for g in env_gens])  # (runs, b)
        for i in range(b):
            step_idx = n + i
            alpha = alphas[step_idx]
            beta = betas[step_idx]
            # epsilon = 1: first selection draw decides explore (always), the
            # second picks uniformly among the arms.
            arm = (sel_u[:, i, 1] * k).astype(np.int64)
            s = states[ar, arm]
            r = rew[s]
            nxt = (env_u[:, i][:, None] >= cum[s]).sum(axis=1)
            if algo == QGI:
                boot = np.maximum(q[ar, :, nxt], m)
                q[ar, :, s] = (1.0 - alpha) * q[ar, :, s] + alpha * (r[:, None] + gamma * boot)
                if beta > 0.0:
                    m += beta * (q[:, dd, dd] - m)
                snap = m
            elif algo == RESTART:
                boot_k = q[ar, :, nxt, :].max(axis=2)
                boot_s = q[ar, s, nxt, :].max(axis=1)
                q[ar, :, s, 1] = (1.0 - alpha) * q[ar, :, s, 1] + alpha * (
                    r[:, None] + gamma * boot_k
                )
                q[ar, s, :, 0] = (1.0 - alpha) * q[ar, s, :, 0] + alpha * (
                    (r + gamma * boot_s)[:, None]
                )
                snap = q[:, dd, dd, 1]
            else:  # QWI
                boot_a = q[ar, :, nxt, :].max(axis=2)
                passive_boots = []
                for j in range(k):
                    sj = states[:, j]
                    passive_boots.append(q[ar, :, sj, :].max(axis=2))
                q[ar, :, s, 1] = (1.0 - alpha) * q[ar, :, s, 1] + alpha * (
                    r[:, None] + gamma * boot_a
                )
                for j in range(k):
                    mask = arm != j
                    if not mask.any():
                        continue
                    sj = states[mask, j]
                    tgt = lam[mask] + gamma * passive_boots[j][mask]
                    q[mask, :, sj, 0] = (1.0 - alpha) * q[mask, :, sj, 0] + alpha * tgt
                if beta > 0.0:
                    lam += beta * (q[:, dd, dd, 1] - q[:, dd, dd, 0])
                snap = lam
            states[ar, arm] = nxt
            if window:
                ring[:, step_idx % window, :] = snap
        n += b

    sol = gittins_exact(model, gamma)
    v_star = reference_value_star(sol)
    if algo == QGI:
        final_idx = (1.0 - gamma) * m
        win_idx = (1.0 - gamma) * ring.mean(axis=1)
        values = np.maximum(q[:, dd, dd], m)
        counters = UpdateCounters(
            q_updates=steps * n_states,
            index_updates=sum(1 for b_ in betas if b_ > 0) * n_states,
            steps=steps,
        )
    elif algo == RESTART:
        final_idx = (1.0 - gamma) * q[:, dd, dd, 1]
        win_idx = (1.0 - gamma) * ring.mean(axis=1)
        values = q[:, dd, dd, :].max(axis=2)
        counters = UpdateCounters(q_updates=2 * steps * n_states, index_updates=0, steps=steps)
    else:
        final_idx = lam.copy()
        win_idx = ring.mean(axis=1)
        values = q[:, dd, dd, :].max(axis=2)
        counters = UpdateCounters(
            q_updates=steps * k * n_states,
            index_updates=sum(1 for b_ in betas if b_ > 0) * n_states,
            steps=steps,
        )
    final_bre = np.abs(values - v_star[None, :]).mean(axis=1)
    return BatchResult(
        seeds=list(seeds),
        final_indices=final_idx,
        window_mean_indices=win_idx,
        final_bre=final_bre,
        counters=counters,
        oracle_indices=sol.G_star.copy(),
    )
