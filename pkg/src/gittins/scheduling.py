"""Preemptive batch job scheduling as a rested bandit.

Each job is an arm whose state is its age (quanta of service received).
Serving a job either completes it, paying reward 1 and removing it from
play, or advances its age by one.  Completion probabilities come from a
hazard model (constant, increasing, or decreasing in age) or implicitly
from a sampled service-time distribution.  An episode serves a fresh batch
of K jobs to completion; the flowtime, the sum of completion times, is the
quantity the exact-index policy minimises, and the regret of a learned
policy is its per-episode flowtime excess over that policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import ArmModel, EpsilonSchedule, RandomSource, epsilon_greedy_select
from .oracle import gittins_exact, reference_value_star
from .tabular import (
    QGI,
    RESTART,
    TERMINAL,
    IndexTable,
    QgiState,
    RestartState,
    qgi_step,
    restart_step,
)

__all__ = [
    "HazardSpec",
    "ServiceDistSpec",
    "JobBatchEnv",
    "EpisodeTrace",
    "hazard_rate",
    "sample_service_time",
    "serve_step",
    "run_episode",
    "job_arm_model",
    "oracle_index_table",
    "oracle_flowtime",
    "episodic_regret",
    "train_scheduling",
    "SchedulingLog",
]

TAIL_MASS = 1e-6  # probability mass allowed beyond a derived state cap


@dataclass(frozen=True)
class HazardSpec:
    """Completion-probability model as a function of age state s >= 1.

    increasing: rho^s = 1 - (1 - rho1) * lam^(s-1)
    decreasing: rho^1 = rho1, and rho^s = 1 - (1 - rho1) * lam^(1/(s-1))
    for s >= 2 (the jump up at s = 2 is the model's own boundary behaviour).
    """

    kind: str
    rho1: float
    lambda_h: float = 0.8

    def __post_init__(self):
        if self.kind not in ("constant", "increasing", "decreasing"):
            raise ValueError(f"unknown hazard kind {self.kind!r}")
        if not 0.0 <= self.rho1 <= 1.0:
            raise ValueError("rho1 must lie in [0, 1]")
        if not 0.0 < self.lambda_h < 1.0:
            raise ValueError("lambda_h must lie in (0, 1)")


def hazard_rate(spec: HazardSpec, s):
    """Completion probability after s - 1 quanta of service (s >= 1)."""
    if s < 1:
        raise ValueError(f"age state must be >= 1, got {s}")
    if spec.kind == "constant":
        return spec.rho1
    if spec.kind == "increasing":
        return 1.0 - (1.0 - spec.rho1) * spec.lambda_h ** (s - 1)
    if s == 1:
        return spec.rho1
    return 1.0 - (1.0 - spec.rho1) * spec.lambda_h ** (1.0 / (s - 1))


@dataclass(frozen=True)
class ServiceDistSpec:
    """Service-time family; draws are quantised and clamped to [1, s_max].

    Continuous families are divided into quanta of size delta and rounded
    up; discrete draws of 0 are clamped to one quantum.  The cap s_max is
    the family's natural maximum, or the smallest value holding all but
    TAIL_MASS of the distribution.
    """

    family: str
    n: int = 0
    p: float = 0.0
    lam: float = 0.0
    q: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    delta: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    max_size: float = 0.0

    def __post_init__(self):
        if self.family not in (
            "binomial",
            "poisson",
            "geometric",
            "quantized-uniform",
            "quantized-lognormal",
        ):
            raise ValueError(f"unknown service family {self.family!r}")

    @property
    def s_max(self):
        if self.family == "binomial":
            return self.n
        if self.family == "poisson":
            return int(stats.poisson.ppf(1.0 - TAIL_MASS, self.lam))
        if self.family == "geometric":
            return int(stats.geom.ppf(1.0 - TAIL_MASS, self.q))
        if self.family == "quantized-uniform":
            return int(math.ceil(self.hi / self.delta))
        return int(math.ceil(self.max_size / self.delta))

    def pmf(self):
        """Probability of each quantised service time 1..s_max, clamp included."""
        m = self.s_max
        t = np.arange(1, m + 1)
        if self.family == "binomial":
            p = stats.binom.pmf(t, self.n, self.p)
            p[0] += stats.binom.pmf(0, self.n, self.p)
        elif self.family == "poisson":
            p = stats.poisson.pmf(t, self.lam)
            p[0] += stats.poisson.pmf(0, self.lam)
            p[-1] += stats.poisson.sf(m, self.lam)
        elif self.family == "geometric":
            p = stats.geom.pmf(t, self.q)
            p[-1] += stats.geom.sf(m, self.q)
        elif self.family == "quantized-uniform":
            width = self.hi - self.lo
            upper = np.minimum(t * self.delta, self.hi)
            lower = np.maximum((t - 1) * self.delta, self.lo)
            p = np.clip(upper - lower, 0.0, None) / width
        else:
            dist = stats.lognorm(s=self.sigma, scale=math.exp(self.mu))
            edges = np.arange(m + 1) * self.delta
            cdf = dist.cdf(edges)
            p = np.diff(cdf)
            p[0] += cdf[0]
            p[-1] += 1.0 - cdf[-1]
        return p / p.sum()


def sample_service_time(spec: ServiceDistSpec, rng):
    """Draw one quantised service time, clamped into [1, s_max]."""
    g = rng.rng
    if spec.family == "binomial":
        raw = int(g.binomial(spec.n, spec.p))
    elif spec.family == "poisson":
        raw = int(g.poisson(spec.lam))
    elif spec.family == "geometric":
        raw = int(g.geometric(spec.q))
    elif spec.family == "quantized-uniform":
        raw = int(math.ceil(g.uniform(spec.lo, spec.hi) / spec.delta))
    else:
        raw = int(math.ceil(g.lognormal(spec.mu, spec.sigma) / spec.delta))
    return int(np.clip(raw, 1, spec.s_max))


class JobBatchEnv:
    """A batch of K jobs served one quantum at a time by a single server.

    Ages count quanta received (0-based); a hazard job serving its
    (age+1)-th quantum completes with probability rho^(age+1), and a job at
    the age cap completes deterministically.  Distribution jobs complete
    exactly when age + 1 reaches their hidden sampled service time.
    ``homogeneous`` is true for identically distributed jobs, which then
    share one learner table.
    """

    def __init__(self, jobs, num_states=50):
        if not jobs:
            raise ValueError("need at least one job")
        kinds = {type(j) for j in jobs}
        if len(kinds) > 1:
            raise ValueError("jobs must be all hazard-model or all distribution-model")
        self.jobs = list(jobs)
        self.hazard_based = isinstance(jobs[0], HazardSpec)
        if self.hazard_based:
            self.num_states = int(num_states)
        else:
            self.num_states = max(j.s_max for j in jobs)
        self.homogeneous = all(j == jobs[0] for j in jobs)
        k = len(jobs)
        self.ages = np.zeros(k, dtype=np.int64)
        self.done = np.ones(k, dtype=bool)  # not serviceable until reset
        self.service_times = np.zeros(k, dtype=np.int64)
        self.episode = 0

    @property
    def num_jobs(self):
        return len(self.jobs)

    def reset(self, rng):
        """Start a fresh batch: zero ages and new hidden service times."""
        self.ages[:] = 0
        self.done[:] = False
        if not self.hazard_based:
            self.service_times = np.array(
                [sample_service_time(j, rng) for j in self.jobs], dtype=np.int64
            )
        self.episode += 1

    def available(self):
        return ~self.done

    def completion_probability(self, job):
        age = int(self.ages[job])
        if age >= self.num_states - 1:
            return 1.0
        spec = self.jobs[job]
        if self.hazard_based:
            return hazard_rate(spec, age + 1)
        raise ValueError("distribution jobs complete deterministically at their service time")


def serve_step(env: JobBatchEnv, job, rng):
    """Serve one quantum: returns (completed, reward).

    Hazard jobs consume one uniform draw; distribution jobs are
    deterministic given their hidden service time.
    """
    if env.done[job]:
        raise ValueError(f"job {job} is already complete")
    age = int(env.ages[job])
    if env.hazard_based:
        p = env.completion_probability(job)
        completed = rng.rng.random() < p
    else:
        completed = age + 1 == int(env.service_times[job])
    if completed:
        env.done[job] = True
        return True, 1.0
    env.ages[job] = age + 1
    return False, 0.0


@dataclass
class EpisodeTrace:
    """Full record of one episode: who was served when, and completions."""

    served: np.ndarray  # job index per step
    completed: np.ndarray  # completion flag per step
    unfinished_counts: np.ndarray  # unfinished jobs at the start of each step
    age_spreads: np.ndarray  # max-min age over unfinished jobs at each step start
    completion_times: np.ndarray  # 1-based step of completion per job
    first_service_order: list  # jobs in order of first service

    @property
    def flowtime(self):
        return float(self.completion_times.sum())

    def run_to_completion(self):
        """True when no started job was ever preempted before completing."""
        for t in range(1, len(self.served)):
            if self.served[t] != self.served[t - 1] and not self.completed[t - 1]:
                return False
        return True

    def spread_ok_fraction(self, limit=1):
        return float((self.age_spreads <= limit).mean())


def _indices_for(policy, env):
    if isinstance(policy, IndexTable):
        return np.array(
            [policy.tables[policy.arm_to_table[j]][env.ages[j]] for j in range(env.num_jobs)]
        )
    return np.asarray(policy(env))


def run_episode(env: JobBatchEnv, policy, epsilon, rng):
    """Serve a freshly reset batch to completion under an index policy.

    `policy` is an IndexTable over (job, age) or a callable env -> per-job
    index vector.  Selection is epsilon-greedy among unfinished jobs.
    """
    k = env.num_jobs
    served, completed_flags, unfinished, spreads = [], [], [], []
    t_done = np.zeros(k, dtype=np.int64)
    first_order = []
    step = 0
    while not env.done.all():
        step += 1
        avail = env.available()
        ages_u = env.ages[avail]
        unfinished.append(int(avail.sum()))
        spreads.append(int(ages_u.max() - ages_u.min()))
        idx = _indices_for(policy, env)
        job = epsilon_greedy_select(idx, avail, epsilon, rng)
        if job not in first_order:
            first_order.append(job)
        done, _ = serve_step(env, job, rng)
        served.append(job)
        completed_flags.append(done)
        if done:
            t_done[job] = step
    return EpisodeTrace(
        served=np.asarray(served, dtype=np.int64),
        completed=np.asarray(completed_flags, dtype=bool),
        unfinished_counts=np.asarray(unfinished, dtype=np.int64),
        age_spreads=np.asarray(spreads, dtype=np.int64),
        completion_times=t_done,
        first_service_order=first_order,
    )


# ---------------------------------------------------------------------------
# Exact-policy reference
# ---------------------------------------------------------------------------


def _hazard_vector(env: JobBatchEnv, job):
    n = env.num_states
    spec = env.jobs[job]
    if env.hazard_based:
        h = np.array([hazard_rate(spec, a + 1) for a in range(n)])
    else:
        pmf = np.zeros(n)
        p = spec.pmf()
        pmf[: p.size] = p
        tail = 1.0 - np.concatenate([[0.0], np.cumsum(pmf)[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(tail > 1e-15, pmf / tail, 1.0)
    h[-1] = 1.0  # age cap: completes on the next serve
    return np.clip(h, 0.0, 1.0)


def job_arm_model(env: JobBatchEnv, job):
    """Age-state chain for one job, with an absorbing completed state.

    Serving at age a completes with the hazard h(a), earning expected
    reward h(a), else advances to age a + 1.
    """
    n = env.num_states
    h = _hazard_vector(env, job)
    p = np.zeros((n + 1, n + 1))
    for a in range(n):
        p[a, n] = h[a]
        if a + 1 < n:
            p[a, a + 1] = 1.0 - h[a]
        else:
            p[a, n] += 1.0 - h[a]  # cap state: completion is certain anyway
    p[n, n] = 1.0
    r = np.concatenate([h, [0.0]])
    return ArmModel(p, r)


def oracle_index_table(env: JobBatchEnv, gamma, tol=1e-6):
    """Exact per-(job, age) indices; one shared table when jobs are alike."""
    if env.homogeneous:
        sol = gittins_exact(job_arm_model(env, 0), gamma, tol)
        return IndexTable(tables=[sol.G_star[:-1]], arm_to_table=[0] * env.num_jobs)
    tables = []
    for j in range(env.num_jobs):
        sol = gittins_exact(job_arm_model(env, j), gamma, tol)
        tables.append(sol.G_star[:-1])
    return IndexTable(tables=tables, arm_to_table=list(range(env.num_jobs)))


def oracle_value_tables(env: JobBatchEnv, gamma, tol=1e-6):
    """Reference optimal values per learner table (age states only)."""
    jobs = [0] if env.homogeneous else range(env.num_jobs)
    out = []
    for j in jobs:
        sol = gittins_exact(job_arm_model(env, j), gamma, tol)
        out.append(reference_value_star(sol)[:-1])
    return out


def oracle_flowtime(env: JobBatchEnv, gamma, trials, rng, index_table=None):
    """Mean flowtime of the greedy exact-index policy over fresh episodes."""
    if index_table is None:
        index_table = oracle_index_table(env, gamma)
    total = 0.0
    for _ in range(int(trials)):
        env.reset(rng)
        trace = run_episode(env, index_table, 0.0, rng)
        total += trace.flowtime
    return total / trials


def episodic_regret(learner_flowtime, oracle_mean_flowtime):
    """Per-episode flowtime excess over the exact-index policy."""
    return float(learner_flowtime) - float(oracle_mean_flowtime)


# ---------------------------------------------------------------------------
# Learning while scheduling
# ---------------------------------------------------------------------------


@dataclass
class SchedulingLog:
    """Per-episode records of a scheduling training run."""

    episode: np.ndarray
    flowtime: np.ndarray
    oracle_flowtime: float
    regret: np.ndarray
    pct_optimal: np.ndarray  # cumulative % of optimal serves so far
    bre: np.ndarray
    indices: np.ndarray  # per-episode flattened index estimates
    run_to_completion: np.ndarray
    spread_ok_fraction: np.ndarray
    steps: np.ndarray
    q_updates: np.ndarray
    index_updates: np.ndarray

    def __len__(self):
        return len(self.episode)

    @property
    def cumulative_regret(self):
        return np.cumsum(self.regret)


def _scheduling_learner(algo, env: JobBatchEnv, dgn_config=None, seed=0):
    counts = [env.num_states] if env.homogeneous else [env.num_states] * env.num_jobs
    mapping = [0] * env.num_jobs if env.homogeneous else list(range(env.num_jobs))
    if algo == QGI:
        return QgiState(counts, mapping)
    if algo == RESTART:
        return RestartState(counts, mapping)
    if algo == "dgn":
        # deep learner over the same age-state tables; built here so the
        # episodic loop can stay learner-agnostic
        from .deep import DgnState, ReplayBuffer
        from .nn import AdamState, MlpParams, StateEncoder

        if dgn_config is None:
            raise ValueError("algo 'dgn' needs a DgnConfig")
        init_rng = RandomSource(seed).spawn(3).rng
        online, target, adams, ms = [], [], [], []
        for n_states in counts:
            enc = StateEncoder(n_states, dgn_config.encoding)
            net = MlpParams.init(enc, init_rng)
            online.append(net)
            target.append(net.copy())
            adams.append(AdamState.for_params(net, dgn_config.step_size))
            ms.append(np.zeros(n_states))
        return DgnState(
            online=online,
            target=target,
            adams=adams,
            ms=ms,
            arm_to_table=mapping,
            buffer=ReplayBuffer(dgn_config.replay_capacity),
        )
    raise ValueError(f"scheduling supports qgi, restart, and dgn learners, got {algo!r}")


def train_scheduling(
    env: JobBatchEnv,
    algo,
    schedule,
    epsilon: EpsilonSchedule,
    episodes,
    gamma,
    seed,
    oracle_trials=2000,
    track_oracle=True,
    oracle_mean=None,
    dgn_config=None,
):
    """Learn job indices online over many episodes of one batch spec.

    Exploration decays on the global serve counter.  The regret baseline is
    the mean flowtime of the greedy exact-index policy over `oracle_trials`
    fresh episodes with an independent stream (or `oracle_mean` when the
    caller already holds a precise shared baseline).  For the deep learner
    pass a DgnConfig; its beta schedule drives the index relaxation and
    `schedule` is ignored.  Returns the final learner and a per-episode log.
    """
    state = _scheduling_learner(algo, env, dgn_config, seed)
    a2t = state.arm_to_table
    rs = RandomSource(seed)
    sel_rs = rs.spawn(0)
    env_rs = rs.spawn(1)
    oracle_rs = rs.spawn(2)
    sample_rs = rs.spawn(4)
    deep = algo == "dgn"
    if deep:
        from .deep import ExperienceTuple, _learn_minibatch, dgn_m_update

    oracle_idx = oracle_value = None
    if track_oracle:
        oracle_idx = oracle_index_table(env, gamma)
        oracle_value = oracle_value_tables(env, gamma)
        if oracle_mean is None:
            oracle_mean = oracle_flowtime(env, gamma, oracle_trials, oracle_rs, oracle_idx)

    k = env.num_jobs
    n_global = 0
    opt_count = 0
    ep_rows = {key: [] for key in (
        "flowtime", "regret", "pct_opt", "bre", "idx", "rtc", "spread", "steps", "qu", "iu"
    )}
    for ep in range(1, int(episodes) + 1):
        env.reset(env_rs)
        served_prev = -1
        prev_completed = True
        rtc = True
        spread_ok = 0
        steps_ep = 0
        t_done = np.zeros(k, dtype=np.int64)
        while not env.done.all():
            n_global += 1
            steps_ep += 1
            avail = env.available()
            ages_u = env.ages[avail]
            if ages_u.max() - ages_u.min() <= 1:
                spread_ok += 1
            idx_tables = state.index_tables(gamma)
            learner_idx = np.array([idx_tables[a2t[j]][env.ages[j]] for j in range(k)])
            eps = epsilon.value(n_global)
            job = epsilon_greedy_select(learner_idx, avail, eps, sel_rs)
            if track_oracle:
                o_idx = np.array(
                    [oracle_idx.tables[oracle_idx.arm_to_table[j]][env.ages[j]] for j in range(k)]
                )
                best = o_idx[avail].max()
                if o_idx[job] >= best - 1e-12:
                    opt_count += 1
            if job != served_prev and not prev_completed and served_prev >= 0:
                rtc = False
            s = int(env.ages[job])
            completed, r = serve_step(env, job, env_rs)
            s_next = TERMINAL if completed else int(env.ages[job])
            if deep:
                state.buffer.push(ExperienceTuple(job, s, r, s_next))
                if (
                    len(state.buffer) > dgn_config.batch_size
                    and n_global % dgn_config.sync_period == 0
                ):
                    _learn_minibatch(state, dgn_config, gamma, sample_rs)
                beta = dgn_config.beta_schedule.beta(n_global)
                if beta > 0.0:
                    for t in range(len(state.ms)):
                        dgn_m_update(state.ms[t], state.online[t], beta)
                    state.counters.m_updates += 1
                state.counters.steps += 1
            else:
                alpha = schedule.alpha(n_global)
                beta = schedule.beta(n_global)
                if algo == QGI:
                    qgi_step(state, (job, s, r, s_next), alpha, beta, gamma)
                else:
                    restart_step(state, (job, s, r, s_next), alpha, gamma)
            if completed:
                t_done[job] = steps_ep
            served_prev = job
            prev_completed = completed
        flow = float(t_done.sum())
        ep_rows["flowtime"].append(flow)
        ep_rows["regret"].append(
            episodic_regret(flow, oracle_mean) if track_oracle else math.nan
        )
        ep_rows["pct_opt"].append(100.0 * opt_count / n_global if track_oracle else math.nan)
        if track_oracle:
            gaps = [
                np.abs(state.value_estimates(t) - oracle_value[t])
                for t in range(len(oracle_value))
            ]
            ep_rows["bre"].append(float(np.concatenate(gaps).mean()))
        else:
            ep_rows["bre"].append(math.nan)
        ep_rows["idx"].append(np.concatenate(state.index_tables(gamma)))
        ep_rows["rtc"].append(rtc)
        ep_rows["spread"].append(spread_ok / steps_ep)
        ep_rows["steps"].append(steps_ep)
        if deep:  # deep counters: learn steps and index-update rounds
            ep_rows["qu"].append(state.counters.learn_steps)
            ep_rows["iu"].append(state.counters.m_updates)
        else:
            ep_rows["qu"].append(state.counters.q_updates)
            ep_rows["iu"].append(state.counters.index_updates)

    log = SchedulingLog(
        episode=np.arange(1, int(episodes) + 1, dtype=np.int64),
        flowtime=np.asarray(ep_rows["flowtime"]),
        oracle_flowtime=oracle_mean if track_oracle else math.nan,
        regret=np.asarray(ep_rows["regret"]),
        pct_optimal=np.asarray(ep_rows["pct_opt"]),
        bre=np.asarray(ep_rows["bre"]),
        indices=np.asarray(ep_rows["idx"]),
        run_to_completion=np.asarray(ep_rows["rtc"], dtype=bool),
        spread_ok_fraction=np.asarray(ep_rows["spread"]),
        steps=np.asarray(ep_rows["steps"], dtype=np.int64),
        q_updates=np.asarray(ep_rows["qu"], dtype=np.int64),
        index_updates=np.asarray(ep_rows["iu"], dtype=np.int64),
    )
    return state, log
