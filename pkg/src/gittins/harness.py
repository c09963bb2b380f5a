"""Experiment harness: metrics, CSV persistence, and the sensitivity grid.

Everything an experiment produces is written as plain CSV next to a
manifest that echoes the resolved configuration, so any run can be
re-executed exactly.  Schemas:

* bandit metrics_<seed>.csv: step,bre,chosen_arm,optimal,pct_suboptimal
* scheduling metrics_<seed>.csv:
  episode,flowtime,oracle_flowtime,regret,pct_optimal_actions,bre
* indices_<seed>.csv: step (or episode) followed by one idx_<table>_<state>
  column per tracked state
* counters_<seed>.csv: step,q_updates,index_updates (tabular) or
  step,learn_steps,target_evaluations,m_updates (deep)
* convergence_map.csv: x_axis,y_axis,delta,fraction_converged
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, render
from .core import (
    ConstantRateSchedule,
    EpsilonSchedule,
    LearningRateSchedule,
    MixedRateSchedule,
    RandomSource,
)
from .deep import DgnConfig, train_dgn
from .envs import dirichlet_instance, elementary_two_arm_instance, toy_instance
from .oracle import RetirementSolution, gittins_exact, reference_value_star
from .scheduling import HazardSpec, JobBatchEnv, ServiceDistSpec, train_scheduling
from .tabular import train_tabular, train_tabular_batch

__all__ = [
    "ConvergenceMapCell",
    "compute_bre",
    "suboptimal_pct",
    "build_env",
    "build_schedule",
    "build_epsilon",
    "run_experiment",
    "grid_search",
    "oracle_csv",
]

BANDIT_KINDS = ("toy", "dirichlet", "elementary2")


def compute_bre(state, oracle):
    """Mean absolute gap between learner state values and the optimal values.

    `oracle` is a RetirementSolution for single-table learners or a list of
    per-table optimal value vectors.  Each table's learner value is the best
    diagonal estimate (continue value versus index estimate in value units).
    """
    if isinstance(oracle, RetirementSolution):
        v_tables = [reference_value_star(oracle)]
    else:
        v_tables = [np.asarray(v) for v in oracle]
    if len(v_tables) != len(state.qs if hasattr(state, "qs") else state.ms):
        raise ValueError("oracle table count does not match learner tables")
    gaps = []
    for t, v in enumerate(v_tables):
        est = state.value_estimates(t)
        if est.shape != v.shape:
            raise ValueError(f"table {t}: value shape {est.shape} != oracle {v.shape}")
        gaps.append(np.abs(est - v))
    return float(np.concatenate(gaps).mean())


def suboptimal_pct(actions, oracle_indices, available=None):
    """Running percentage of steps whose action missed the oracle argmax set.

    `oracle_indices` holds each step's per-arm exact indices (rows), and an
    action is optimal when its index ties the best available one.
    """
    actions = np.asarray(actions, dtype=np.int64)
    oracle_indices = np.asarray(oracle_indices, dtype=np.float64)
    if available is None:
        available = np.ones_like(oracle_indices, dtype=bool)
    available = np.asarray(available, dtype=bool)
    if oracle_indices.shape != available.shape or len(actions) != len(oracle_indices):
        raise ValueError("misaligned logs")
    masked = np.where(available, oracle_indices, -np.inf)
    best = masked.max(axis=1)
    chosen = oracle_indices[np.arange(len(actions)), actions]
    optimal = chosen >= best - 1e-12
    cum_subopt = np.cumsum(~optimal)
    return 100.0 * cum_subopt / np.arange(1, len(actions) + 1)


# ---------------------------------------------------------------------------
# Config -> objects
# ---------------------------------------------------------------------------


def build_env(cfg: ExperimentConfig):
    kind = cfg.env_kind
    if kind == "toy":
        return toy_instance(num_arms=cfg.env_arms, gamma=cfg.env_gamma)
    if kind == "dirichlet":
        return dirichlet_instance(
            num_arms=cfg.env_arms, num_states=cfg.env_states, gamma=cfg.env_gamma, seed=cfg.env_seed
        )
    if kind == "elementary2":
        return elementary_two_arm_instance(gamma=cfg.env_gamma)
    if kind.startswith("hazard-"):
        hazard_kind = kind.split("-", 1)[1]
        rng = RandomSource(cfg.env_seed).spawn(17)
        if cfg.env_rho1 == "uniform":
            rho = rng.rng.uniform(0.0, 1.0, cfg.env_jobs)
        else:
            rho = np.full(cfg.env_jobs, float(cfg.env_rho1))
        jobs = [HazardSpec(hazard_kind, float(r), cfg.env_hazard_lambda) for r in rho]
        return JobBatchEnv(jobs, num_states=cfg.env_cap)
    if kind == "dist-binomial":
        spec = ServiceDistSpec("binomial", n=cfg.env_n, p=cfg.env_p)
    elif kind == "dist-poisson":
        spec = ServiceDistSpec("poisson", lam=cfg.env_lam)
    elif kind == "dist-geometric":
        spec = ServiceDistSpec("geometric", q=cfg.env_q)
    elif kind == "dist-uniform":
        spec = ServiceDistSpec(
            "quantized-uniform", lo=cfg.env_lo, hi=cfg.env_hi, delta=cfg.env_delta
        )
    else:
        spec = ServiceDistSpec(
            "quantized-lognormal",
            mu=cfg.env_mu,
            sigma=cfg.env_sigma,
            delta=cfg.env_delta,
            max_size=cfg.env_max_size,
        )
    return JobBatchEnv([spec] * cfg.env_jobs)


def build_schedule(cfg: ExperimentConfig):
    if cfg.rates_kind == "paper":
        return LearningRateSchedule(
            x=cfg.rates_x, y=cfg.rates_y, theta=cfg.rates_theta, kappa=cfg.rates_kappa,
            phi=cfg.rates_phi, log_base=cfg.rates_log_base,
        )
    if cfg.rates_kind == "mixed":
        return MixedRateSchedule(
            x=cfg.rates_alpha, theta=cfg.rates_theta, beta_value=cfg.rates_beta, phi=cfg.rates_phi
        )
    return ConstantRateSchedule(
        alpha_value=cfg.rates_alpha, beta_value=cfg.rates_beta, phi=cfg.rates_phi
    )


def build_epsilon(cfg: ExperimentConfig):
    return EpsilonSchedule(initial=cfg.eps_initial, decay=cfg.eps_decay, floor=cfg.eps_floor)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _index_header(lead, tables):
    cols = [lead]
    for t, table in enumerate(tables):
        cols.extend(f"idx_{t}_{s}" for s in range(len(table)))
    return cols


# ---------------------------------------------------------------------------
# run_experiment
# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run cfg over all its seeds and write metrics/indices/counters CSVs.

    Returns the list of written paths.  Raises on invalid configuration
    before any run starts.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.run_out)
    out.mkdir(parents=True, exist_ok=True)
    schedule = build_schedule(cfg)
    epsilon = build_epsilon(cfg)
    written = []
    wallclocks = []
    for seed in cfg.run_seeds:
        t0 = time.time()
        if cfg.env_kind in BANDIT_KINDS:
            paths = _run_bandit_seed(cfg, schedule, epsilon, seed, out)
        else:
            paths = _run_scheduling_seed(cfg, schedule, epsilon, seed, out)
        wallclocks.append((seed, time.time() - t0))
        written.extend(paths)
    manifest = out / "manifest.txt"
    with open(manifest, "w") as fh:
        fh.write(render(cfg))
        for seed, dt in wallclocks:
            fh.write(f"# wallclock_seconds seed={seed}: {dt:.3f}\n")
    written.append(manifest)
    return written


def _run_bandit_seed(cfg, schedule, epsilon, seed, out: Path):
    env = build_env(cfg)
    if cfg.algo == "dgn":
        dgn_cfg = DgnConfig(
            batch_size=cfg.dgn_batch,
            tau=cfg.dgn_tau,
            sync_period=cfg.dgn_sync,
            step_size=cfg.dgn_lr,
            beta_schedule=ConstantRateSchedule(
                alpha_value=1.0, beta_value=cfg.dgn_beta, phi=cfg.dgn_beta_phi
            ),
            encoding=cfg.dgn_encoding,
            replay_capacity=cfg.dgn_capacity,
        )
        state, log = train_dgn(
            env, dgn_cfg, epsilon, cfg.run_steps, seed=seed, cadence=cfg.run_cadence
        )
        n_states = env.arms[0].num_states
        counters_header = ["step", "learn_steps", "target_evaluations", "m_updates"]
        counters_rows = [
            (
                log.step[i],
                log.learn_steps[i],
                log.learn_steps[i] * cfg.dgn_batch * n_states,
                log.step[i] // cfg.dgn_beta_phi,
            )
            for i in range(len(log))
        ]
    else:
        state, log = train_tabular(
            env, cfg.algo, schedule, epsilon, cfg.run_steps, seed=seed, cadence=cfg.run_cadence
        )
        counters_header = ["step", "q_updates", "index_updates"]
        counters_rows = [
            (log.step[i], log.q_updates[i], log.index_updates[i]) for i in range(len(log))
        ]
    pct = suboptimal_pct_from_log(log)
    metrics = out / f"metrics_{seed}.csv"
    _write_csv(
        metrics,
        ["step", "bre", "chosen_arm", "optimal", "pct_suboptimal"],
        [
            (log.step[i], log.bre[i], log.chosen_arm[i], log.optimal[i], pct[i])
            for i in range(len(log))
        ],
    )
    idx_path = out / f"indices_{seed}.csv"
    tables = state.index_tables(env.gamma)
    _write_csv(
        idx_path,
        _index_header("step", tables),
        [(log.step[i], *log.indices[i]) for i in range(len(log))],
    )
    counters = out / f"counters_{seed}.csv"
    _write_csv(counters, counters_header, counters_rows)
    return [metrics, idx_path, counters]


def suboptimal_pct_from_log(log):
    """Cumulative suboptimal percentage over the logged steps."""
    if len(log) == 0:
        return np.zeros(0)
    cum = np.cumsum(~log.optimal)
    return 100.0 * cum / np.arange(1, len(log) + 1)


def _run_scheduling_seed(cfg, schedule, epsilon, seed, out: Path):
    env = build_env(cfg)
    dgn_cfg = None
    if cfg.algo == "dgn":
        dgn_cfg = DgnConfig(
            batch_size=cfg.dgn_batch,
            tau=cfg.dgn_tau,
            sync_period=cfg.dgn_sync,
            step_size=cfg.dgn_lr,
            beta_schedule=ConstantRateSchedule(
                alpha_value=1.0, beta_value=cfg.dgn_beta, phi=cfg.dgn_beta_phi
            ),
            encoding=cfg.dgn_encoding,
            replay_capacity=cfg.dgn_capacity,
        )
    state, log = train_scheduling(
        env,
        cfg.algo,
        schedule,
        epsilon,
        episodes=cfg.run_episodes,
        gamma=cfg.env_gamma,
        seed=seed,
        oracle_trials=cfg.run_oracle_trials,
        dgn_config=dgn_cfg,
    )
    metrics = out / f"metrics_{seed}.csv"
    _write_csv(
        metrics,
        ["episode", "flowtime", "oracle_flowtime", "regret", "pct_optimal_actions", "bre"],
        [
            (
                log.episode[i],
                log.flowtime[i],
                log.oracle_flowtime,
                log.regret[i],
                log.pct_optimal[i],
                log.bre[i],
            )
            for i in range(len(log))
        ],
    )
    idx_path = out / f"indices_{seed}.csv"
    tables = state.index_tables(cfg.env_gamma)
    _write_csv(
        idx_path,
        _index_header("episode", tables),
        [(log.episode[i], *log.indices[i]) for i in range(len(log))],
    )
    counters = out / f"counters_{seed}.csv"
    _write_csv(
        counters,
        ["episode", "q_updates", "index_updates"],
        [(log.episode[i], log.q_updates[i], log.index_updates[i]) for i in range(len(log))],
    )
    return [metrics, idx_path, counters]


# ---------------------------------------------------------------------------
# Sensitivity grid
# ---------------------------------------------------------------------------

_GRID_PARAMS = ("x", "y", "theta", "kappa", "phi")


class ConvergenceMapCell(tuple):
    """(x_value, y_value, delta, fraction_converged) for one grid cell."""

    __slots__ = ()

    def __new__(cls, x_value, y_value, delta, fraction_converged):
        if not 0.0 <= fraction_converged <= 1.0:
            raise ValueError("fraction_converged must lie in [0, 1]")
        return super().__new__(cls, (x_value, y_value, delta, fraction_converged))

    x_value = property(lambda self: self[0])
    y_value = property(lambda self: self[1])
    delta = property(lambda self: self[2])
    fraction_converged = property(lambda self: self[3])


def _cell_schedule(cfg, px, vx, py, vy):
    values = {
        "x": cfg.rates_x,
        "y": cfg.rates_y,
        "theta": cfg.rates_theta,
        "kappa": cfg.rates_kappa,
        "phi": cfg.rates_phi,
    }
    values[px] = vx
    values[py] = vy
    for name in ("theta", "kappa", "phi"):
        values[name] = int(values[name])
    return LearningRateSchedule(**values)


def grid_search(cfg: ExperimentConfig, algo=None, out_path=None):
    """Convergence map over a two-parameter grid.

    For each cell, `grid.runs` seeded runs of `grid.steps` full-exploration
    steps are scored: a run converges at tolerance delta when every state's
    mean index over the last `grid.window` records lies within delta of the
    exact index.  Returns (rows, csv_path or None); rows carry
    (x_value, y_value, delta, fraction_converged).
    """
    cfg.validate()
    if cfg.env_kind not in BANDIT_KINDS:
        raise ValueError("grid search runs on bandit environments")
    px, py = cfg.grid_param_x, cfg.grid_param_y
    if px not in _GRID_PARAMS or py not in _GRID_PARAMS or px == py:
        raise ValueError(f"grid axes must be two distinct of {_GRID_PARAMS}")
    algo = algo or cfg.algo
    base_seed = cfg.run_seeds[0]
    rows = []
    for i, vx in enumerate(cfg.grid_x_values):
        for j, vy in enumerate(cfg.grid_y_values):
            schedule = _cell_schedule(cfg, px, vx, py, vy)
            ss = np.random.SeedSequence(base_seed, spawn_key=(i, j))
            seeds = [int(s) for s in ss.generate_state(cfg.grid_runs)]
            env = build_env(cfg)
            result = train_tabular_batch(
                env, algo, schedule, cfg.grid_steps, seeds, window=cfg.grid_window
            )
            err = np.abs(result.window_mean_indices - result.oracle_indices[None, :]).max(axis=1)
            for delta in cfg.grid_deltas:
                frac = float((err <= delta).mean())
                rows.append(ConvergenceMapCell(vx, vy, delta, frac))
    csv_path = None
    if out_path is not None:
        csv_path = Path(out_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(csv_path, ["x_axis", "y_axis", "delta", "fraction_converged"], rows)
    return rows, csv_path


# ---------------------------------------------------------------------------
# Oracle CSV (CLI `oracle` subcommand)
# ---------------------------------------------------------------------------


def oracle_csv(cfg: ExperimentConfig):
    """State-by-state exact index table as CSV text: arm,state,M_star,G_star."""
    cfg.validate()
    lines = ["arm,state,M_star,G_star"]
    if cfg.env_kind in BANDIT_KINDS:
        env = build_env(cfg)
        arms = [env.arms[0]] if env.homogeneous else env.arms
        for a, arm in enumerate(arms):
            sol = gittins_exact(arm, env.gamma, cfg.oracle_tol)
            for s in range(arm.num_states):
                lines.append(f"{a},{s},{_fmt(sol.M_star[s])},{_fmt(sol.G_star[s])}")
    else:
        from .scheduling import job_arm_model

        env = build_env(cfg)
        jobs = [0] if env.homogeneous else range(env.num_jobs)
        for j in jobs:
            sol = gittins_exact(job_arm_model(env, j), cfg.env_gamma, cfg.oracle_tol)
            for s in range(env.num_states):
                lines.append(f"{j},{s},{_fmt(sol.M_star[s])},{_fmt(sol.G_star[s])}")
    return "\n".join(lines) + "\n"
