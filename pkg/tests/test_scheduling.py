import numpy as np
import pytest
from scipy import stats

from gittins.core import ConstantRateSchedule, EpsilonSchedule, RandomSource
from gittins.scheduling import (
    HazardSpec,
    JobBatchEnv,
    ServiceDistSpec,
    episodic_regret,
    hazard_rate,
    job_arm_model,
    oracle_flowtime,
    oracle_index_table,
    run_episode,
    sample_service_time,
    serve_step,
    train_scheduling,
)
from gittins.tabular import IndexTable


def fixed_policy(values):
    """Index table: one row per job, constant across ages."""
    k = len(values)
    return IndexTable(
        tables=[np.full(50, v) for v in values], arm_to_table=list(range(k))
    )


# ---------------------------------------------------------------------------
# hazards
# ---------------------------------------------------------------------------


def test_hazard_rate_increasing_values():
    spec = HazardSpec("increasing", 0.5, 0.8)
    assert hazard_rate(spec, 1) == pytest.approx(0.5)
    assert hazard_rate(spec, 2) == pytest.approx(0.6)
    assert hazard_rate(spec, 3) == pytest.approx(0.68)


def test_hazard_rate_decreasing_values():
    spec = HazardSpec("decreasing", 0.5, 0.8)
    assert hazard_rate(spec, 1) == pytest.approx(0.5)
    assert hazard_rate(spec, 2) == pytest.approx(0.6)
    assert hazard_rate(spec, 3) == pytest.approx(1.0 - 0.5 * 0.8**0.5)


def test_hazard_rate_constant():
    spec = HazardSpec("constant", 0.37)
    for s in (1, 5, 40):
        assert hazard_rate(spec, s) == 0.37


def test_hazard_rate_monotonicity():
    inc = HazardSpec("increasing", 0.2, 0.7)
    vals = [hazard_rate(inc, s) for s in range(1, 40)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    dec = HazardSpec("decreasing", 0.2, 0.7)
    vals = [hazard_rate(dec, s) for s in range(2, 40)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_hazard_rate_rejects_zero_state():
    with pytest.raises(ValueError):
        hazard_rate(HazardSpec("constant", 0.5), 0)


# ---------------------------------------------------------------------------
# service distributions
# ---------------------------------------------------------------------------


def test_uniform_quantised_mean():
    spec = ServiceDistSpec("quantized-uniform", lo=0.0, hi=10.0, delta=0.1)
    assert spec.s_max == 100
    rng = RandomSource(8)
    draws = np.array([sample_service_time(spec, rng) for _ in range(100_000)])
    assert draws.min() >= 1 and draws.max() <= 100
    assert abs(draws.mean() - 50.0) < 1.0


def test_geometric_mass_at_one():
    spec = ServiceDistSpec("geometric", q=0.5)
    rng = RandomSource(9)
    draws = np.array([sample_service_time(spec, rng) for _ in range(100_000)])
    assert abs(np.mean(draws == 1) - 0.5) < 0.01


def test_lognormal_cap():
    spec = ServiceDistSpec(
        "quantized-lognormal", mu=np.log(30.0), sigma=0.6, delta=0.5, max_size=75.0
    )
    assert spec.s_max == 150
    rng = RandomSource(10)
    draws = [sample_service_time(spec, rng) for _ in range(20_000)]
    assert max(draws) <= 150 and min(draws) >= 1


def test_binomial_zero_clamped():
    spec = ServiceDistSpec("binomial", n=10, p=0.1)
    rng = RandomSource(11)
    draws = [sample_service_time(spec, rng) for _ in range(20_000)]
    assert min(draws) >= 1
    pmf = spec.pmf()
    # the zero-draw mass folds into one quantum
    expected_p1 = stats.binom.pmf(0, 10, 0.1) + stats.binom.pmf(1, 10, 0.1)
    assert pmf[0] == pytest.approx(expected_p1, abs=1e-12)


def test_pmf_sums_to_one():
    for spec in (
        ServiceDistSpec("binomial", n=10, p=0.5),
        ServiceDistSpec("poisson", lam=5.0),
        ServiceDistSpec("geometric", q=0.5),
        ServiceDistSpec("quantized-uniform", lo=0.0, hi=10.0, delta=0.1),
        ServiceDistSpec("quantized-lognormal", mu=np.log(30), sigma=0.6, delta=0.5, max_size=75),
    ):
        assert spec.pmf().sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# serving
# ---------------------------------------------------------------------------


def test_serve_step_completes_at_service_time():
    env = JobBatchEnv([ServiceDistSpec("geometric", q=0.5)])
    rng = RandomSource(1)
    env.reset(rng)
    env.service_times[:] = 1
    done, r = serve_step(env, 0, rng)
    assert (done, r) == (True, 1.0)
    with pytest.raises(ValueError):
        serve_step(env, 0, rng)


def test_serve_step_certain_hazard():
    env = JobBatchEnv([HazardSpec("constant", 1.0)], num_states=10)
    rng = RandomSource(2)
    env.reset(rng)
    done, r = serve_step(env, 0, rng)
    assert (done, r) == (True, 1.0)


def test_constant_hazard_mean_completion_time():
    env = JobBatchEnv([HazardSpec("constant", 0.5)], num_states=50)
    rng = RandomSource(3)
    times = []
    for _ in range(100_000):
        env.reset(rng)
        t = 0
        while not env.done[0]:
            t += 1
            serve_step(env, 0, rng)
        times.append(t)
    assert abs(np.mean(times) - 2.0) < 0.05


def test_hazard_matches_geometric_distribution():
    # constant hazard rho produces geometric(rho) service times
    rho = 0.4
    env = JobBatchEnv([HazardSpec("constant", rho)], num_states=50)
    rng = RandomSource(4)
    n = 100_000
    times = np.zeros(n, dtype=np.int64)
    for i in range(n):
        env.reset(rng)
        t = 0
        while not env.done[0]:
            t += 1
            serve_step(env, 0, rng)
        times[i] = t
    counts = np.bincount(times, minlength=12)[1:11]
    expect = n * rho * (1 - rho) ** np.arange(10)
    chi2 = float(((counts - expect) ** 2 / expect).sum())
    # 10 bins: stay below the 0.999 quantile of chi-square(9)
    assert chi2 < stats.chi2.ppf(0.999, 9)


def test_age_cap_completes():
    env = JobBatchEnv([HazardSpec("constant", 0.0001)], num_states=3)
    rng = RandomSource(5)
    env.reset(rng)
    for _ in range(3):
        if env.done[0]:
            break
        serve_step(env, 0, rng)
    assert env.done[0]  # the cap forces completion by the third quantum


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------


def make_two_job_env(times):
    env = JobBatchEnv([ServiceDistSpec("geometric", q=0.5)] * len(times))
    env.reset(RandomSource(0))
    env.service_times[:] = times
    return env


def test_run_episode_single_job():
    env = JobBatchEnv([ServiceDistSpec("geometric", q=0.5)])
    env.reset(RandomSource(1))
    env.service_times[:] = [4]
    trace = run_episode(env, fixed_policy([1.0]), 0.0, RandomSource(2))
    assert trace.flowtime == trace.completion_times[0] == 4


def test_run_episode_short_first_flowtime():
    env = make_two_job_env([1, 3])
    trace = run_episode(env, fixed_policy([2.0, 1.0]), 0.0, RandomSource(3))
    assert trace.flowtime == 5.0
    env = make_two_job_env([1, 3])
    trace = run_episode(env, fixed_policy([1.0, 2.0]), 0.0, RandomSource(3))
    assert trace.flowtime == 7.0


def test_flowtime_identity_and_conservation():
    rng = RandomSource(6)
    env = JobBatchEnv([ServiceDistSpec("poisson", lam=5.0)] * 4)
    policy = fixed_policy([1.0, 1.0, 1.0, 1.0])
    for _ in range(50):
        env.reset(rng)
        trace = run_episode(env, policy, 0.3, rng)
        assert trace.completion_times.sum() == trace.unfinished_counts.sum()
        assert trace.completed.sum() == 4  # every job completes exactly once
        assert len(trace.served) == env.service_times.sum()


def test_ages_increase_by_one_per_serve():
    env = JobBatchEnv([HazardSpec("constant", 0.2)] * 2, num_states=50)
    rng = RandomSource(7)
    env.reset(rng)
    before = env.ages.copy()
    done, _ = serve_step(env, 1, rng)
    after = env.ages.copy()
    assert after[0] == before[0]
    assert after[1] in (before[1], before[1] + 1)  # +1 unless completed


# ---------------------------------------------------------------------------
# exact policy shapes
# ---------------------------------------------------------------------------


def test_oracle_constant_hazard_index_flat_across_ages():
    env = JobBatchEnv([HazardSpec("constant", 0.5)], num_states=50)
    idx = oracle_index_table(env, 0.9)
    g = idx.tables[0]
    assert np.max(np.abs(g[:30] - g[0])) < 1e-6
    assert g[0] == pytest.approx(0.5, abs=1e-5)


def test_oracle_serves_higher_hazard_first():
    env = JobBatchEnv(
        [HazardSpec("constant", 0.9), HazardSpec("constant", 0.1)], num_states=50
    )
    idx = oracle_index_table(env, 0.9)
    rng = RandomSource(8)
    for _ in range(50):
        env.reset(rng)
        trace = run_episode(env, idx, 0.0, rng)
        assert trace.first_service_order[0] == 0


def test_oracle_increasing_hazard_runs_to_completion():
    rng = RandomSource(9)
    rho = rng.rng.uniform(0.0, 1.0, 5)
    env = JobBatchEnv([HazardSpec("increasing", float(r), 0.8) for r in rho], num_states=50)
    idx = oracle_index_table(env, 0.9)
    for _ in range(100):
        env.reset(rng)
        trace = run_episode(env, idx, 0.0, rng)
        assert trace.run_to_completion()


def test_oracle_decreasing_hazard_rotates_more_than_fifo():
    # the decreasing-hazard policy interleaves service (round-robin-like),
    # unlike the increasing-hazard one; its boundary jump at the second
    # quantum keeps the exact policy from a strict one-quantum rotation
    rng = RandomSource(10)
    env = JobBatchEnv([HazardSpec("decreasing", 0.05, 0.8)] * 5, num_states=50)
    idx = oracle_index_table(env, 0.9)
    fracs, rtc = [], []
    for _ in range(60):
        env.reset(rng)
        trace = run_episode(env, idx, 0.0, rng)
        fracs.append(trace.spread_ok_fraction())
        rtc.append(trace.run_to_completion())
    assert np.mean(fracs) > 0.5
    assert np.mean(rtc) < 0.2


def test_job_arm_model_rows_and_rewards():
    env = JobBatchEnv([HazardSpec("increasing", 0.5, 0.8)], num_states=4)
    arm = job_arm_model(env, 0)
    assert arm.num_states == 5
    assert arm.reward[0] == pytest.approx(0.5)
    assert arm.reward[-1] == 0.0
    assert arm.transition[3, 4] == pytest.approx(1.0)  # cap completes
    assert np.allclose(arm.transition.sum(axis=1), 1.0)


def test_episodic_regret_values():
    assert episodic_regret(7.0, 5.0) == 2.0
    # identical policies: mean regret vanishes over many episodes
    env = JobBatchEnv([HazardSpec("constant", 0.6)] * 3, num_states=50)
    idx = oracle_index_table(env, 0.9)
    rng = RandomSource(11)
    base = oracle_flowtime(env, 0.9, 4000, rng, idx)
    regrets = []
    for _ in range(4000):
        env.reset(rng)
        trace = run_episode(env, idx, 0.0, rng)
        regrets.append(episodic_regret(trace.flowtime, base))
    assert abs(np.mean(regrets)) < 0.15


def test_poisson_regret_curve_flattens():
    env = JobBatchEnv([ServiceDistSpec("poisson", lam=5.0)] * 4)
    sch = ConstantRateSchedule(alpha_value=0.6, beta_value=0.3, phi=2)
    eps = EpsilonSchedule(initial=1.0, decay=0.9995)
    st, log = train_scheduling(
        env, "qgi", sch, eps, episodes=2500, gamma=0.99, seed=3, oracle_trials=3000
    )
    early = log.regret[:500].mean()
    late = log.regret[-500:].mean()
    assert late < early


def test_train_scheduling_deterministic():
    env_a = JobBatchEnv([ServiceDistSpec("geometric", q=0.5)] * 3)
    env_b = JobBatchEnv([ServiceDistSpec("geometric", q=0.5)] * 3)
    sch = ConstantRateSchedule(alpha_value=0.5, beta_value=0.3, phi=2)
    eps = EpsilonSchedule(initial=1.0, decay=0.999)
    _, log_a = train_scheduling(env_a, "qgi", sch, eps, 50, 0.99, seed=12, oracle_trials=50)
    _, log_b = train_scheduling(env_b, "qgi", sch, eps, 50, 0.99, seed=12, oracle_trials=50)
    assert np.array_equal(log_a.flowtime, log_b.flowtime)
    assert np.array_equal(log_a.indices, log_b.indices)
