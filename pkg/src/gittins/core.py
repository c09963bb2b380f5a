"""Bandit arms, the rested multi-armed environment, and shared schedules.

An arm is a Markov chain that only moves when pulled; a bandit instance is a
set of such arms of which exactly one is pulled per step while the others
stay frozen.  This module also owns the learning-rate and exploration
schedules used by every learner, and a validator for the two-timescale
condition (the index rate must vanish relative to the Q rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArmModel",
    "BanditInstance",
    "RandomSource",
    "LearningRateSchedule",
    "ConstantRateSchedule",
    "MixedRateSchedule",
    "RateFunctions",
    "EpsilonSchedule",
    "TwoTimescaleReport",
    "step_arm",
    "alpha_at",
    "beta_at",
    "epsilon_greedy_select",
    "validate_two_timescale",
]

_ROW_SUM_TOL = 1e-12


class ArmModel:
    """One arm: a row-stochastic transition matrix plus a per-state reward.

    Pulling the arm in state ``s`` earns ``reward[s]`` and moves the arm to a
    state drawn from ``transition[s]``.  The matrix is validated once here and
    never mutated afterwards.
    """

    def __init__(self, transition, reward):
        p = np.asarray(transition, dtype=np.float64)
        r = np.asarray(reward, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"transition must be a square matrix, got shape {p.shape}")
        n = p.shape[0]
        if r.shape != (n,):
            raise ValueError(f"reward must have length {n}, got shape {r.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("transition entries must lie in [0, 1]")
        row_sums = p.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(row_sums - 1.0)))
            raise ValueError(f"transition row {bad} sums to {row_sums[bad]!r}, not 1")
        if not np.all(np.isfinite(r)):
            raise ValueError("reward entries must be finite")
        self.num_states = n
        self.transition = p
        self.transition.setflags(write=False)
        self.reward = r
        self.reward.setflags(write=False)
        # Cumulative rows for inverse-CDF sampling; the last entry is pinned
        # to 1 so a uniform draw in [0, 1) can never fall off the end.
        cum = np.cumsum(p, axis=1)
        cum[:, -1] = 1.0
        self._cum_rows = cum
        self._cum_rows.setflags(write=False)

    def __repr__(self):
        return f"ArmModel(num_states={self.num_states})"


class BanditInstance:
    """A rested bandit: K arms, a discount factor, and the current states.

    If ``homogeneous`` all entries of ``arms`` must reference one shared
    ArmModel, and learners keep a single table for them.  Passive arms never
    change state.
    """

    def __init__(self, arms, gamma, homogeneous=None, initial_states=None):
        if not arms:
            raise ValueError("need at least one arm")
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        if homogeneous is None:
            homogeneous = all(a is arms[0] for a in arms)
        if homogeneous and not all(a is arms[0] for a in arms):
            raise ValueError("homogeneous instance requires one shared ArmModel")
        self.arms = list(arms)
        self.gamma = float(gamma)
        self.homogeneous = bool(homogeneous)
        if initial_states is None:
            initial_states = [0] * len(arms)
        states = np.asarray(initial_states, dtype=np.int64)
        if states.shape != (len(arms),):
            raise ValueError("initial_states must have one entry per arm")
        for i, s in enumerate(states):
            if not 0 <= s < self.arms[i].num_states:
                raise ValueError(f"initial state {s} out of range for arm {i}")
        self.current_states = states

    @property
    def num_arms(self):
        return len(self.arms)

    def reset(self, states=None):
        if states is None:
            states = [0] * self.num_arms
        self.current_states = np.asarray(states, dtype=np.int64).copy()


class RandomSource:
    """Seeded PCG64 stream with a deterministic child-derivation rule.

    Children are derived from (seed, spawn key path) via numpy's
    SeedSequence, so independent substreams for parallel runs or distinct
    purposes (action draws, environment draws) are reproducible from the
    root seed alone.
    """

    def __init__(self, seed, _spawn_key=()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in _spawn_key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self.rng = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, key):
        """Derived independent stream; same (seed, key) always gives the same stream."""
        return RandomSource(self.seed, self.spawn_key + (int(key),))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"


def step_arm(instance, arm, rng):
    """Pull one arm: return (next_state, reward) and advance only that arm.

    The reward is the pulled arm's reward at its pre-transition state.
    Consumes exactly one uniform draw.
    """
    if not 0 <= arm < instance.num_arms:
        raise ValueError(f"arm index {arm} out of range for {instance.num_arms} arms")
    model = instance.arms[arm]
    s = int(instance.current_states[arm])
    u = rng.rng.random()
    nxt = int(np.searchsorted(model._cum_rows[s], u, side="right"))
    instance.current_states[arm] = nxt
    return nxt, float(model.reward[s])


# ---------------------------------------------------------------------------
# Learning-rate schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step-decayed rates: alpha(n) = x/ceil(n/theta) and
    beta(n) = y/(1 + ceil(n*log(n)/kappa)) applied only when phi divides n.

    ``log_base`` defaults to the natural log; a different base can be set to
    reproduce runs under the base-10 reading.  ``y = 0`` is allowed and
    disables index updates entirely (useful for sensitivity grids).
    """

    x: float
    y: float
    theta: int
    kappa: int
    phi: int
    log_base: float = math.e

    def __post_init__(self):
        if not 0.0 < self.x <= 1.0:
            raise ValueError(f"x must lie in (0, 1], got {self.x}")
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"y must lie in [0, 1], got {self.y}")
        for name in ("theta", "kappa", "phi"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.log_base <= 1.0:
            raise ValueError("log_base must exceed 1")

    def alpha(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        return self.x / math.ceil(n / self.theta)

    def beta(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        if n % self.phi != 0:
            return 0.0
        return self._beta_ungated(n)

    def _beta_ungated(self, n):
        logn = math.log(n) / math.log(self.log_base)
        return self.y / (1.0 + math.ceil(n * logn / self.kappa))

    # Vectorised forms used by the validator and batched trainers.
    def alpha_array(self, n):
        n = np.asarray(n, dtype=np.float64)
        return self.x / np.ceil(n / self.theta)

    def beta_ungated_array(self, n):
        n = np.asarray(n, dtype=np.float64)
        logn = np.log(n) / math.log(self.log_base)
        return self.y / (1.0 + np.ceil(n * logn / self.kappa))

    def nominal_ratio(self):
        """Ungated beta(1)/alpha(1); the ratio's scale before any decay."""
        a1 = self.alpha(1)
        return self._beta_ungated(1) / a1


@dataclass(frozen=True)
class ConstantRateSchedule:
    """Fixed alpha with a fixed beta applied every phi-th step.

    The scheduling experiments are tuned with constant rates, which do not
    fit the step-decayed family above.
    """

    alpha_value: float
    beta_value: float = 0.0
    phi: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha_value <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha_value}")
        if not 0.0 <= self.beta_value <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta_value}")
        if self.phi < 1:
            raise ValueError("phi must be a positive integer")

    def alpha(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        return self.alpha_value

    def beta(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        return self.beta_value if n % self.phi == 0 else 0.0

    def alpha_array(self, n):
        return np.full(np.shape(n), self.alpha_value)

    def beta_ungated_array(self, n):
        return np.full(np.shape(n), self.beta_value)

    def nominal_ratio(self):
        return self.beta_value / self.alpha_value


@dataclass(frozen=True)
class MixedRateSchedule:
    """Step-decayed alpha with a fixed beta applied every phi-th step."""

    x: float
    theta: int
    beta_value: float = 0.0
    phi: int = 1

    def __post_init__(self):
        if not 0.0 < self.x <= 1.0:
            raise ValueError(f"x must lie in (0, 1], got {self.x}")
        if not 0.0 <= self.beta_value <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta_value}")
        if self.theta < 1 or self.phi < 1:
            raise ValueError("theta and phi must be positive integers")

    def alpha(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        return self.x / math.ceil(n / self.theta)

    def beta(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        return self.beta_value if n % self.phi == 0 else 0.0

    def alpha_array(self, n):
        n = np.asarray(n, dtype=np.float64)
        return self.x / np.ceil(n / self.theta)

    def beta_ungated_array(self, n):
        return np.full(np.shape(n), self.beta_value)

    def nominal_ratio(self):
        return self.beta_value / self.x


class RateFunctions:
    """Adapter wrapping arbitrary alpha(n), beta(n) callables for validation.

    The callables must accept numpy arrays.  ``phi`` marks the period on
    which beta is active (1 means every step).
    """

    def __init__(self, alpha_fn, beta_fn, phi=1):
        self._alpha_fn = alpha_fn
        self._beta_fn = beta_fn
        self.phi = int(phi)

    def alpha(self, n):
        return float(self._alpha_fn(np.asarray(float(n))))

    def beta(self, n):
        if n % self.phi != 0:
            return 0.0
        return float(self._beta_fn(np.asarray(float(n))))

    def alpha_array(self, n):
        return np.asarray(self._alpha_fn(np.asarray(n, dtype=np.float64)))

    def beta_ungated_array(self, n):
        return np.asarray(self._beta_fn(np.asarray(n, dtype=np.float64)))

    def nominal_ratio(self):
        return float(self.beta_ungated_array(np.array(1.0)) / self.alpha_array(np.array(1.0)))


def alpha_at(schedule, n):
    """Q-value learning rate at step n (n >= 1)."""
    return schedule.alpha(n)


def beta_at(schedule, n):
    """Index learning rate at step n; zero off the active-step grid."""
    return schedule.beta(n)


@dataclass
class EpsilonSchedule:
    """Multiplicative exploration decay: eps(n) = max(floor, initial*decay^(n-1)).

    The counter n is the global environment step, starting at 1.
    """

    initial: float
    decay: float = 1.0
    floor: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.initial <= 1.0:
            raise ValueError("initial must lie in [0, 1]")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if not 0.0 <= self.floor <= 1.0:
            raise ValueError("floor must lie in [0, 1]")

    def value(self, n):
        if n < 1:
            raise ValueError(f"step counter must be >= 1, got {n}")
        if self.decay == 1.0:
            return max(self.floor, self.initial)
        return max(self.floor, self.initial * self.decay ** (n - 1))


def epsilon_greedy_select(indices, available, epsilon, rng):
    """Pick an arm: explore uniformly with probability epsilon, else take an
    index maximiser; ties break uniformly at random.

    Consumes exactly two uniform draws per call (explore decision, then the
    position inside the chosen candidate set), so traces are reproducible
    regardless of how many arms tie.
    """
    indices = np.asarray(indices, dtype=np.float64)
    avail = np.flatnonzero(np.asarray(available, dtype=bool))
    if avail.size == 0:
        raise ValueError("no available arms to select from")
    u_explore = rng.rng.random()
    u_pick = rng.rng.random()
    if u_explore < epsilon:
        candidates = avail
    else:
        vals = indices[avail]
        candidates = avail[vals == vals.max()]
    return int(candidates[int(u_pick * candidates.size)])


# ---------------------------------------------------------------------------
# Two-timescale validation
# ---------------------------------------------------------------------------


@dataclass
class TwoTimescaleReport:
    """Outcome of the separation check between the Q rate and index rate."""

    passed: bool
    monotone_ok: bool
    decay_ok: bool
    bounded_ok: bool
    ratio_initial: float
    ratio_final: float
    horizon: int
    block_means: list = field(default_factory=list)


def validate_two_timescale(schedule, horizon):
    """Check that the index rate vanishes relative to the Q rate.

    Three requirements over the sampled horizon, any failure flags the
    schedule: (a) block means of beta/alpha over the tail of the active-step
    grid are non-increasing, (b) the final ratio falls below one tenth of the
    schedule's nominal initial ratio (the ungated ratio at n = 1), and
    (c) both rates stay positive and bounded by 1.
    """
    horizon = int(horizon)
    if horizon < 10_000:
        raise ValueError(f"horizon must be at least 10000, got {horizon}")
    phi = getattr(schedule, "phi", 1)
    steps = np.arange(phi, horizon + 1, phi, dtype=np.float64)
    if steps.size > 200_000:
        stride = int(np.ceil(steps.size / 200_000))
        steps = steps[::stride]
    alpha = schedule.alpha_array(steps)
    beta = schedule.beta_ungated_array(steps)

    bounded_ok = bool(
        np.all(alpha > 0.0) and np.all(alpha <= 1.0) and np.all(beta > 0.0) and np.all(beta <= 1.0)
    )
    ratio_initial = float(schedule.nominal_ratio())
    if not bounded_ok or ratio_initial <= 0.0:
        return TwoTimescaleReport(False, False, False, bounded_ok, ratio_initial, math.nan, horizon)

    ratio = beta / alpha
    ratio_final = float(ratio[-1])
    decay_ok = ratio_final < 0.1 * ratio_initial

    # The raw ratio is sawtoothed by the ceiling terms, so monotonicity is
    # judged on block means over the tail rather than pointwise.
    tail = ratio[steps >= horizon / 10]
    if tail.size < 20:
        tail = ratio
    n_blocks = min(10, tail.size)
    blocks = np.array_split(tail, n_blocks)
    means = [float(b.mean()) for b in blocks]
    monotone_ok = all(means[i + 1] <= means[i] * 1.05 + 1e-15 for i in range(len(means) - 1))

    passed = monotone_ok and decay_ok and bounded_ok
    return TwoTimescaleReport(
        passed, monotone_ok, decay_ok, bounded_ok, ratio_initial, ratio_final, horizon, means
    )
