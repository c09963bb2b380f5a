"""Preset bandit instances used across experiments and tests."""

from __future__ import annotations

import numpy as np

from .core import ArmModel, BanditInstance, RandomSource

__all__ = [
    "toy_arm",
    "toy_instance",
    "dirichlet_arm",
    "dirichlet_instance",
    "elementary_two_arm_instance",
]

TOY_GAMMA = 0.9

_TOY_TRANSITION = np.array(
    [
        [0.3, 0.7, 0.0, 0.0, 0.0],
        [0.3, 0.0, 0.7, 0.0, 0.0],
        [0.3, 0.0, 0.0, 0.7, 0.0],
        [0.3, 0.0, 0.0, 0.0, 0.7],
        [0.3, 0.0, 0.0, 0.0, 0.7],
    ]
)


def toy_arm():
    """Five-state chain with geometrically decaying rewards r(s) = 0.9^(s+1)."""
    rewards = 0.9 ** (np.arange(5) + 1)
    return ArmModel(_TOY_TRANSITION, rewards)


def toy_instance(num_arms=5, gamma=TOY_GAMMA):
    arm = toy_arm()
    return BanditInstance([arm] * num_arms, gamma=gamma, homogeneous=True)


def dirichlet_arm(num_states=50, seed=0, concentration=1.0):
    """Random chain with Dirichlet rows and rewards r(s) = 5 + (s+1)/10."""
    rng = RandomSource(seed).rng
    p = rng.dirichlet(np.full(num_states, concentration), size=num_states)
    p = p / p.sum(axis=1, keepdims=True)
    rewards = 5.0 + (np.arange(num_states) + 1) / 10.0
    return ArmModel(p, rewards)


def dirichlet_instance(num_arms=5, num_states=50, gamma=0.9, seed=0):
    arm = dirichlet_arm(num_states=num_states, seed=seed)
    return BanditInstance([arm] * num_arms, gamma=gamma, homogeneous=True)


def elementary_two_arm_instance(gamma=0.9):
    """Two heterogeneous two-state arms sharing the reward vector (1, 10)."""
    rewards = np.array([1.0, 10.0])
    arm0 = ArmModel([[0.3, 0.7], [0.7, 0.3]], rewards)
    arm1 = ArmModel([[0.9, 0.1], [0.1, 0.9]], rewards)
    return BanditInstance([arm0, arm1], gamma=gamma, homogeneous=False)
