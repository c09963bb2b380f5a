"""Exact Gittins indices from a known arm via the retirement formulation.

For a single arm augmented with a retire action paying a terminal reward M,
the value function V_r(x, M) is the fixed point of

    V(x) = max( r(x) + gamma * sum_j P(j|x) V(j),  M )

V_r is bounded, convex and non-decreasing in M, and V_r(x, M) - M is
non-increasing in M, so the smallest M with V_r(x, M) = M can be found by
bisection.  The index of state x is (1 - gamma) times that smallest M.
These values are the ground truth every learner is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RetirementSolution",
    "retirement_value",
    "gittins_exact",
    "reference_value_star",
]

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class RetirementSolution:
    """Per-state retirement fixed points M_star and indices G_star = (1-gamma)*M_star."""

    M_star: np.ndarray
    G_star: np.ndarray
    gamma: float
    tolerance: float

    def __post_init__(self):
        self.M_star.setflags(write=False)
        self.G_star.setflags(write=False)


def _value_iteration(transition, reward, m_values, gamma, tol):
    """Fixed point of the retirement Bellman operator, one column per M.

    Returns V of shape (num_states, len(m_values)).  Iterates from zero until
    the sup-norm change drops below tol*(1-gamma)/gamma, which bounds the
    true sup-norm error by tol.
    """
    m = np.atleast_1d(np.asarray(m_values, dtype=np.float64))
    n = transition.shape[0]
    v = np.zeros((n, m.size))
    threshold = tol * (1.0 - gamma) / gamma
    r = reward[:, None]
    while True:
        cont = r + gamma * (transition @ v)
        v_new = np.maximum(cont, m[None, :])
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < threshold:
            return v


def retirement_value(arm, M, gamma, tol=DEFAULT_TOL):
    """Value of each state when a terminal reward M is available at any time.

    The result dominates M everywhere, within the numerical tolerance.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    v = _value_iteration(arm.transition, arm.reward, [float(M)], gamma, tol)
    return v[:, 0]


def gittins_exact(arm, gamma, tol=DEFAULT_TOL):
    """Per-state indices by bisection on the retirement reward.

    For each state the bracket starts at [r_min, r_max]/(1-gamma): below the
    lower end retiring is never optimal, above the upper end it always is.
    All states' midpoints are evaluated in one vectorised value-iteration
    sweep per bisection round.  The bracket halves until its width drops
    below tol; the returned M_star is the midpoint of the final bracket.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    n = arm.num_states
    r_min = float(arm.reward.min())
    r_max = float(arm.reward.max())
    lo = np.full(n, r_min / (1.0 - gamma))
    hi = np.full(n, r_max / (1.0 - gamma))
    diag = np.arange(n)
    while np.max(hi - lo) >= tol:
        mid = 0.5 * (lo + hi)
        v = _value_iteration(arm.transition, arm.reward, mid, gamma, tol)
        retired = v[diag, diag] - mid < tol
        hi = np.where(retired, mid, hi)
        lo = np.where(retired, lo, mid)
    m_star = 0.5 * (lo + hi)
    return RetirementSolution(
        M_star=m_star, G_star=(1.0 - gamma) * m_star, gamma=float(gamma), tolerance=float(tol)
    )


def reference_value_star(solution):
    """Optimal per-reference-state value V*(s), the target for error metrics.

    This is M_star(s): simultaneously the retirement fixed point at s and the
    restart-formulation value of s under its own reference, so every
    learner's diagonal estimate converges to it.
    """
    return solution.M_star.copy()
