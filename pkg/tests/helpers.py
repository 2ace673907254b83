"""Shared scenario builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from cspplan.world import (DeadlineDistribution, EnvironmentSchedule, Goal,
                           GoalSet, Grid, Scenario)


def corridor(n: int) -> Grid:
    return Grid(width=n, height=1)


def schedule(obstacle_sets, starts, horizon) -> EnvironmentSchedule:
    return EnvironmentSchedule(
        obstacles=tuple(frozenset(B) for B in obstacle_sets),
        starts=tuple(starts),
        horizon=horizon,
    )


def det(t: int) -> DeadlineDistribution:
    return DeadlineDistribution.deterministic(t)


def goal_set(*entries) -> GoalSet:
    return GoalSet(tuple(Goal(label, state, deadline) for label, state, deadline in entries))


def right_chain(n: int) -> np.ndarray:
    """Deterministic chain moving right one cell per step, absorbing at the end."""
    u = np.zeros((n, n))
    for i in range(n - 1):
        u[i, i + 1] = 1.0
    u[n - 1, n - 1] = 1.0
    return u


def simulate_chain_hits(u: np.ndarray, start: int, target: int, horizon: int,
                        episodes: int, seed: int = 0) -> np.ndarray:
    """Vectorized Monte Carlo of a single slice: hitting times (inf if never).

    Independent of the analytic machinery: raw categorical sampling of u.
    """
    rng = np.random.default_rng(seed)
    cum = np.cumsum(u, axis=1)
    states = np.full(episodes, start)
    hit_time = np.full(episodes, np.inf)
    hit_time[states == target] = 0.0
    for t in range(1, horizon + 1):
        live = hit_time == np.inf
        if not live.any():
            break
        draws = rng.random(live.sum())
        rows = cum[states[live]]
        nxt = (rows < draws[:, None]).sum(axis=1)
        states[live] = nxt
        arrived = live.copy()
        arrived[live] = nxt == target
        hit_time[arrived] = t
    return hit_time


def clamped_fixed_point_oracle(P: np.ndarray, epsilon: float, target: int,
                               obstacles=frozenset()) -> np.ndarray:
    """Independent desirability solve via a direct linear system.

    Rows: z[target] = 1, z[obstacle] = 0, otherwise z_i - eps * (P z)_i = 0.
    """
    n = P.shape[0]
    A = np.eye(n) - epsilon * P
    b = np.zeros(n)
    A[target] = 0.0
    A[target, target] = 1.0
    b[target] = 1.0
    for s in obstacles:
        A[s] = 0.0
        A[s, s] = 1.0
    return np.linalg.solve(A, b)


def two_env_corridor_scenario(task: str = "G1") -> Scenario:
    """1x7 corridor: a wall at cell 3 opens at t=20; goal at the far end."""
    return Scenario(
        grid=corridor(7),
        schedule=schedule([[3], []], [0, 20], 30),
        goals=goal_set(("G1", 6, det(25))),
        task=task,
        start_state=0,
    ).validate()


def two_goal_corridor_scenario() -> Scenario:
    """1x7 corridor with an intermediate goal before the wall opens."""
    return Scenario(
        grid=corridor(7),
        schedule=schedule([[3], []], [0, 12], 40),
        goals=goal_set(("G1", 2, det(10)), ("G2", 6, det(17))),
        task="G1 > G2",
        start_state=0,
    ).validate()
