"""Backward recursion over environments producing feasibility and target tensors.

For each goal the recursion propagates, from the last environment to the
first, the maximum probability of certifying the goal before its deadline:
either reach the goal within the current period's goal slice, or reach an
intermediate target by the period's end and continue from there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reach import ReachabilityTensor
from .world import EnvironmentSchedule, GoalSet

NO_TARGET = -1


@dataclass
class FeasibilitySolution:
    """kappa[c, k, i] in [0, 1] and selected targets[c, k, i] (NO_TARGET where 0)."""

    kappa: np.ndarray    # (C, K, N)
    targets: np.ndarray  # (C, K, N) int

    def feasibility_map(self, c: int, k: int) -> np.ndarray:
        """The kappa slice for one (goal, environment), for rendering/export."""
        return self.kappa[c, k].copy()


def backward_recursion(R: ReachabilityTensor, schedule: EnvironmentSchedule,
                       goals: GoalSet) -> FeasibilitySolution:
    """Solve the reachability recursion with zero feasibility past the horizon.

    Candidate targets range over the non-obstacle states of each
    environment; argmax ties break toward the lowest state index.
    """
    K = schedule.n_envs
    C = len(goals)
    n = R.det.shape[1]
    kappa = np.zeros((C, K, n))
    targets = np.full((C, K, n), NO_TARGET, dtype=np.int64)

    for c, goal in enumerate(goals):
        g = goal.state
        kappa_next = np.zeros(n)  # boundary: nothing achievable after the horizon
        for k in range(K - 1, -1, -1):
            B = schedule.obstacles[k]
            candidates = [j for j in range(n) if j not in B]
            period_end_rel = schedule.start(k + 1) - schedule.start(k)
            scores = np.empty((n, len(candidates)))
            for col, j in enumerate(candidates):
                if j == g:
                    scores[:, col] = R.goal_slice(k, c)
                else:
                    scores[:, col] = R.det_column(k, j, period_end_rel) * kappa_next[j]
            best = scores.argmax(axis=1)
            kappa[c, k] = scores[np.arange(n), best]
            kappa[c, k, sorted(B)] = 0.0  # a plan can never start on an obstacle
            chosen = np.asarray(candidates, dtype=np.int64)[best]
            chosen[kappa[c, k] == 0.0] = NO_TARGET
            targets[c, k] = chosen
            kappa_next = kappa[c, k]
    return FeasibilitySolution(kappa=kappa, targets=targets)


def feasibility_map(sol: FeasibilitySolution, c: int, k: int) -> np.ndarray:
    return sol.feasibility_map(c, k)
