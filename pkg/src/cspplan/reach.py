"""Reachability: Pr(arrival before deadline) and the reachability tensor.

``reach`` is the single primitive everything downstream anchors on: it
pairs a slice's arrival CDF with a deadline distribution evaluated from an
arbitrary start time.  The tensor tabulates deterministic horizons (shared
by every deadline via relative-time lookup) plus one slice per goal
deadline anchored at each environment's start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrival import ArrivalModel, ArrivalModels
from .world import DeadlineDistribution, EnvironmentSchedule, GoalSet


def reach(model: ArrivalModel, i: int, start_time: int,
          deadline: DeadlineDistribution, mode: str = "exact",
          inclusive: bool = False) -> float:
    """Probability of arriving at the model's target before the deadline.

    Each support point D contributes p * F(D - start_time); points at or
    before the start contribute nothing (with ``inclusive``, a point exactly
    at the start still admits a zero-step arrival).
    """
    total = 0.0
    for t_abs, p in deadline.points():
        rel = t_abs - start_time
        admissible = rel >= 0 if inclusive else rel > 0
        if admissible:
            total += p * model.cdf(i, rel, mode)
    return total


def reach_column(model: ArrivalModel, start_time: int,
                 deadline: DeadlineDistribution, mode: str = "exact",
                 inclusive: bool = False) -> np.ndarray:
    """Vectorized ``reach`` over every start state."""
    n = model.t_mu.size
    total = np.zeros(n)
    for t_abs, p in deadline.points():
        rel = t_abs - start_time
        admissible = rel >= 0 if inclusive else rel > 0
        if admissible:
            total += p * model.cdf_column(rel, mode)
    return total


@dataclass
class ReachabilityTensor:
    """det[k, i, j, t] = F_{A_{i,j}^k}(t); goal[k, c, i] = r_{i,g_c}^{k,Omega_c}."""

    det: np.ndarray   # (K, N, N, T+1); zero where target j is an obstacle of env k
    goal: np.ndarray  # (K, C, N)
    horizon: int

    def det_slice(self, k: int, t: int) -> np.ndarray:
        return self.det[k, :, :, min(t, self.horizon)]

    def det_column(self, k: int, j: int, t: int) -> np.ndarray:
        return self.det[k, :, j, min(t, self.horizon)]

    def goal_slice(self, k: int, c: int) -> np.ndarray:
        return self.goal[k, c]


def build_tensor(models: ArrivalModels, schedule: EnvironmentSchedule,
                 goals: GoalSet, mode: str = "exact",
                 inclusive: bool = False) -> ReachabilityTensor:
    """Tabulate deterministic-horizon and goal-deadline reachability."""
    K = schedule.n_envs
    T = schedule.horizon
    some_model = next(iter(models.models.values()))
    n = some_model.t_mu.size

    det = np.zeros((K, n, n, T + 1))
    seen_sets = {}
    for k in range(K):
        s = models.env_to_set[k]
        if s in seen_sets:
            det[k] = det[seen_sets[s]]
            continue
        seen_sets[s] = k
        for j in range(n):
            if not models.has(k, j):
                continue
            m = models.get(k, j)
            if mode == "exact":
                det[k, :, j, :] = m.exact
            else:
                for t in range(T + 1):
                    det[k, :, j, t] = m.cdf_column(t, mode)

    goal = np.zeros((K, len(goals), n))
    for k in range(K):
        d_k = schedule.start(k)
        for c, g in enumerate(goals):
            goal[k, c] = reach_column(
                models.get(k, g.state), d_k, g.deadline, mode, inclusive
            )
    return ReachabilityTensor(det=det, goal=goal, horizon=T)
