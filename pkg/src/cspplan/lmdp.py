"""Linearly solvable MDP solves and the stationary policy ensemble.

Each (obstacle set, target state) pair defines a shortest-path control
problem: a diagonal cost matrix Q with zero desirability on obstacles, one
on the target and epsilon elsewhere, solved as the clamped fixed point
z = QPz.  The controlled dynamics rescale the passive dynamics by z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import EnvironmentSchedule, Grid, passive_dynamics


class NonConvergence(Exception):
    """The desirability fixed point did not meet its residual tolerance."""


def build_cost_matrix(n: int, target: int, obstacles=frozenset(), epsilon: float = 0.9) -> np.ndarray:
    """Diagonal desirability-weight matrix for one (obstacles, target) pair."""
    if target in obstacles:
        raise ValueError(f"target state {target} is an obstacle")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    q = np.full(n, epsilon)
    q[list(obstacles)] = 0.0
    q[target] = 1.0
    return np.diag(q)


@dataclass
class LmdpSolution:
    z: np.ndarray           # desirability, clamped to 1 at target / 0 on obstacles
    u: np.ndarray           # row-stochastic controlled dynamics, absorbing at target
    residual: float
    iterations: int
    unreachable: np.ndarray  # boolean mask of states with zero path desirability


def solve(Q: np.ndarray, P: np.ndarray, target: int,
          residual_tol: float = 1e-12, iter_cap: int | None = None) -> LmdpSolution:
    """First-exit desirability solve with the target clamped to z = 1.

    States whose every path to the target is blocked end up with z = 0;
    their policy rows become self-loops and they are flagged unreachable.
    """
    q = np.diag(Q).copy()
    n = q.size
    if iter_cap is None:
        iter_cap = 100 * n
    clamped = np.zeros(n, dtype=bool)
    clamped[target] = True
    clamped[q == 0.0] = True

    z = np.zeros(n)
    z[target] = 1.0
    residual = np.inf
    it = 0
    for it in range(1, iter_cap + 1):
        y = q * (P @ z)
        residual = float(np.max(np.abs(y[~clamped] - z[~clamped]), initial=0.0))
        y[target] = 1.0
        z = y
        if residual < residual_tol:
            break
    if residual >= residual_tol:
        raise NonConvergence(
            f"target {target}: residual {residual:.3e} after {it} iterations"
        )

    G = P @ z
    unreachable = G <= 0.0
    u = np.zeros_like(P)
    ok = ~unreachable
    u[ok] = P[ok] * z[np.newaxis, :] / G[ok, np.newaxis]
    idx = np.flatnonzero(unreachable)
    u[idx, idx] = 1.0
    u[target] = 0.0
    u[target, target] = 1.0
    unreachable[target] = False
    return LmdpSolution(z=z, u=u, residual=residual, iterations=it, unreachable=unreachable)


@dataclass
class PolicyEnsemble:
    """Controlled-dynamics slices for every (environment, valid target) pair.

    Identical obstacle sets share one set of slices: ``env_to_set`` maps an
    environment index to its row in ``unique_obstacles``, and slices are
    stored per (obstacle-set index, target).
    """

    grid: Grid
    epsilon: float
    unique_obstacles: tuple[frozenset, ...]
    env_to_set: tuple[int, ...]
    solutions: dict  # (set_idx, target) -> LmdpSolution

    @property
    def n_states(self) -> int:
        return self.grid.n_states

    @property
    def n_envs(self) -> int:
        return len(self.env_to_set)

    def set_index(self, k: int) -> int:
        return self.env_to_set[k]

    def valid_targets(self, k: int):
        B = self.unique_obstacles[self.env_to_set[k]]
        return [j for j in range(self.n_states) if j not in B]

    def slice(self, k: int, target: int) -> LmdpSolution:
        return self.solutions[(self.env_to_set[k], target)]


def canonical_obstacle_sets(schedule: EnvironmentSchedule):
    """Deduplicated obstacle sets in a schedule-order-independent order."""
    unique = sorted({B for B in schedule.obstacles}, key=lambda B: tuple(sorted(B)))
    env_to_set = tuple(unique.index(B) for B in schedule.obstacles)
    return tuple(unique), env_to_set


def build_ensemble(grid: Grid, schedule: EnvironmentSchedule, epsilon: float = 0.9,
                   residual_tol: float = 1e-12, iter_cap_factor: int = 100) -> PolicyEnsemble:
    """Solve one LMDP per (obstacle set, target) member of B x X."""
    n = grid.n_states
    unique, env_to_set = canonical_obstacle_sets(schedule)
    solutions = {}
    for s, B in enumerate(unique):
        P = passive_dynamics(grid, B)
        for j in range(n):
            if j in B:
                continue
            Q = build_cost_matrix(n, j, B, epsilon)
            try:
                solutions[(s, j)] = solve(
                    Q, P, j, residual_tol=residual_tol, iter_cap=iter_cap_factor * n
                )
            except NonConvergence as exc:
                raise NonConvergence(f"obstacle set {sorted(B)}, target {j}: {exc}") from exc
    return PolicyEnsemble(
        grid=grid,
        epsilon=epsilon,
        unique_obstacles=unique,
        env_to_set=env_to_set,
        solutions=solutions,
    )
