import itertools

import numpy as np
import pytest

from cspplan.arrival import ArrivalModels
from cspplan.feasibility import NO_TARGET, backward_recursion, feasibility_map
from cspplan.lmdp import build_ensemble
from cspplan.reach import build_tensor, reach
from cspplan.world import DeadlineDistribution, Grid

from helpers import corridor, det, goal_set, schedule


def build_stack(grid, sched, goals, epsilon=0.9):
    ens = build_ensemble(grid, sched, epsilon)
    models = ArrivalModels.from_ensemble(ens, sched.horizon)
    R = build_tensor(models, sched, goals)
    sol = backward_recursion(R, sched, goals)
    return ens, models, R, sol


def brute_force_kappa(models, sched, goals, c, k0, i):
    """Exhaustive enumeration over per-period intermediate-target sequences.

    A plan is: wait-free hops through targets j_{k0}..j_{s-1} (one per
    period, reached by each period's end), then a final goal-reach during
    period s anchored at d_s.  Independent of the recursion.
    """
    if i in sched.obstacles[k0]:
        return 0.0
    g = goals[c].state
    K = sched.n_envs
    best = 0.0
    for s in range(k0, K):
        mids_pools = []
        for kk in range(k0, s):
            blocked = sched.obstacles[kk] | sched.obstacles[kk + 1]
            pool = [j for j in range(models.models[(0, g)].t_mu.size)
                    if j not in blocked and j != g]
            mids_pools.append(pool)
        for mids in itertools.product(*mids_pools):
            cur = i
            v = 1.0
            for kk, j in zip(range(k0, s), mids):
                end = DeadlineDistribution.deterministic(sched.start(kk + 1))
                v *= reach(models.get(kk, j), cur, sched.start(kk), end)
                cur = j
            v *= reach(models.get(s, g), cur, sched.start(s), goals[c].deadline)
            best = max(best, v)
    return best


def test_single_environment_reduces_to_goal_slice():
    grid = corridor(5)
    sched = schedule([[]], [0], 12)
    goals = goal_set(("G1", 4, det(10)))
    _, _, R, sol = build_stack(grid, sched, goals)
    assert np.array_equal(sol.kappa[0, 0], R.goal_slice(0, 0))
    nonzero = sol.kappa[0, 0] > 0
    assert (sol.targets[0, 0][nonzero] == 4).all()


def test_kappa_at_goal_with_live_deadline_is_one():
    grid = corridor(5)
    sched = schedule([[], []], [0, 5], 15)
    goals = goal_set(("G1", 4, det(12)))
    _, _, _, sol = build_stack(grid, sched, goals)
    assert sol.kappa[0, 0, 4] == 1.0
    assert sol.kappa[0, 1, 4] == 1.0


def test_wall_then_open_corridor_matches_brute_force():
    grid = corridor(7)
    sched = schedule([[3], []], [0, 10], 25)
    goals = goal_set(("G1", 6, det(22)))
    _, models, _, sol = build_stack(grid, sched, goals)
    for i in range(7):
        for k in range(2):
            expect = brute_force_kappa(models, sched, goals, 0, k, i)
            assert sol.kappa[0, k, i] == pytest.approx(expect, abs=1e-12)


def test_brute_force_equivalence_small_grids():
    cases = [
        (corridor(5), schedule([[2], []], [0, 6], 16),
         goal_set(("G1", 4, det(14)))),
        (Grid(4, 3), schedule([[1, 5, 9], [6], []], [0, 7, 14], 24),
         goal_set(("G1", 11, det(22)), ("G2", 3, det(12)))),
        (corridor(6), schedule([[4], [1]], [0, 8], 20),
         goal_set(("G1", 5, DeadlineDistribution.pmf([(12, 0.5), (18, 0.5)])),
                  ("G2", 0, det(19)))),
    ]
    for grid, sched, goals in cases:
        _, models, _, sol = build_stack(grid, sched, goals)
        for c in range(len(goals)):
            for k in range(sched.n_envs):
                for i in range(grid.n_states):
                    expect = brute_force_kappa(models, sched, goals, c, k, i)
                    assert sol.kappa[c, k, i] == pytest.approx(expect, abs=1e-12)


def test_kappa_bounded_and_obstacle_states_zero():
    grid = Grid(4, 3)
    sched = schedule([[5, 6], []], [0, 8], 20)
    goals = goal_set(("G1", 11, det(18)))
    _, _, _, sol = build_stack(grid, sched, goals)
    assert (sol.kappa >= 0).all() and (sol.kappa <= 1).all()
    assert sol.kappa[0, 0, 5] == 0.0
    assert sol.kappa[0, 0, 6] == 0.0
    assert sol.targets[0, 0, 5] == NO_TARGET


def test_targets_never_obstacles():
    grid = Grid(4, 3)
    sched = schedule([[1, 5, 9], []], [0, 8], 20)
    goals = goal_set(("G1", 11, det(18)))
    _, _, _, sol = build_stack(grid, sched, goals)
    for k, B in enumerate(sched.obstacles):
        chosen = set(sol.targets[0, k].tolist()) - {NO_TARGET}
        assert not (chosen & B)


def test_deadline_monotonicity():
    grid = corridor(7)
    base = None
    for D in (15, 18, 22):
        sched = schedule([[3], []], [0, 10], 25)
        goals = goal_set(("G1", 6, det(D)))
        _, _, _, sol = build_stack(grid, sched, goals)
        if base is not None:
            assert (sol.kappa >= base - 1e-15).all()
        base = sol.kappa


def test_wall_between_start_and_goal_never_raises_kappa():
    # adding a wall that separates states from the goal zeroes kappa on the
    # cut-off side and at the wall itself
    grid = corridor(7)
    goals = goal_set(("G1", 6, det(12)))
    open_sched = schedule([[]], [0], 14)
    walled = schedule([[3]], [0], 14)
    _, _, _, sol_a = build_stack(grid, open_sched, goals)
    _, _, _, sol_b = build_stack(grid, walled, goals)
    for i in (0, 1, 2, 3):
        assert sol_b.kappa[0, 0, i] == 0.0
        assert sol_b.kappa[0, 0, i] <= sol_a.kappa[0, 0, i]
        assert sol_b.targets[0, 0, i] == NO_TARGET


def test_feasibility_map_properties():
    grid = corridor(5)
    sched = schedule([[]], [0], 12)
    goals = goal_set(("G1", 4, det(12)))
    _, _, R, sol = build_stack(grid, sched, goals)
    fmap = feasibility_map(sol, 0, 0)
    assert np.array_equal(fmap, sol.kappa[0, 0])
    assert fmap.max() == sol.kappa[0, 0].max()
    # obstacle-free single environment with deadline at horizon: the map is
    # the goal-reach CDF column at the horizon
    assert np.array_equal(fmap, R.goal_slice(0, 0))
