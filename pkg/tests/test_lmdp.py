import numpy as np
import pytest

from cspplan.lmdp import (build_cost_matrix, build_ensemble, solve,
                          canonical_obstacle_sets)
from cspplan.world import Grid, passive_dynamics

from helpers import clamped_fixed_point_oracle, corridor, schedule


def test_cost_matrix_definition():
    Q = build_cost_matrix(3, 2, frozenset(), 0.5)
    assert np.allclose(np.diag(Q), [0.5, 0.5, 1.0], atol=0)
    assert np.count_nonzero(Q - np.diag(np.diag(Q))) == 0


def test_cost_matrix_obstacle_zeroing():
    Q = build_cost_matrix(3, 2, frozenset({0}), 0.5)
    assert np.allclose(np.diag(Q), [0.0, 0.5, 1.0], atol=0)


def test_cost_matrix_rejects_obstacle_target():
    with pytest.raises(ValueError):
        build_cost_matrix(3, 0, frozenset({0}), 0.5)


def test_clamped_boundary_values():
    grid = corridor(5)
    B = frozenset({1})
    P = passive_dynamics(grid, B)
    sol = solve(build_cost_matrix(5, 4, B, 0.9), P, 4)
    assert sol.z[4] == 1.0
    assert sol.z[1] == 0.0


def test_corridor_fixed_point_matches_linear_solve_oracle():
    grid = corridor(5)
    P = passive_dynamics(grid)
    sol = solve(build_cost_matrix(5, 4, frozenset(), 0.9), P, 4)
    expected = clamped_fixed_point_oracle(P, 0.9, 4)
    assert np.max(np.abs(sol.z - expected)) < 1e-10
    # z strictly increasing toward the target
    assert (np.diff(sol.z) > 0).all()
    # the controlled dynamics at x2 favor x3 over every other move away
    moves_away = sol.u[2].copy()
    moves_away[2] = 0.0
    assert moves_away.argmax() == 3


def test_residual_and_row_stochasticity():
    grid = Grid(4, 4)
    P = passive_dynamics(grid)
    for j in (0, 5, 15):
        sol = solve(build_cost_matrix(16, j, frozenset(), 0.9), P, j)
        assert sol.residual < 1e-12
        assert np.max(np.abs(sol.u.sum(axis=1) - 1.0)) < 1e-9
        # support containment: u > 0 only where p > 0 (or on the absorbing diagonal)
        mask = (sol.u > 0) & (P <= 0)
        mask[j, j] = False
        assert not mask.any()


def test_walled_off_island_self_loops():
    grid = corridor(5)
    B = frozenset({2})
    P = passive_dynamics(grid, B)
    sol = solve(build_cost_matrix(5, 4, B, 0.9), P, 4)
    assert sol.unreachable[0] and sol.unreachable[1]
    assert sol.u[0, 0] == 1.0 and sol.u[1, 1] == 1.0
    assert sol.z[0] == 0.0


def test_target_absorbing():
    grid = corridor(5)
    P = passive_dynamics(grid)
    sol = solve(build_cost_matrix(5, 2, frozenset(), 0.9), P, 2)
    assert sol.u[2, 2] == 1.0


def test_ensemble_counts_and_sharing():
    grid = corridor(5)
    sched = schedule([[], []], [0, 5], 12)
    ens = build_ensemble(grid, sched, 0.9)
    # identical obstacle sets share one stored set of slices
    assert len(ens.unique_obstacles) == 1
    assert len(ens.solutions) == 5
    assert ens.slice(0, 3) is ens.slice(1, 3)
    for (_, j), sol in ens.solutions.items():
        assert np.max(np.abs(sol.u.sum(axis=1) - 1.0)) < 1e-9


def test_ensemble_excludes_obstacle_targets():
    grid = Grid(4, 4)
    wall = [1, 5, 9, 13]
    sched = schedule([wall], [0], 10)
    ens = build_ensemble(grid, sched, 0.9)
    assert len(ens.valid_targets(0)) == 12
    assert len(ens.solutions) == 12


def test_canonical_obstacle_sets_order_independent():
    a = schedule([[1], [2], [3]], [0, 5, 10], 20)
    b = schedule([[3], [2], [1]], [0, 5, 10], 20)
    ua, ma = canonical_obstacle_sets(a)
    ub, mb = canonical_obstacle_sets(b)
    assert ua == ub
    assert ma == tuple(reversed(mb))


def test_identical_specs_identical_solutions():
    grid = corridor(5)
    P = passive_dynamics(grid)
    Q = build_cost_matrix(5, 4, frozenset(), 0.9)
    a = solve(Q, P, 4)
    b = solve(Q, P, 4)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.u, b.u)
