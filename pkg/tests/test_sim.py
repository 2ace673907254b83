import numpy as np
import pytest

from cspplan.sim import monte_carlo, rollout, wilson_interval
from cspplan.synthesis import materialize_policy, score_word
from cspplan.tasklogic import evaluate_word, parse, to_dnf
from cspplan.world import Scenario

from helpers import (corridor, det, goal_set, schedule,
                     two_goal_corridor_scenario)
from test_synthesis import make_ctx


def make_policy(scenario: Scenario, word_index: int = 0):
    ctx = make_ctx(scenario)
    words = to_dnf(parse(scenario.task), ctx.goals)
    scores = [score_word(ctx, w, scenario.start_state) for w in words]
    best = max(scores, key=lambda s: s.probability)
    return materialize_policy(ctx, best), ctx


@pytest.fixture(scope="module")
def two_goal_policy():
    scenario = two_goal_corridor_scenario()
    policy, ctx = make_policy(scenario)
    return policy, ctx, scenario


def test_rollout_deterministic_per_seed(two_goal_policy):
    policy, _, scenario = two_goal_policy
    a = rollout(policy, scenario, seed=123)
    b = rollout(policy, scenario, seed=123)
    assert a.trajectory == b.trajectory
    assert a.certificates == b.certificates
    assert a.outcome == b.outcome
    c = rollout(policy, scenario, seed=124)
    assert c.trajectory != a.trajectory or c.seed != a.seed


def test_rollout_outcome_agrees_with_word_evaluation(two_goal_policy):
    policy, ctx, scenario = two_goal_policy
    for seed in range(300):
        ep = rollout(policy, scenario, seed)
        expect = evaluate_word(policy.word, ep.certificates, ctx.goals,
                               realized=ep.realized_deadlines)
        assert ep.outcome == expect


def test_rollout_trajectory_physical(two_goal_policy):
    policy, ctx, scenario = two_goal_policy
    sched = ctx.schedule
    for seed in range(100):
        ep = rollout(policy, scenario, seed)
        assert ep.trajectory[0] == (0, scenario.start_state)
        for (t0, x0), (t1, x1) in zip(ep.trajectory, ep.trajectory[1:]):
            assert t1 == t0 + 1
            assert abs(x1 - x0) <= 1  # corridor moves are single cells
            k = sched.active_environment(t1) if t1 <= sched.horizon else sched.n_envs - 1
            assert x1 not in sched.obstacles[k]


def test_monte_carlo_matches_prediction(two_goal_policy):
    policy, _, scenario = two_goal_policy
    summary = monte_carlo(policy, scenario, episodes=20_000, base_seed=5)
    lo, hi = summary.wilson
    margin = 3 * (hi - lo) / 4  # ~3 sigma
    assert abs(summary.rate - policy.probability) <= margin + 0.01
    assert summary.leg_arrivals[0]["count"] >= summary.leg_arrivals[1]["count"]


def test_certain_success_plan():
    # deterministic-ish: goal adjacent with a huge deadline, tiny grid
    scenario = Scenario(
        grid=corridor(2),
        schedule=schedule([[]], [0], 200),
        goals=goal_set(("G1", 1, det(200))),
        task="G1",
        start_state=0,
    ).validate()
    policy, _ = make_policy(scenario)
    summary = monte_carlo(policy, scenario, episodes=500, base_seed=1)
    assert summary.rate == 1.0
    assert summary.wilson[0] > 0.99


def test_impossible_plan_rate_zero():
    # wall never opens: the goal is unreachable
    scenario = Scenario(
        grid=corridor(5),
        schedule=schedule([[2]], [0], 30),
        goals=goal_set(("G1", 4, det(25))),
        task="G1",
        start_state=0,
    ).validate()
    policy, _ = make_policy(scenario)
    assert policy.probability == 0.0
    summary = monte_carlo(policy, scenario, episodes=300, base_seed=2)
    assert summary.rate == 0.0


def test_monte_carlo_reproducible(two_goal_policy):
    policy, _, scenario = two_goal_policy
    s1 = monte_carlo(policy, scenario, episodes=500, base_seed=42)
    s2 = monte_carlo(policy, scenario, episodes=500, base_seed=42)
    assert s1.successes == s2.successes
    assert s1.leg_arrivals == s2.leg_arrivals
    s3 = monte_carlo(policy, scenario, episodes=500, base_seed=43)
    assert s3.base_seed != s1.base_seed


def test_first_leg_empirical_cdf_matches_model(two_goal_policy):
    # arrival times at the first sub-goal follow the goal-directed slice's CDF
    policy, ctx, scenario = two_goal_policy
    _, kept = monte_carlo(policy, scenario, episodes=5_000, base_seed=9,
                          keep_episodes=True)
    times = np.array([ep.certificates[0].time for ep in kept if ep.certificates])
    model = ctx.models.get(0, 2)
    for t in (3, 5, 8, 10):
        empirical = (times <= t).sum() / len(kept)
        assert abs(empirical - model.exact[0, t]) < 0.025


def test_wilson_interval_basics():
    lo, hi = wilson_interval(0, 0)
    assert (lo, hi) == (0.0, 1.0)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert hi - lo < 0.21
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.95
    # hand-computed: n=100, p-hat=0.5, z=1.959964 -> [0.403832, 0.596168]
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.403832, abs=1e-5)
    assert hi == pytest.approx(0.596168, abs=1e-5)
    assert lo + hi == pytest.approx(1.0, abs=1e-12)


def test_monte_carlo_rejects_zero_episodes(two_goal_policy):
    policy, _, scenario = two_goal_policy
    with pytest.raises(ValueError):
        monte_carlo(policy, scenario, episodes=0)
