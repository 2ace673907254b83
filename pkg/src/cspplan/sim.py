"""Discrete-time execution of composite policies and Monte Carlo estimation.

Episodes are seeded independently (base seed + episode index), so runs are
reproducible regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .feasibility import NO_TARGET
from .synthesis import CompositePolicy
from .tasklogic import Certificate
from .world import Scenario


@dataclass
class Episode:
    seed: int
    trajectory: list  # [(t, state)]
    certificates: list  # [Certificate]
    outcome: bool
    word_position: int
    realized_deadlines: dict = field(default_factory=dict)


def _sample_deadlines(goals, rng) -> dict:
    """Realize every goal deadline up front, in goal order, from the episode RNG."""
    realized = {}
    for g in goals:
        if g.deadline.kind == "det":
            realized[g.label] = g.deadline.time
        else:
            times = [t for t, _ in g.deadline.support]
            probs = np.array([p for _, p in g.deadline.support])
            realized[g.label] = int(rng.choice(times, p=probs / probs.sum()))
    return realized


def _cumulative_rows(policy: CompositePolicy) -> dict:
    """Cache of per-slice cumulative transition rows, keyed by (env, target)."""
    rows = {}
    ctx = policy.ctx
    for k in range(ctx.schedule.n_envs):
        for m, c in enumerate(policy.word.goal_indices):
            for j in set(int(t) for t in ctx.sol.targets[c, k]) | {policy.word.states[m]}:
                if j == NO_TARGET or (k, j) in rows:
                    continue
                if j in ctx.schedule.obstacles[k]:
                    continue
                rows[(k, j)] = np.cumsum(ctx.ensemble.slice(k, j).u, axis=1)
    return rows


def rollout(policy: CompositePolicy, scenario: Scenario, seed: int,
            _rows: dict | None = None) -> Episode:
    """Execute one episode; identical (policy, scenario, seed) gives identical output."""
    ctx = policy.ctx
    sched = ctx.schedule
    T = sched.horizon
    rng = np.random.default_rng(seed)
    realized = _sample_deadlines(ctx.goals, rng)
    draws = rng.random(T)
    rows = _rows if _rows is not None else _cumulative_rows(policy)

    word = policy.word
    M = len(word)
    x = scenario.start_state
    t = 0
    m = 0
    trajectory = [(0, x)]
    certificates = []

    def certify_and_advance(state, now):
        nonlocal m
        advanced = False
        while m < M and state == word.states[m] and now <= realized[word.labels[m]]:
            certificates.append(Certificate(state=state, time=now))
            m += 1
            advanced = True
        return advanced

    commit = NO_TARGET
    if certify_and_advance(x, 0):
        pass
    if m < M:
        commit = policy.initial_target(m, x, 0)

    while t < T and m < M:
        k = sched.active_environment(t)
        if t > 0 and sched.is_period_start(t):
            commit = policy.period_target(m, x, k)
        if commit != NO_TARGET:
            if (k, commit) not in rows:  # stitch targets are computed lazily
                rows[(k, commit)] = np.cumsum(ctx.ensemble.slice(k, commit).u, axis=1)
            row = rows[(k, commit)][x]
            x = int(np.searchsorted(row, draws[t], side="right"))
        t += 1
        trajectory.append((t, x))
        if certify_and_advance(x, t) and m < M:
            commit = policy.initial_target(m, x, t)

    return Episode(seed=seed, trajectory=trajectory, certificates=certificates,
                   outcome=(m == M), word_position=m, realized_deadlines=realized)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class SimSummary:
    episodes: int
    successes: int
    rate: float
    wilson: tuple
    base_seed: int
    leg_arrivals: list  # per word position: {"count", "mean_time"}


def monte_carlo(policy: CompositePolicy, scenario: Scenario, episodes: int,
                base_seed: int = 0, keep_episodes: bool = False):
    """Empirical satisfaction rate over independent seeded episodes."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rows = _cumulative_rows(policy)
    M = len(policy.word)
    successes = 0
    arrival_sums = [0.0] * M
    arrival_counts = [0] * M
    kept = []
    for e in range(episodes):
        ep = rollout(policy, scenario, base_seed + e, _rows=rows)
        successes += ep.outcome
        for pos, cert in enumerate(ep.certificates):
            arrival_sums[pos] += cert.time
            arrival_counts[pos] += 1
        if keep_episodes:
            kept.append(ep)
    rate = successes / episodes
    summary = SimSummary(
        episodes=episodes,
        successes=successes,
        rate=rate,
        wilson=wilson_interval(successes, episodes),
        base_seed=base_seed,
        leg_arrivals=[
            {
                "count": arrival_counts[i],
                "mean_time": (arrival_sums[i] / arrival_counts[i]) if arrival_counts[i] else None,
            }
            for i in range(M)
        ],
    )
    return (summary, kept) if keep_episodes else summary
