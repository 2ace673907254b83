"""Forward propagation: word scoring, selection, and the composite policy.

A word's probability is a product of per-leg feasibilities.  The first leg
reads the feasibility tensor directly; later legs anchor at a high
confidence bound on the previous goal's arrival time and, when that bound
falls strictly inside a period, recompute one step of the backward
recursion from the realized start time (the "stitch").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrival import ArrivalModels
from .config import PlannerConfig
from .feasibility import NO_TARGET, FeasibilitySolution
from .lmdp import PolicyEnsemble
from .reach import ReachabilityTensor, reach
from .tasklogic import Word
from .world import DeadlineDistribution, EnvironmentSchedule, GoalSet


@dataclass
class PlanningContext:
    """Everything the forward pass needs, bundled once."""

    ensemble: PolicyEnsemble
    models: ArrivalModels
    R: ReachabilityTensor
    sol: FeasibilitySolution
    schedule: EnvironmentSchedule
    goals: GoalSet
    config: PlannerConfig = field(default_factory=PlannerConfig)


@dataclass
class LegScore:
    from_state: int
    goal_label: str
    goal_state: int
    env: int                 # environment active when the leg starts (0-based)
    start_time: int | None
    kappa_hat: float
    target: int              # first committed target (NO_TARGET if infeasible)
    tau_bound: int | None    # arrival-time bound used to anchor the next leg


@dataclass
class WordScore:
    word: Word
    probability: float
    legs: list[LegScore]


def stitch_step(ctx: PlanningContext, c: int, i: int, t: int):
    """Feasibility and target for goal c from state i at absolute time t.

    At a period boundary this is a plain tensor lookup; mid-period it is one
    step of the backward recursion anchored at t.
    """
    sched = ctx.schedule
    if t > sched.horizon:
        return 0.0, NO_TARGET
    k = sched.active_environment(t)
    if t == sched.start(k):
        return float(ctx.sol.kappa[c, k, i]), int(ctx.sol.targets[c, k, i])

    g = ctx.goals[c].state
    mode = ctx.config.cdf_mode
    inclusive = ctx.config.deadline_inclusive
    period_end = DeadlineDistribution.deterministic(min(sched.start(k + 1), sched.horizon))
    best_val, best_j = 0.0, NO_TARGET
    for j in range(ctx.ensemble.n_states):
        if j in sched.obstacles[k]:
            continue
        if j == g:
            val = reach(ctx.models.get(k, g), i, t, ctx.goals[c].deadline, mode, inclusive)
        else:
            kn = float(ctx.sol.kappa[c, k + 1, j]) if k + 1 < sched.n_envs else 0.0
            if kn == 0.0:
                continue
            val = reach(ctx.models.get(k, j), i, t, period_end, mode, inclusive) * kn
        if val > best_val:
            best_val, best_j = val, j
    return best_val, best_j


def forward_arrival_cdf(ctx: PlanningContext, c: int, start_state: int,
                        start_time: int, first_target: int | None = None) -> np.ndarray:
    """Cumulative arrival probability at goal c's state by absolute time.

    Evolves the state distribution under the executed policy: committed
    per-state targets at each period start, a single stitch target for a
    mid-period start, mass removed on first entry to the goal state.
    """
    sched = ctx.schedule
    T = sched.horizon
    n = ctx.ensemble.n_states
    g = ctx.goals[c].state
    cum = np.zeros(T + 1)
    if start_state == g:
        cum[start_time:] = 1.0
        return cum

    def commit_all(masses_flat: np.ndarray, k: int) -> dict:
        out: dict[int, np.ndarray] = {}
        for x in np.flatnonzero(masses_flat):
            j = int(ctx.sol.targets[c, k, x])
            out.setdefault(j, np.zeros(n))[x] += masses_flat[x]
        return out

    k = sched.active_environment(start_time)
    init = np.zeros(n)
    init[start_state] = 1.0
    if start_time == sched.start(k) or first_target is None:
        masses = commit_all(init, k)
    else:
        masses = {int(first_target): init}

    absorbed = 0.0
    for t in range(start_time, T):
        k = sched.active_environment(t)
        if t > start_time and t == sched.start(k):
            flat = np.zeros(n)
            for vec in masses.values():
                flat += vec
            masses = commit_all(flat, k)
        stepped: dict[int, np.ndarray] = {}
        for j, vec in masses.items():
            if j == NO_TARGET:
                stepped[j] = stepped.get(j, np.zeros(n)) + vec  # waiting in place
            else:
                stepped[j] = stepped.get(j, np.zeros(n)) + vec @ ctx.ensemble.slice(k, j).u
        for vec in stepped.values():
            absorbed += vec[g]
            vec[g] = 0.0
        masses = stepped
        cum[t + 1] = absorbed
    return cum


def _arrival_bound(cum: np.ndarray, start_time: int, confidence: float) -> int | None:
    """Smallest t with cum(t) >= confidence * cum(T); None if no arrival mass."""
    total = cum[-1]
    if total <= 0.0:
        return None
    hits = np.flatnonzero(cum >= confidence * total - 1e-15)
    return int(hits[0]) if hits.size else None


def score_word(ctx: PlanningContext, word: Word, x0: int) -> WordScore:
    """Probability of satisfying one word from x0 at time 0, with leg detail."""
    legs: list[LegScore] = []
    probability = 1.0
    prev_state = x0
    prev_time: int | None = 0
    infeasible = False
    for m, c in enumerate(word.goal_indices):
        goal = ctx.goals[c]
        if infeasible or prev_time is None or prev_time > ctx.schedule.horizon:
            legs.append(LegScore(prev_state, goal.label, goal.state,
                                 ctx.schedule.n_envs - 1, None, 0.0, NO_TARGET, None))
            probability = 0.0
            infeasible = True
            prev_state = goal.state
            continue
        k = ctx.schedule.active_environment(prev_time)
        kappa_hat, j_hat = stitch_step(ctx, c, prev_state, prev_time)
        tau = None
        if kappa_hat > 0.0 and m < len(word) - 1:
            cum = forward_arrival_cdf(ctx, c, prev_state, prev_time, j_hat)
            tau = _arrival_bound(cum, prev_time, ctx.config.arrival_confidence)
        legs.append(LegScore(prev_state, goal.label, goal.state, k,
                             prev_time, kappa_hat, j_hat, tau))
        probability *= kappa_hat
        if kappa_hat == 0.0 or (m < len(word) - 1 and tau is None):
            probability = 0.0
            infeasible = True
        prev_state = goal.state
        prev_time = tau
    return WordScore(word=word, probability=probability, legs=legs)


def select_word(scores: list[WordScore]) -> tuple[WordScore, float]:
    """Argmax by probability; ties break to the lexicographically smallest word."""
    if not scores:
        raise ValueError("no words to select from")
    best = min(scores, key=lambda s: (-s.probability, s.word.goal_indices))
    return best, best.probability


@dataclass
class CompositePolicy:
    """The non-stationary policy for the selected word.

    Per word position the policy dispatches to ensemble slices through the
    target tensor; when a sub-goal completes mid-period the commitment is
    re-derived from the realized arrival state and time (the stitch).
    """

    word: Word
    probability: float
    legs: list[LegScore]
    ctx: PlanningContext

    def initial_target(self, m: int, x: int, t: int) -> int:
        """Committed target when word position m activates at (x, t)."""
        c = self.word.goal_indices[m]
        sched = self.ctx.schedule
        if t > sched.horizon:
            return NO_TARGET
        k = sched.active_environment(t)
        if t == sched.start(k):
            return int(self.ctx.sol.targets[c, k, x])
        _, j_hat = stitch_step(self.ctx, c, x, t)
        return j_hat

    def period_target(self, m: int, x: int, k: int) -> int:
        """Target re-read on entering environment k at state x."""
        c = self.word.goal_indices[m]
        return int(self.ctx.sol.targets[c, k, x])

    def to_plan_dict(self) -> dict:
        sched = self.ctx.schedule
        return {
            "word": list(self.word.labels),
            "goal_states": list(self.word.states),
            "probability": self.probability,
            "legs": [
                {
                    "from_state": leg.from_state,
                    "goal": leg.goal_label,
                    "goal_state": leg.goal_state,
                    "environment": leg.env + 1,
                    "start_time": leg.start_time,
                    "kappa_hat": leg.kappa_hat,
                    "target": leg.target,
                    "arrival_bound": leg.tau_bound,
                }
                for leg in self.legs
            ],
            "targets": {
                str(m): {
                    str(k + 1): [int(j) for j in self.ctx.sol.targets[c, k]]
                    for k in range(sched.n_envs)
                }
                for m, c in enumerate(self.word.goal_indices)
            },
        }


def materialize_policy(ctx: PlanningContext, score: WordScore) -> CompositePolicy:
    """Bind the scored word to its executable non-stationary policy."""
    return CompositePolicy(word=score.word, probability=score.probability,
                           legs=score.legs, ctx=ctx)
