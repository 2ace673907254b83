"""Pipeline orchestration: staged computation with content-addressed caching.

The heavy, task-invariant stages (policy ensemble, arrival models,
deterministic reachability) are keyed by the *set* of obstacle layouts, so
scenarios that reorder the same environments share every cached artifact.
Feasibility is keyed by the ordered schedule plus goals/deadlines but not
the task formula, so distinct tasks over one scenario share it too.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .arrival import ArrivalModel, ArrivalModels, gamma_fit
from .cache import CacheCorrupt, PipelineCache, content_key
from .config import PlannerConfig
from .feasibility import FeasibilitySolution, backward_recursion
from .lmdp import LmdpSolution, PolicyEnsemble, build_ensemble, canonical_obstacle_sets
from .reach import ReachabilityTensor, reach_column
from .synthesis import (PlanningContext, WordScore, materialize_policy,
                        score_word, select_word)
from .tasklogic import parse, to_dnf
from .world import Scenario


def _deadline_payload(d):
    if d.kind == "det":
        return ["det", d.time]
    return ["pmf", [[t, p] for t, p in d.support]]


def _shared_payload(scenario: Scenario, config: PlannerConfig) -> dict:
    unique, _ = canonical_obstacle_sets(scenario.schedule)
    return {
        "grid": [scenario.grid.width, scenario.grid.height],
        "obstacle_sets": [sorted(B) for B in unique],
        "epsilon": config.epsilon,
        "residual_tol": config.residual_tol,
        "iter_cap_factor": config.iter_cap_factor,
    }


def ensemble_key(scenario: Scenario, config: PlannerConfig) -> str:
    return content_key({"stage": "ensemble", **_shared_payload(scenario, config)})


def arrival_key(scenario: Scenario, config: PlannerConfig) -> str:
    return content_key({
        "stage": "arrival",
        **_shared_payload(scenario, config),
        "horizon": scenario.schedule.horizon,
        "mode": config.cdf_mode,
    })


def reach_key(scenario: Scenario, config: PlannerConfig) -> str:
    return content_key({
        "stage": "reach",
        **_shared_payload(scenario, config),
        "horizon": scenario.schedule.horizon,
        "mode": config.cdf_mode,
    })


def feasibility_key(scenario: Scenario, config: PlannerConfig) -> str:
    return content_key({
        "stage": "feasibility",
        **_shared_payload(scenario, config),
        "environments": [
            [sorted(B), s]
            for B, s in zip(scenario.schedule.obstacles, scenario.schedule.starts)
        ],
        "horizon": scenario.schedule.horizon,
        "mode": config.cdf_mode,
        "inclusive": config.deadline_inclusive,
        "goals": [
            [g.label, g.state, _deadline_payload(g.deadline)] for g in scenario.goals
        ],
    })


# ---------------------------------------------------------------------------
# array (de)serialization per stage

def ensemble_arrays(ensemble: PolicyEnsemble) -> dict:
    out = {}
    n = ensemble.n_states
    for s, B in enumerate(ensemble.unique_obstacles):
        u = np.zeros((n, n, n))
        z = np.zeros((n, n))
        unreach = np.zeros((n, n), dtype=np.uint8)
        for j in range(n):
            if (s, j) not in ensemble.solutions:
                continue
            sol = ensemble.solutions[(s, j)]
            u[j] = sol.u
            z[j] = sol.z
            unreach[j] = sol.unreachable
        out[f"u{s}"] = u
        out[f"z{s}"] = z
        out[f"unreach{s}"] = unreach
    return out


def ensemble_from_arrays(arrays: dict, scenario: Scenario, config: PlannerConfig) -> PolicyEnsemble:
    unique, env_to_set = canonical_obstacle_sets(scenario.schedule)
    solutions = {}
    for s, B in enumerate(unique):
        u, z, unreach = arrays[f"u{s}"], arrays[f"z{s}"], arrays[f"unreach{s}"]
        for j in range(scenario.grid.n_states):
            if j in B:
                continue
            solutions[(s, j)] = LmdpSolution(
                z=z[j], u=u[j], residual=0.0, iterations=0,
                unreachable=unreach[j].astype(bool),
            )
    return PolicyEnsemble(
        grid=scenario.grid, epsilon=config.epsilon, unique_obstacles=unique,
        env_to_set=env_to_set, solutions=solutions,
    )


def arrival_arrays(models: ArrivalModels, n_sets: int, n: int) -> dict:
    out = {}
    horizon = models.horizon
    for s in range(n_sets):
        tmu = np.zeros((n, n))
        tvar = np.zeros((n, n))
        unreach = np.zeros((n, n), dtype=np.uint8)
        tables = None
        for j in range(n):
            if (s, j) not in models.models:
                continue
            m = models.models[(s, j)]
            tmu[j], tvar[j], unreach[j] = m.t_mu, m.t_var, m.unreachable
            if m.exact is not None:
                if tables is None:
                    tables = np.zeros((n, n, horizon + 1))
                tables[j] = m.exact
        # inf is not JSON but is fine in raw float64 payloads
        out[f"tmu{s}"] = tmu
        out[f"tvar{s}"] = tvar
        out[f"aunreach{s}"] = unreach
        if tables is not None:
            out[f"F{s}"] = tables
    return out


def arrival_from_arrays(arrays: dict, scenario: Scenario, config: PlannerConfig) -> ArrivalModels:
    unique, env_to_set = canonical_obstacle_sets(scenario.schedule)
    horizon = scenario.schedule.horizon
    models = {}
    for s, B in enumerate(unique):
        tmu, tvar = arrays[f"tmu{s}"], arrays[f"tvar{s}"]
        unreach = arrays[f"aunreach{s}"].astype(bool)
        tables = arrays.get(f"F{s}")
        for j in range(scenario.grid.n_states):
            if j in B:
                continue
            alpha, beta = gamma_fit(tmu[j], tvar[j])
            models[(s, j)] = ArrivalModel(
                env_set=s, target=j, t_mu=tmu[j], t_var=tvar[j],
                alpha=alpha, beta=beta, unreachable=unreach[j],
                horizon=horizon, exact=None if tables is None else tables[j],
            )
    return ArrivalModels(models, env_to_set, horizon)


def det_reach_arrays(models: ArrivalModels, n_sets: int, n: int, mode: str) -> dict:
    horizon = models.horizon
    out = {}
    for s in range(n_sets):
        det = np.zeros((n, n, horizon + 1))  # det[i, j, t]
        for j in range(n):
            if (s, j) not in models.models:
                continue
            m = models.models[(s, j)]
            if mode == "exact":
                det[:, j, :] = m.exact
            else:
                for t in range(horizon + 1):
                    det[:, j, t] = m.cdf_column(t, mode)
        out[f"det{s}"] = det
    return out


# ---------------------------------------------------------------------------
# staged runners

@dataclass
class SolveResult:
    ensemble: PolicyEnsemble
    models: ArrivalModels
    det_arrays: dict
    stats: dict = field(default_factory=dict)     # stage -> "hit"/"miss"/"rebuilt"
    timings: dict = field(default_factory=dict)   # stage -> seconds
    sizes: dict = field(default_factory=dict)     # stage -> bytes on disk


def _try_load(cache, stage, key, stats):
    if cache is None or not cache.has(stage, key):
        return None
    try:
        arrays, _ = cache.load(stage, key)
        stats[stage] = "hit"
        return arrays
    except CacheCorrupt as exc:
        warnings.warn(f"corrupted cache entry for stage {stage}: {exc}; recomputing")
        stats[stage] = "rebuilt"
        return None


def run_solve(scenario: Scenario, config: PlannerConfig,
              cache: PipelineCache | None = None) -> SolveResult:
    """Build (or load) the ensemble, arrival models and deterministic reach tables."""
    stats, timings, sizes = {}, {}, {}
    n = scenario.grid.n_states
    unique, _ = canonical_obstacle_sets(scenario.schedule)

    t0 = time.perf_counter()
    key = ensemble_key(scenario, config)
    arrays = _try_load(cache, "ensemble", key, stats)
    if arrays is not None:
        ensemble = ensemble_from_arrays(arrays, scenario, config)
    else:
        stats.setdefault("ensemble", "miss")
        ensemble = build_ensemble(
            scenario.grid, scenario.schedule, config.epsilon,
            residual_tol=config.residual_tol, iter_cap_factor=config.iter_cap_factor,
        )
        if cache is not None:
            path = cache.store("ensemble", key, ensemble_arrays(ensemble))
            sizes["ensemble"] = path.stat().st_size
    timings["ensemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    key = arrival_key(scenario, config)
    arrays = _try_load(cache, "arrival", key, stats)
    if arrays is not None:
        models = arrival_from_arrays(arrays, scenario, config)
    else:
        stats.setdefault("arrival", "miss")
        models = ArrivalModels.from_ensemble(
            ensemble, scenario.schedule.horizon, with_exact=(config.cdf_mode == "exact")
        )
        if cache is not None:
            path = cache.store("arrival", key, arrival_arrays(models, len(unique), n))
            sizes["arrival"] = path.stat().st_size
    timings["arrival"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    key = reach_key(scenario, config)
    det_arrays = _try_load(cache, "reach", key, stats)
    if det_arrays is None:
        stats.setdefault("reach", "miss")
        det_arrays = det_reach_arrays(models, len(unique), n, config.cdf_mode)
        if cache is not None:
            path = cache.store("reach", key, det_arrays)
            sizes["reach"] = path.stat().st_size
    timings["reach"] = time.perf_counter() - t0

    return SolveResult(ensemble=ensemble, models=models, det_arrays=det_arrays,
                       stats=stats, timings=timings, sizes=sizes)


def build_reach_tensor(scenario: Scenario, config: PlannerConfig,
                       solve_result: SolveResult) -> ReachabilityTensor:
    """Assemble the full tensor: cached det tables plus fresh goal slices."""
    sched = scenario.schedule
    models = solve_result.models
    K, T = sched.n_envs, sched.horizon
    n = scenario.grid.n_states
    det = np.zeros((K, n, n, T + 1))
    for k in range(K):
        det[k] = solve_result.det_arrays[f"det{models.env_to_set[k]}"]
    goal = np.zeros((K, len(scenario.goals), n))
    for k in range(K):
        d_k = sched.start(k)
        for c, g in enumerate(scenario.goals):
            goal[k, c] = reach_column(
                models.get(k, g.state), d_k, g.deadline,
                config.cdf_mode, config.deadline_inclusive,
            )
    return ReachabilityTensor(det=det, goal=goal, horizon=T)


@dataclass
class PlanResult:
    ctx: PlanningContext
    scores: list
    best: WordScore
    policy: object
    solve: SolveResult
    stats: dict
    timings: dict


def run_plan(scenario: Scenario, config: PlannerConfig,
             cache: PipelineCache | None = None,
             solve_result: SolveResult | None = None) -> PlanResult:
    """Full planning pass: solve artifacts, feasibility, word scoring, policy."""
    if solve_result is None:
        solve_result = run_solve(scenario, config, cache)
    stats = dict(solve_result.stats)
    timings = dict(solve_result.timings)

    t0 = time.perf_counter()
    R = build_reach_tensor(scenario, config, solve_result)
    timings["goal_slices"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    key = feasibility_key(scenario, config)
    arrays = _try_load(cache, "feasibility", key, stats)
    if arrays is not None:
        sol = FeasibilitySolution(kappa=arrays["kappa"], targets=arrays["targets"])
    else:
        stats.setdefault("feasibility", "miss")
        sol = backward_recursion(R, scenario.schedule, scenario.goals)
        if cache is not None:
            cache.store("feasibility", key, {"kappa": sol.kappa, "targets": sol.targets})
    timings["feasibility"] = time.perf_counter() - t0

    ctx = PlanningContext(
        ensemble=solve_result.ensemble, models=solve_result.models, R=R, sol=sol,
        schedule=scenario.schedule, goals=scenario.goals, config=config,
    )

    t0 = time.perf_counter()
    ast = parse(scenario.task)
    words = to_dnf(ast, scenario.goals)
    scores = [score_word(ctx, w, scenario.start_state) for w in words]
    best, _ = select_word(scores)
    policy = materialize_policy(ctx, best)
    timings["scoring"] = time.perf_counter() - t0

    return PlanResult(ctx=ctx, scores=scores, best=best, policy=policy,
                      solve=solve_result, stats=stats, timings=timings)
