"""Gridworld state-space, passive dynamics, obstacle schedule and goals.

States are indexed row-major: state i sits at (row, col) = divmod(i, width).
All times are absolute integer steps; environment k (0-based) is active on
[d_k, d_{k+1} - 1] with d_K = horizon + 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

N_ACTIONS = 5  # stay, up, down, left, right


class SchemaError(Exception):
    """A scenario or schedule violated its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Grid:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.n_states < 2:
            raise SchemaError("grid must contain at least 2 states")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def coords(self, state: int) -> tuple[int, int]:
        return divmod(state, self.width)

    def index(self, row: int, col: int) -> int:
        return row * self.width + col

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width


@dataclass(frozen=True)
class DeadlineDistribution:
    """Absolute-time deadline: a point mass or a finite discrete PMF."""

    kind: str  # "det" | "pmf"
    time: int | None = None
    support: tuple[tuple[int, float], ...] = ()

    @classmethod
    def deterministic(cls, t: int) -> "DeadlineDistribution":
        return cls(kind="det", time=int(t))

    @classmethod
    def pmf(cls, pairs) -> "DeadlineDistribution":
        return cls(kind="pmf", support=tuple((int(t), float(p)) for t, p in pairs))

    def validate(self, horizon: int) -> list[str]:
        errs = []
        if self.kind == "det":
            if self.time is None or self.time < 0 or self.time > horizon:
                errs.append(f"deterministic deadline {self.time} outside [0, {horizon}]")
        elif self.kind == "pmf":
            if not self.support:
                errs.append("pmf deadline has empty support")
            total = sum(p for _, p in self.support)
            if abs(total - 1.0) > 1e-9:
                errs.append(f"pmf probabilities sum to {total}, not 1")
            for t, p in self.support:
                if t < 0 or t > horizon:
                    errs.append(f"pmf support time {t} outside [0, {horizon}]")
                if p < 0:
                    errs.append(f"negative pmf probability {p}")
        else:
            errs.append(f"unknown deadline kind {self.kind!r}")
        return errs

    def points(self) -> tuple[tuple[int, float], ...]:
        """Support as (absolute time, probability) pairs."""
        if self.kind == "det":
            return ((self.time, 1.0),)
        return self.support

    def latest(self) -> int:
        return max(t for t, _ in self.points())


@dataclass(frozen=True)
class Goal:
    label: str
    state: int
    deadline: DeadlineDistribution


@dataclass(frozen=True)
class GoalSet:
    goals: tuple[Goal, ...]
    by_label: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "by_label", {g.label: g for g in self.goals})

    def __len__(self):
        return len(self.goals)

    def __iter__(self):
        return iter(self.goals)

    def __getitem__(self, c: int) -> Goal:
        return self.goals[c]

    def index_of(self, label: str) -> int:
        for c, g in enumerate(self.goals):
            if g.label == label:
                return c
        raise KeyError(label)

    def validate(self, grid: Grid, horizon: int) -> list[str]:
        errs = []
        labels = [g.label for g in self.goals]
        if len(set(labels)) != len(labels):
            errs.append("goal labels not unique")
        for g in self.goals:
            if not 0 <= g.state < grid.n_states:
                errs.append(f"goal {g.label}: state index {g.state} out of range")
            errs.extend(f"goal {g.label}: {e}" for e in g.deadline.validate(horizon))
        return errs


@dataclass(frozen=True)
class EnvironmentSchedule:
    """K obstacle sets with absolute period start times and a horizon."""

    obstacles: tuple[frozenset, ...]
    starts: tuple[int, ...]
    horizon: int

    @property
    def n_envs(self) -> int:
        return len(self.obstacles)

    def start(self, k: int) -> int:
        """d_k, with d_K defined as horizon + 1."""
        if k == self.n_envs:
            return self.horizon + 1
        return self.starts[k]

    def duration(self, k: int) -> int:
        return self.start(k + 1) - self.start(k)

    def active_environment(self, t: int) -> int:
        """Index of the environment whose period covers absolute time t."""
        if t < 0 or t > self.horizon:
            raise SchemaError(f"time {t} outside horizon [0, {self.horizon}]")
        k = int(np.searchsorted(np.asarray(self.starts), t, side="right")) - 1
        return k

    def is_period_start(self, t: int) -> bool:
        return t in self.starts

    def validate(self, grid: Grid) -> list[str]:
        errs = []
        if self.n_envs == 0:
            errs.append("schedule has no environments")
            return errs
        if self.starts[0] != 0:
            errs.append("first environment must start at time 0")
        for a, b in zip(self.starts, self.starts[1:]):
            if b <= a:
                errs.append("starts not strictly increasing")
                break
        if self.horizon <= self.starts[-1]:
            errs.append(
                f"horizon {self.horizon} must exceed last start {self.starts[-1]}"
            )
        for k, B in enumerate(self.obstacles):
            for s in B:
                if not 0 <= s < grid.n_states:
                    errs.append(f"environment {k + 1}: state index {s} out of range")
        return errs


def validate_schedule(schedule: EnvironmentSchedule, grid: Grid) -> EnvironmentSchedule:
    """Return the schedule if valid, otherwise raise with every violation."""
    errs = schedule.validate(grid)
    if errs:
        raise SchemaError(errs)
    return schedule


def passive_dynamics(grid: Grid, obstacles=frozenset()) -> np.ndarray:
    """Uniform 5-action passive transition matrix.

    Each of stay/up/down/left/right carries probability 1/5; moves off-grid
    or into an obstacle cell resolve to staying put, so rows always sum to 1.
    Obstacle cells keep their own rows (their cost, not P, removes them).
    """
    n = grid.n_states
    P = np.zeros((n, n))
    blocked = frozenset(obstacles)
    moves = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
    for i in range(n):
        r, c = grid.coords(i)
        for dr, dc in moves:
            rr, cc = r + dr, c + dc
            if grid.in_bounds(rr, cc):
                j = grid.index(rr, cc)
                if j in blocked:
                    j = i
            else:
                j = i
            P[i, j] += 1.0 / N_ACTIONS
    return P


@dataclass(frozen=True)
class Scenario:
    grid: Grid
    schedule: EnvironmentSchedule
    goals: GoalSet
    task: str
    start_state: int

    def validate(self) -> "Scenario":
        errs = self.schedule.validate(self.grid)
        errs.extend(self.goals.validate(self.grid, self.schedule.horizon))
        if not 0 <= self.start_state < self.grid.n_states:
            errs.append(f"start_state {self.start_state} out of range")
        # Obstacles may never cover a grounded goal state of the task.
        for g in self.goals:
            for k, B in enumerate(self.schedule.obstacles):
                if g.state in B:
                    errs.append(
                        f"goal {g.label} grounded at state {g.state}, which is an "
                        f"obstacle of environment {k + 1}"
                    )
        if errs:
            raise SchemaError(errs)
        return self


def _deadline_from_json(obj) -> DeadlineDistribution:
    if not isinstance(obj, dict) or "type" not in obj:
        raise SchemaError("deadline must be an object with a 'type' key")
    if obj["type"] == "det":
        return DeadlineDistribution.deterministic(obj["t"])
    if obj["type"] == "pmf":
        return DeadlineDistribution.pmf(obj["support"])
    raise SchemaError(f"unknown deadline type {obj['type']!r}")


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        grid = Grid(int(doc["grid"]["width"]), int(doc["grid"]["height"]))
        envs = doc["environments"]
        schedule = EnvironmentSchedule(
            obstacles=tuple(frozenset(int(s) for s in e["obstacles"]) for e in envs),
            starts=tuple(int(e["start"]) for e in envs),
            horizon=int(doc["horizon"]),
        )
        goals = GoalSet(
            tuple(
                Goal(str(g["label"]), int(g["state"]), _deadline_from_json(g["deadline"]))
                for g in doc.get("goals", [])
            )
        )
        scenario = Scenario(
            grid=grid,
            schedule=schedule,
            goals=goals,
            task=str(doc.get("task", "")),
            start_state=int(doc["start_state"]),
        )
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scenario: {exc}") from exc
    return scenario.validate()


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)
