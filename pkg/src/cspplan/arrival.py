"""Arrival-time models for policy slices.

For an absorbing slice we compute the exact first two hitting-time moments
from the transient submatrix, fit a gamma CDF to them, and optionally
tabulate the exact discrete CDF F(i, t) = 1 - (S^t 1)_i as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gammainc


class SingularSystem(Exception):
    """(I - S) restricted to reachable states could not be solved."""


def _reachable_mask(u: np.ndarray, target: int) -> np.ndarray:
    """States with a positive-probability path to the target under u."""
    n = u.shape[0]
    reach = np.zeros(n, dtype=bool)
    reach[target] = True
    while True:
        grown = reach | (u[:, reach].sum(axis=1) > 0.0)
        if np.array_equal(grown, reach):
            return reach
        reach = grown


def hitting_moments(u: np.ndarray, target: int):
    """Mean and variance of the hitting time of ``target`` under ``u``.

    Returns (t_mu, t_var, unreachable); unreachable states carry inf
    moments rather than the solver's spurious values.
    """
    n = u.shape[0]
    reach = _reachable_mask(u, target)
    unreachable = ~reach
    trans = np.flatnonzero(reach & (np.arange(n) != target))

    t_mu = np.full(n, np.inf)
    t_var = np.full(n, np.inf)
    t_mu[target] = 0.0
    t_var[target] = 0.0
    if trans.size:
        S = u[np.ix_(trans, trans)]
        A = np.eye(trans.size) - S
        try:
            lu = lu_factor(A)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        mu = lu_solve(lu, np.ones(trans.size))
        if not np.all(np.isfinite(mu)) or np.max(np.abs(A @ mu - 1.0)) > 1e-10:
            raise SingularSystem(f"residual too large solving hitting moments for target {target}")
        second = 2.0 * lu_solve(lu, mu) - mu**2 - mu
        t_mu[trans] = mu
        t_var[trans] = np.maximum(second, 0.0)
    return t_mu, t_var, unreachable


def gamma_fit(t_mu: np.ndarray, t_var: np.ndarray):
    """Moment-matched gamma parameters alpha = mu^2/var, beta = mu/var.

    Degenerate entries (zero variance, unreachable) get nan parameters;
    evaluation handles them as step / immediate-arrival / zero CDFs.
    """
    t_mu = np.asarray(t_mu, dtype=float)
    t_var = np.asarray(t_var, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(t_var > 0.0, t_mu**2 / t_var, np.nan)
        beta = np.where(t_var > 0.0, t_mu / t_var, np.nan)
    finite = np.isfinite(t_mu)
    alpha = np.where(finite, alpha, np.nan)
    beta = np.where(finite, beta, np.nan)
    return alpha, beta


def exact_cdf(u: np.ndarray, target: int, horizon: int) -> np.ndarray:
    """Exact N x (horizon+1) arrival CDF table via iterated vector products."""
    n = u.shape[0]
    notj = np.flatnonzero(np.arange(n) != target)
    S = u[np.ix_(notj, notj)]
    unreachable = ~_reachable_mask(u, target)

    F = np.zeros((n, horizon + 1))
    F[target, :] = 1.0
    s = np.ones(notj.size)
    for t in range(1, horizon + 1):
        s = S @ s
        F[notj, t] = np.clip(1.0 - s, 0.0, 1.0)
    F[unreachable, :] = 0.0
    return F


@dataclass
class ArrivalModel:
    """Hitting-time representation of one policy slice."""

    env_set: int
    target: int
    t_mu: np.ndarray
    t_var: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    unreachable: np.ndarray
    horizon: int
    exact: np.ndarray | None = None  # N x (horizon+1) CDF table

    def cdf(self, i: int, t: float, mode: str = "exact") -> float:
        """F_{A_i}(t): probability of arrival within t steps from state i."""
        if t < 0 or self.unreachable[i]:
            return 0.0
        if mode == "exact":
            if self.exact is None:
                raise ValueError("exact CDF table was not computed for this model")
            return float(self.exact[i, min(int(t), self.horizon)])
        mu, var = self.t_mu[i], self.t_var[i]
        if mu == 0.0:
            return 1.0
        if var == 0.0:
            return 1.0 if t >= mu else 0.0
        return float(gammainc(self.alpha[i], self.beta[i] * t))

    def cdf_column(self, t: float, mode: str = "exact") -> np.ndarray:
        """Vector of F_{A_i}(t) over every start state i."""
        n = self.t_mu.size
        return np.array([self.cdf(i, t, mode) for i in range(n)])


def build_arrival_model(u: np.ndarray, target: int, horizon: int,
                        env_set: int = 0, with_exact: bool = True) -> ArrivalModel:
    t_mu, t_var, unreachable = hitting_moments(u, target)
    alpha, beta = gamma_fit(t_mu, t_var)
    table = exact_cdf(u, target, horizon) if with_exact else None
    return ArrivalModel(
        env_set=env_set,
        target=target,
        t_mu=t_mu,
        t_var=t_var,
        alpha=alpha,
        beta=beta,
        unreachable=unreachable,
        horizon=horizon,
        exact=table,
    )


class ArrivalModels:
    """Per-(environment, target) arrival models, shared across identical obstacle sets."""

    def __init__(self, models: dict, env_to_set, horizon: int):
        self.horizon = horizon
        self.env_to_set = tuple(env_to_set)
        self.models = models

    @classmethod
    def from_ensemble(cls, ensemble, horizon: int, with_exact: bool = True) -> "ArrivalModels":
        models = {}
        for (s, j), sol in ensemble.solutions.items():
            models[(s, j)] = build_arrival_model(
                sol.u, j, horizon, env_set=s, with_exact=with_exact
            )
        return cls(models, ensemble.env_to_set, horizon)

    def get(self, k: int, target: int) -> ArrivalModel:
        return self.models[(self.env_to_set[k], target)]

    def has(self, k: int, target: int) -> bool:
        return (self.env_to_set[k], target) in self.models
