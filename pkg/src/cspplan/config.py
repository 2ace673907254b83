"""Pipeline-wide configuration knobs."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PlannerConfig:
    """Tunable parameters shared by every pipeline stage.

    epsilon             interior desirability of non-goal, non-obstacle cells
    cdf_mode            "exact" (tabulated hitting-time CDF) or "gamma"
                        (two-moment gamma approximation)
    residual_tol        fixed-point residual required of a desirability solve
    iter_cap_factor     iteration cap is iter_cap_factor * n_states
    arrival_confidence  percentile used to bound sub-goal arrival times
    deadline_inclusive  if True, a deadline exactly at the current time still
                        admits a zero-step arrival
    """

    epsilon: float = 0.9
    cdf_mode: str = "exact"
    residual_tol: float = 1e-12
    iter_cap_factor: int = 100
    arrival_confidence: float = 0.99
    deadline_inclusive: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.cdf_mode not in ("exact", "gamma"):
            raise ValueError("cdf_mode must be 'exact' or 'gamma'")
        if not 0.0 < self.arrival_confidence < 1.0:
            raise ValueError("arrival_confidence must lie in (0, 1)")
