"""Non-stationary policy synthesis for deadline-constrained goal sequences.

A precomputed ensemble of shortest-path policies (one per obstacle layout
and target state) is composed, through arrival-time models and a backward
feasibility recursion, into a single non-stationary policy that maximizes
the probability of satisfying a temporal-logic goal sequence.
"""

from .config import PlannerConfig
from .world import (DeadlineDistribution, EnvironmentSchedule, Goal, GoalSet,
                    Grid, Scenario, SchemaError, load_scenario,
                    passive_dynamics, scenario_from_dict, validate_schedule)
from .lmdp import NonConvergence, PolicyEnsemble, build_cost_matrix, build_ensemble, solve
from .arrival import (ArrivalModel, ArrivalModels, SingularSystem,
                      build_arrival_model, exact_cdf, gamma_fit, hitting_moments)
from .reach import ReachabilityTensor, build_tensor, reach
from .tasklogic import Certificate, ParseError, Word, evaluate_word, parse, to_dnf
from .feasibility import FeasibilitySolution, backward_recursion, feasibility_map
from .synthesis import (CompositePolicy, PlanningContext, WordScore,
                        materialize_policy, score_word, select_word)
from .sim import Episode, monte_carlo, rollout

__version__ = "0.1.0"
