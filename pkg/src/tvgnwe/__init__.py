"""Distributed equilibrium seeking for network games with time-varying
coupling constraints and time-varying directed communication graphs."""

from .exceptions import (BoundsViolationError, DivergenceError, GenerationError,
                         IterationLimitError, ParameterInfeasibleError, ShapeError,
                         UnsupportedScenarioError, ValidationError)
from .game import (BoxSet, CallableConstraints, CyclicNetwork, GameSpec, LocalCost,
                   Schedule, ScheduledConstraints, SmallWorldNetwork, StaticConstraints,
                   StaticNetwork, collective_feasible_check, dump_game, game_from_dict,
                   game_to_dict, load_game, local_feasible_set_value)
from .graph import (decompose_lifted, generate_small_world, left_pf_eigenvector,
                    random_doubly_stochastic, validate_adjacency)
from .metrics import (RunTrace, certify_pn_enwe, consensus_residual, constraint_violation,
                      multiplier_laplacian)
from .precondition import (BoundReport, Preconditioner, SolverParams, build_preconditioner,
                           check_bounds, norm_K, spectral_norm, suggest_params)
from .prox import group_prox, project_box, project_nonneg, prox_local
from .solver import (AutoParams, ClosedFormBR, ExplicitParams, IterateState, StepReport,
                     best_response_step, inclusion_check, initial_state, run,
                     run_best_response, tv_prox_gnwe_step)

__version__ = "0.1.0"
