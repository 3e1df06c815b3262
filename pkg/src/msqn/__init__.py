"""Adaptive multisecant quasi-Newton methods with cubic regularization."""

from .accelerated import AccelStepResult, EstimateSequenceState, accel_outer, accel_subroutine
from .baselines import BaselineConfig, run_gd, run_lbfgs, run_nesterov
from .cubic import (CubicModel, SubproblemSolution, build_cubic_model,
                    build_gamma_model, minimize_estimate_function,
                    solve_cubic_subproblem)
from .memory import (DirectionMemory, compute_error_vector, memory_from_pairs,
                     orthogonalize_batch, prune, update_forward_estimate,
                     update_greedy, update_iterates_only, update_random_orthogonal)
from .oracles import (Dataset, ObjectiveOracle, estimate_initial_smoothness,
                      load_libsvm, make_cubic_regularized_ls, make_logistic,
                      make_quadratic, make_rosenbrock)
from .solver import SolverConfig, type1_backtrack_step, type1_iterate, type2_iterate
from .trace import IterationTrace, TraceRow
from .type2 import (SocpStandardForm, Type2Problem, build_socp, format_socp,
                    solve_type2_small, type2_objective)

__all__ = [name for name in dir() if not name.startswith("_")]
