"""Matrix-free solver suite for the generalized trust region subproblem:
minimize one quadratic subject to one quadratic inequality constraint.

The solve pipeline analyzes the matrix family Q1 + lam * Q2, rewrites the
problem as the minimax of two convex quadratics, drives that minimax with
cheap first-order steps, and converts the result back into a solution of
the original problem.  A dense reference oracle, a seeded instance
generator, and disk/CLI front ends round out the package.
"""

from .bundle import IntervalProblemData, load_bundle, save_bundle
from .cqr import ReformKind, Reformulation, build_reformulation, estimate_lipschitz
from .driver import (classify_interval_problem, interval_problem_to_gtrs,
                     solve, solve_interval_problem)
from .errors import (GtrsError, IterativeFailureError, NumericalError,
                     StalledLineSearchError, UnboundedError,
                     UnsupportedProblemError, ValidationError)
from .instances import CASES, InstanceSpec, generate_instance
from .linalg import (EigenResult, SparseSymmetric, cg_solve,
                     is_positive_definite, max_gen_eig, null_space_basis,
                     read_matrix_market, write_matrix_market)
from .minimax import (Algorithm, MinimaxResult, MinimaxState, SolverConfig,
                      Termination, armijo_step, crossing_step, minimize,
                      project_onto_sublevel, solve_constrained,
                      steepest_direction)
from .model import ConstraintSense, GtrsProblem, QuadraticForm, worked_example
from .oracle import ORACLE_LIMIT, oracle_solve
from .pencil import (IntervalKind, PencilInterval, compute_interval,
                     constraint_at_shift, find_definite_shift,
                     shifted_minimizer)
from .recovery import (CaseTag, SolveReport, attempt_boundary_construction,
                       newton_refine, recover_solution, walk_to_boundary)

__version__ = "0.1.0"

__all__ = [
    "Algorithm", "CASES", "CaseTag", "ConstraintSense", "EigenResult",
    "GtrsError", "GtrsProblem", "InstanceSpec", "IntervalKind",
    "IntervalProblemData", "IterativeFailureError", "MinimaxResult",
    "MinimaxState", "NumericalError", "ORACLE_LIMIT", "PencilInterval",
    "QuadraticForm", "ReformKind", "Reformulation", "SolveReport",
    "SolverConfig", "SparseSymmetric", "StalledLineSearchError",
    "Termination", "UnboundedError", "UnsupportedProblemError",
    "ValidationError", "armijo_step", "attempt_boundary_construction",
    "build_reformulation", "cg_solve", "classify_interval_problem",
    "compute_interval", "constraint_at_shift", "crossing_step",
    "estimate_lipschitz", "find_definite_shift", "generate_instance",
    "interval_problem_to_gtrs", "is_positive_definite", "load_bundle",
    "max_gen_eig", "minimize", "newton_refine", "null_space_basis",
    "oracle_solve", "project_onto_sublevel", "read_matrix_market",
    "recover_solution", "save_bundle", "shifted_minimizer", "solve",
    "solve_constrained", "solve_interval_problem", "steepest_direction",
    "walk_to_boundary", "worked_example", "write_matrix_market",
]
