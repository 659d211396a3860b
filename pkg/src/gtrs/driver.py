"""End-to-end solve pipeline and the interval-constraint front end."""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from .cqr import ReformKind, build_reformulation, estimate_lipschitz
from .errors import GtrsError, UnsupportedProblemError
from .linalg import SparseSymmetric, cg_solve
from .minimax import Algorithm, SolverConfig, minimize, solve_constrained
from .model import ConstraintSense, GtrsProblem, QuadraticForm
from .pencil import IntervalKind, compute_interval, find_definite_shift
from .recovery import (CaseTag, SolveReport, attempt_boundary_construction,
                       newton_refine, recover_solution, walk_to_boundary,
                       _null_vectors_at, _report)


@contextmanager
def _stage(name: str):
    try:
        yield
    except GtrsError as err:
        if err.stage is None:
            err.stage = name
        raise


def _as_algorithm(algorithm) -> Algorithm:
    if isinstance(algorithm, Algorithm):
        return algorithm
    if algorithm in ("alg1", "alg2"):
        return Algorithm(algorithm)
    if algorithm == "auto":
        return Algorithm.ALG2
    raise GtrsError("unknown algorithm %r" % (algorithm,))


def _refine_loop(problem: GtrsProblem, report: SolveReport) -> SolveReport:
    """Polish feasibility with Newton steps when the constraint is active."""
    active = (report.multiplier > 1e-12
              or problem.sense is ConstraintSense.EQUALITY)
    if not active:
        return report
    band = 1e-10 * (1.0 + abs(problem.constraint.c))
    x = report.x
    for _ in range(5):
        if abs(problem.constraint.value(x)) <= band:
            break
        x = newton_refine(problem, x, active=True)
    report.x = x
    report.objective = problem.objective.value(x)
    report.constraint_residual = problem.constraint.value(x)
    return report


def solve(problem: GtrsProblem, config: SolverConfig | None = None,
          algorithm="alg1", use_gamma_split: bool = False,
          x0: np.ndarray | None = None) -> SolveReport:
    """Full pipeline: interval analysis, boundary screen, reformulate,
    minimize, recover, refine.

    Every stage failure propagates as a :class:`GtrsError` whose ``stage``
    attribute names the stage that raised it.
    """
    config = config or SolverConfig()
    alg = _as_algorithm(algorithm)
    eig_time = 0.0
    t_start = time.perf_counter()

    with _stage("validate"):
        problem.validate()
    with _stage("definite_point"):
        shift = find_definite_shift(problem)
    with _stage("interval"):
        t0 = time.perf_counter()
        interval = compute_interval(problem, shift)
        eig_time += time.perf_counter() - t0
    if interval.kind is IntervalKind.SINGLETON:
        raise UnsupportedProblemError(
            "multiplier interval is a single point; unsupported problem class",
            stage="interval")

    report: SolveReport | None = None
    if interval.kind is IntervalKind.TWO_SIDED:
        with _stage("boundary_screen"):
            for side in ("right", "left"):
                report = attempt_boundary_construction(problem, interval, side)
                if report is not None:
                    report.iterations = 1
                    break

    if report is None:
        with _stage("reformulate"):
            reform = build_reformulation(problem, interval,
                                         use_gamma_split=use_gamma_split)
        if reform.kind is ReformKind.UNSUPPORTED_SINGLETON:
            raise UnsupportedProblemError(
                "reformulation degenerated to a singleton; unsupported",
                stage="reformulate")
        if reform.kind is ReformKind.INTERIOR:
            mult = interval.shift if "vanishes" in reform.provenance else 0.0
            report = _report(problem, reform.x_opt, mult, CaseTag.INTERIOR,
                             termination="stationary_point")
        elif reform.kind is ReformKind.CONVEX_CONSTRAINT:
            with _stage("smoothness"):
                t0 = time.perf_counter()
                estimate_lipschitz(reform)
                eig_time += time.perf_counter() - t0
            with _stage("constrained_descent"):
                result = solve_constrained(reform, x0=x0, config=config)
                report = _constrained_report(problem, reform, result)
        else:
            with _stage("smoothness"):
                t0 = time.perf_counter()
                estimate_lipschitz(reform)
                eig_time += time.perf_counter() - t0
            with _stage("minimax"):
                start = x0
                if start is None and config.warm_start:
                    start = cg_solve(
                        problem.objective.q.add_scaled(shift, problem.constraint.q),
                        -(problem.objective.b + shift * problem.constraint.b),
                        tol=1e-10)
                result = minimize(reform, x0=start, config=config, algorithm=alg)
            with _stage("recovery"):
                report = recover_solution(reform, result.x, tol=config.eps1)
                report.iterations = result.iterations
                report.termination = result.termination.value
                report.h_trace = result.h_trace

    with _stage("refine"):
        report = _refine_loop(problem, report)
    report.eig_seconds = eig_time
    report.solve_seconds = time.perf_counter() - t_start - eig_time
    return report


def _constrained_report(problem: GtrsProblem, reform, result) -> SolveReport:
    x = result.x
    lam3 = reform.lambda_single
    residual = problem.constraint.value(x)
    band = 1e-9 * (1.0 + abs(problem.constraint.c))
    if lam3 > 1e-12 and residual < -band:
        # Optimum of the shifted form is non-unique at a genuine endpoint:
        # restore complementary slackness along a null direction.
        vectors = _null_vectors_at(problem, reform.interval, "left")
        if vectors:
            x, _ = walk_to_boundary(problem, x, vectors[0])
            residual = problem.constraint.value(x)
    interior = residual < -band and result.multiplier <= 1e-12
    tag = CaseTag.INTERIOR if interior else CaseTag.EASY_OR_HARD1
    mult = lam3 + result.multiplier
    rep = _report(problem, x, mult if not interior else 0.0, tag,
                  termination="projected_gradient")
    rep.iterations = max(1, result.iterations)
    return rep


# ---------------------------------------------------------------------------
# Interval-constrained front end: minimize x'Ax - 2a'x over c1 <= x'Bx <= c2.
# ---------------------------------------------------------------------------

def classify_interval_problem(a_mat: SparseSymmetric, a_lin: np.ndarray,
                              b_mat: SparseSymmetric, c1: float, c2: float,
                              tol: float = 1e-12) -> tuple[str, np.ndarray, float]:
    """Which side of the two-sided constraint binds, if any.

    The unconstrained minimizer x0 of the objective decides: below c1 the
    lower bound binds, above c2 the upper bound binds, otherwise x0 itself
    is optimal.  Returns ``(tag, x0, x0' B x0)``.
    """
    if c1 > c2:
        raise GtrsError("classify_interval_problem requires c1 <= c2")
    x0 = cg_solve(a_mat, np.asarray(a_lin, dtype=np.float64), tol=tol)
    v0 = float(x0 @ b_mat.matvec(x0))
    if v0 < c1:
        return "lower_active", x0, v0
    if v0 > c2:
        return "upper_active", x0, v0
    return "interior", x0, v0


def interval_problem_to_gtrs(a_mat: SparseSymmetric, a_lin: np.ndarray,
                             b_mat: SparseSymmetric, c1: float, c2: float
                             ) -> tuple[str, GtrsProblem | None, np.ndarray]:
    """Reduce the interval-constrained problem to a single-constraint one."""
    tag, x0, _ = classify_interval_problem(a_mat, a_lin, b_mat, c1, c2)
    if tag == "interior":
        return tag, None, x0
    q1 = a_mat.scaled(2.0)
    b1 = -2.0 * np.asarray(a_lin, dtype=np.float64)
    if tag == "lower_active":
        constraint = QuadraticForm(b_mat.scaled(-2.0), np.zeros(a_mat.n), c1)
    else:
        constraint = QuadraticForm(b_mat.scaled(2.0), np.zeros(a_mat.n), -c2)
    problem = GtrsProblem(QuadraticForm(q1, b1), constraint)
    return tag, problem, x0


def solve_interval_problem(a_mat: SparseSymmetric, a_lin: np.ndarray,
                           b_mat: SparseSymmetric, c1: float, c2: float,
                           config: SolverConfig | None = None,
                           algorithm="alg1") -> SolveReport:
    """Classify, reduce and solve the interval-constrained problem."""
    with _stage("classify"):
        tag, problem, x0 = interval_problem_to_gtrs(a_mat, a_lin, b_mat, c1, c2)
    if tag == "interior":
        v0 = float(x0 @ b_mat.matvec(x0))
        objective = float(x0 @ a_mat.matvec(x0)) - 2.0 * float(a_lin @ x0)
        return SolveReport(x=x0, objective=objective,
                           constraint_residual=max(c1 - v0, v0 - c2),
                           multiplier=0.0, case_tag=CaseTag.INTERIOR,
                           iterations=1, termination="unconstrained_minimum")
    return solve(problem, config=config, algorithm=algorithm)
