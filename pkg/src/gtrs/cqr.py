"""Convex reformulation of the constrained problem.

On a two-sided multiplier interval [a, b] the problem is equivalent to
minimizing the pointwise maximum of the two convex forms
``objective + a * constraint`` and ``objective + b * constraint``.  When the
interval is one-sided the problem reduces to minimizing a single convex
form over the original (then convex) constraint.  Both reductions, plus the
optional interior shortcut driven by the constraint value at the definite
point, are built here.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IterativeFailureError, ValidationError
from .linalg import coarse_max_eig, cg_solve, is_positive_definite
from .model import ConstraintSense, GtrsProblem, QuadraticForm
from .pencil import IntervalKind, PencilInterval, constraint_at_shift


class ReformKind(enum.Enum):
    TWO_CONVEX = "two_convex"
    CONVEX_CONSTRAINT = "convex_constraint"
    INTERIOR = "interior"
    UNSUPPORTED_SINGLETON = "unsupported_singleton"


@dataclass
class Reformulation:
    """The derived convex problem, in one of four shapes.

    TWO_CONVEX: minimize max(h_left, h_right); both forms convex.
    CONVEX_CONSTRAINT: minimize h_single subject to constraint_form <= 0.
    INTERIOR: x_opt already solves the original problem.
    UNSUPPORTED_SINGLETON: degenerate multiplier set, not solvable here.

    ``lipschitz`` is an upper bound on the largest Hessian eigenvalue of the
    forms involved, filled in by :func:`estimate_lipschitz`.
    """

    kind: ReformKind
    problem: GtrsProblem
    interval: PencilInterval
    h_left: QuadraticForm | None = None
    h_right: QuadraticForm | None = None
    lambda_left: float | None = None
    lambda_right: float | None = None
    h_single: QuadraticForm | None = None
    lambda_single: float | None = None
    constraint_form: QuadraticForm | None = None
    x_opt: np.ndarray | None = field(default=None, repr=False)
    lipschitz: float | None = None
    provenance: str = ""


def _negated(form: QuadraticForm) -> QuadraticForm:
    return QuadraticForm(form.q.scaled(-1.0), -form.b, -form.c)


def _two_convex(problem: GtrsProblem, interval: PencilInterval,
                lam_a: float, lam_b: float, provenance: str) -> Reformulation:
    return Reformulation(
        ReformKind.TWO_CONVEX, problem, interval,
        h_left=problem.shifted(lam_a), h_right=problem.shifted(lam_b),
        lambda_left=lam_a, lambda_right=lam_b, provenance=provenance)


def _convex_constraint(problem: GtrsProblem, interval: PencilInterval,
                       lam: float, constraint: QuadraticForm,
                       provenance: str) -> Reformulation:
    reform = Reformulation(
        ReformKind.CONVEX_CONSTRAINT, problem, interval,
        h_single=problem.shifted(lam), lambda_single=lam,
        constraint_form=constraint, provenance=provenance)
    _check_slater(reform)
    return reform


def _check_slater(reform: Reformulation) -> None:
    """Flag constraint sets with (numerically) empty interior."""
    form = reform.constraint_form
    flag, _ = is_positive_definite(form.q)
    if not flag:
        return  # singular curvature: cannot cheaply certify, leave it be
    try:
        xmin = cg_solve(form.q, -form.b, tol=1e-10)
    except IterativeFailureError:
        return
    fmin = form.value(xmin)
    scale = 1e-9 * (1.0 + abs(form.c))
    if fmin > scale:
        raise ValidationError("constraint set is empty: the constraint's "
                              "minimum value %.3e is positive" % fmin)
    if fmin > -scale:
        warnings.warn("constraint set has (numerically) empty interior; "
                      "duality-based reductions may be unreliable",
                      stacklevel=3)


def build_reformulation(problem: GtrsProblem, interval: PencilInterval,
                        use_gamma_split: bool = False) -> Reformulation:
    """Select and build the convex reformulation for a classified interval.

    By default a two-sided interval maps to the minimax pair at its working
    endpoints.  With ``use_gamma_split`` the constraint value at the definite
    point decides which half-interval matters, saving one extreme eigenvalue
    computation when that value's sign is informative, and short-circuiting
    to the stationary point itself when it vanishes.
    """
    kind = interval.kind
    if kind is IntervalKind.EMPTY:
        raise ValidationError("cannot reform an empty multiplier interval")
    if kind is IntervalKind.SINGLETON:
        return Reformulation(ReformKind.UNSUPPORTED_SINGLETON, problem, interval,
                             provenance="singleton interval")

    if kind is IntervalKind.RIGHT_UNBOUNDED:
        lam3 = interval.working_left
        return _convex_constraint(problem, interval, lam3, problem.constraint,
                                  provenance="one-sided interval [%g, inf)" % lam3)

    if kind is IntervalKind.LEFT_UNBOUNDED:
        if problem.sense is ConstraintSense.EQUALITY:
            # Mirror of the one-sided case: flipping the constraint sign is
            # free for an equality constraint and lands back in (-f <= 0).
            return _convex_constraint(
                problem, interval, interval.right, _negated(problem.constraint),
                provenance="mirrored one-sided interval (-inf, %g]" % interval.right)
        lam_a, lam_b = interval.working_left, interval.working_right
        if lam_b - lam_a <= 1e-10 * (1.0 + abs(interval.shift)):
            return Reformulation(ReformKind.UNSUPPORTED_SINGLETON, problem,
                                 interval, provenance="clamped to a point")
        return _two_convex(problem, interval, lam_a, lam_b,
                           "left-unbounded interval clamped at zero")

    # Two-sided interval.
    lam_a, lam_b = interval.working_left, interval.working_right
    if lam_b - lam_a <= 1e-10 * (1.0 + abs(interval.shift)):
        return Reformulation(ReformKind.UNSUPPORTED_SINGLETON, problem, interval,
                             provenance="working interval clamped to a point")
    if not use_gamma_split:
        return _two_convex(problem, interval, lam_a, lam_b,
                           "two-sided interval endpoints")

    shift = interval.shift
    x0, gamma = constraint_at_shift(problem, shift)
    tol = 1e-10 * (1.0 + float(np.linalg.norm(
        problem.objective.b + shift * problem.constraint.b)))
    if gamma > tol:
        return _two_convex(problem, interval, shift, lam_b,
                           "constraint positive at definite point")
    if gamma < -tol:
        if shift <= lam_a + 1e-14 * (1.0 + abs(shift)):
            # Multiplier pinned at the working left end with the constraint
            # inactive there: the stationary point is already optimal.
            return Reformulation(ReformKind.INTERIOR, problem, interval,
                                 x_opt=x0, provenance="inactive constraint")
        return _two_convex(problem, interval, lam_a, shift,
                           "constraint negative at definite point")
    return Reformulation(ReformKind.INTERIOR, problem, interval, x_opt=x0,
                         provenance="constraint vanishes at definite point")


def estimate_lipschitz(reform: Reformulation, coarse_tol: float = 0.1) -> float:
    """Upper bound on the largest Hessian eigenvalue across the reformulation.

    A coarse extreme-eigenvalue estimate M (within ``coarse_tol`` below the
    true value, never above it) is padded by ``coarse_tol``, giving a cheap
    certified upper bound.  The result is stored on the reformulation.
    """
    if reform.kind is ReformKind.TWO_CONVEX:
        forms = [reform.h_left, reform.h_right]
    elif reform.kind is ReformKind.CONVEX_CONSTRAINT:
        forms = [reform.h_single]
    else:
        raise ValidationError("no smoothness bound for %s" % reform.kind)
    estimate = max(coarse_max_eig(f.q, precision=coarse_tol) for f in forms)
    reform.lipschitz = estimate + coarse_tol
    return reform.lipschitz
