"""Turning minimax solutions back into solutions of the original problem.

A minimax optimum with both functions active already sits on the constraint
boundary.  When only one function is active, the point minimizes that
function alone and the true solution lies along the null space of its
Hessian; walking that null direction until the constraint residual vanishes
restores feasibility and optimality without changing the active value.

The same null-space picture powers the boundary-case screen: when the
combined linear term is orthogonal to the null space at an interval
endpoint, an optimal solution can be constructed directly from a deflated
linear solve plus a tiny dense quadratic program, skipping the iterative
solver entirely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .cqr import ReformKind, Reformulation
from .errors import NumericalError, ValidationError
from .linalg import cg_solve, is_positive_definite, null_space_basis
from .model import ConstraintSense, GtrsProblem
from .pencil import PencilInterval, endpoint_null_vectors
from .minimax import steepest_direction


class CaseTag(enum.Enum):
    EASY_OR_HARD1 = "easy_or_hard1"
    HARD2 = "hard2"
    INTERIOR = "interior"


@dataclass
class SolveReport:
    """Final answer for one solve, with feasibility and provenance data."""

    x: np.ndarray = field(repr=False)
    objective: float
    constraint_residual: float
    multiplier: float
    case_tag: CaseTag
    iterations: int = 0
    termination: str = ""
    theta_used: float | None = None
    recovery_direction_used: bool = False
    eig_seconds: float = 0.0
    solve_seconds: float = 0.0
    h_trace: np.ndarray | None = field(default=None, repr=False)


def _report(problem: GtrsProblem, x: np.ndarray, multiplier: float,
            case_tag: CaseTag, **kw) -> SolveReport:
    return SolveReport(x=x, objective=problem.objective.value(x),
                       constraint_residual=problem.constraint.value(x),
                       multiplier=multiplier, case_tag=case_tag, **kw)


def _min_abs_root(curve: float, slope: float, value: float) -> float:
    """Root of 1/2 curve t^2 + slope t + value = 0 with smallest |t|.

    The callers guarantee curve and value have opposite signs (or value is
    zero), so two real roots of opposite sign exist; ties favour the
    positive one.
    """
    a, b, c = 0.5 * curve, slope, value
    if c == 0.0:
        return 0.0
    if a == 0.0:
        if b == 0.0:
            raise NumericalError("degenerate null-direction equation")
        return -c / b
    disc = b * b - 4.0 * a * c
    scale = abs(b * b) + abs(4.0 * a * c)
    if disc < 0.0:
        if disc < -1e-12 * max(scale, 1.0):
            raise NumericalError(
                "null-direction equation has no real root (discriminant %.3e); "
                "the input point is not optimal to tolerance" % disc)
        disc = 0.0
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b if b != 0.0 else 1.0))
    roots = [r for r in (q / a, c / q if q != 0.0 else math.inf)
             if math.isfinite(r)]
    if not roots:
        raise NumericalError("null-direction equation produced no usable root")
    return min(roots, key=lambda r: (abs(r), -r))


def walk_to_boundary(problem: GtrsProblem, x: np.ndarray,
                     v: np.ndarray) -> tuple[np.ndarray, float]:
    """Move along v until the constraint value vanishes.

    Solves the scalar quadratic constraint(x + t v) = 0 and applies the
    smallest-magnitude root.  Returns the moved point and the step.
    """
    curve = float(v @ problem.constraint.q.matvec(v))
    slope = float(problem.constraint.gradient(x) @ v)
    value = problem.constraint.value(x)
    theta = _min_abs_root(curve, slope, value)
    return x + theta * v, theta


def _null_vectors_at(problem: GtrsProblem, interval: PencilInterval,
                     side: str) -> list[np.ndarray]:
    vectors = endpoint_null_vectors(problem, interval, side)
    if vectors:
        return vectors
    if side == "left" and interval.left_clamped:
        return []
    lam = interval.endpoint(side)
    pencil = problem.objective.q.add_scaled(lam, problem.constraint.q)
    flag, _ = is_positive_definite(pencil)
    if flag:
        return []
    eig = interval.endpoint_eig(side)
    seeds = eig.cluster if eig is not None and eig.cluster is not None else None
    return null_space_basis(pencil, seeds=seeds)


def recover_solution(reform: Reformulation, x_m: np.ndarray,
                     tol: float = 1e-8) -> SolveReport:
    """Convert an (approximately) optimal minimax point into a solution.

    Within the relative value band the point is returned as is.  With only
    the larger-multiplier function active the point is infeasible and walks
    the null space of that function's Hessian down to the boundary; with
    only the smaller-multiplier function active it is feasible, and either
    already optimal (multiplier zero) or walked to the boundary likewise.
    """
    if reform.kind is not ReformKind.TWO_CONVEX:
        raise ValidationError("recover_solution requires the two-function variant")
    problem = reform.problem
    lam_a, lam_b = reform.lambda_left, reform.lambda_right
    hl, gl = reform.h_left.value_and_gradient(x_m)
    hr, gr = reform.h_right.value_and_gradient(x_m)
    band = abs(hl - hr) <= max(tol * (abs(hl) + abs(hr)), 1e-14)

    if band:
        d, alpha, _ = steepest_direction(gl, gr, True)
        mult = alpha * lam_a + (1.0 - alpha) * lam_b
        return _report(problem, x_m, mult, CaseTag.EASY_OR_HARD1)

    if hr > hl:
        side = "right"
    else:
        side = "left"
        inactive_mult_zero = (abs(lam_a) <= 1e-14 * (1.0 + abs(lam_b))
                              and problem.sense is ConstraintSense.INEQUALITY)
        if inactive_mult_zero:
            # The active function is the plain objective: the constraint is
            # inactive at the optimum and the point is already the answer.
            return _report(problem, x_m, 0.0, CaseTag.INTERIOR)

    vectors = _null_vectors_at(problem, reform.interval, side)
    if not vectors:
        raise NumericalError(
            "single-function optimum reported but the %s endpoint has no null "
            "direction; the minimax point is not optimal to tolerance" % side)
    x_star, theta = walk_to_boundary(problem, x_m, vectors[0])
    return _report(problem, x_star,
                   lam_b if side == "right" else lam_a,
                   CaseTag.HARD2, theta_used=theta,
                   recovery_direction_used=True)


def newton_refine(problem: GtrsProblem, x: np.ndarray,
                  active: bool = True) -> np.ndarray:
    """One Newton step on the constraint residual along its gradient.

    x <- x - (f(x) / ||grad f(x)||^2) grad f(x) for the constraint f.  A
    no-op when the constraint is inactive or its gradient is degenerate.
    """
    if not active:
        return x
    value, grad = problem.constraint.value_and_gradient(x)
    gn2 = float(grad @ grad)
    scale = 1e-14 * (1.0 + problem.constraint.q.norm_inf()
                     + float(np.linalg.norm(problem.constraint.b)))
    if math.sqrt(gn2) <= scale:
        return x
    return x - (value / gn2) * grad


def attempt_boundary_construction(problem: GtrsProblem,
                                  interval: PencilInterval, side: str,
                                  ortho_tol: float = 1e-8
                                  ) -> SolveReport | None:
    """Try to build an optimal solution pinned at one interval endpoint.

    The attempt succeeds only in the degenerate ("hard") case: the combined
    linear term at the endpoint must be orthogonal to the null space of the
    matrix family there, and the other function, minimized over the affine
    subspace through the deflated stationary point, must not exceed the
    active value.  Returns None whenever any test fails, which is the
    common (easy) case.
    """
    lam_i = interval.endpoint(side)
    lam_j = interval.endpoint("left" if side == "right" else "right")
    if not (math.isfinite(lam_i) and math.isfinite(lam_j)):
        return None
    vectors = _null_vectors_at(problem, interval, side)
    if not vectors:
        return None
    vmat = np.column_stack(vectors)

    a_i = problem.objective.b + lam_i * problem.constraint.b
    null_part = vmat.T @ a_i
    if np.linalg.norm(null_part) > ortho_tol * max(np.linalg.norm(a_i), 1e-300):
        return None

    pencil = problem.objective.q.add_scaled(lam_i, problem.constraint.q)

    def deflate(z: np.ndarray) -> np.ndarray:
        return z - vmat @ (vmat.T @ z)

    x_hat = cg_solve(pencil, -deflate(a_i), tol=1e-12, projector=deflate)

    h_i = problem.shifted(lam_i)
    h_j = problem.shifted(lam_j)
    t = h_i.value(x_hat)

    # Minimize the other function over x_hat + span(V): a k-by-k convex
    # quadratic program solved in closed form (k is the null multiplicity).
    k = vmat.shape[1]
    aj_v = np.column_stack([h_j.q.matvec(vmat[:, i]) for i in range(k)])
    h_small = vmat.T @ aj_v
    lin = vmat.T @ h_j.gradient(x_hat)
    try:
        alpha = np.linalg.solve(h_small, -lin)
    except np.linalg.LinAlgError:
        return None
    x_flat = x_hat + vmat @ alpha
    m = h_j.value(x_flat)
    if m > t + 1e-10 * (1.0 + abs(t)):
        return None

    boundary_inactive = (abs(lam_i) <= 1e-14 * (1.0 + abs(lam_j))
                         and problem.sense is ConstraintSense.INEQUALITY)
    if boundary_inactive:
        return _report(problem, x_flat, lam_i, CaseTag.HARD2,
                       termination="boundary_construction",
                       recovery_direction_used=True)
    x_star, theta = walk_to_boundary(problem, x_flat, vmat[:, 0])
    return _report(problem, x_star, lam_i, CaseTag.HARD2,
                   termination="boundary_construction",
                   theta_used=theta, recovery_direction_used=True)
