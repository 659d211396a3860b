"""Analysis of the one-parameter matrix family Q1 + lam * Q2.

The solver needs three facts about the family: a multiplier at which it is
positive definite, the interval on which it stays positive semidefinite,
and the behaviour of the constraint value along the curve of stationary
points x(lam).  All three are computed here, matrix-free.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (GtrsError, UnboundedError, UnsupportedProblemError,
                     ValidationError)
from .linalg import (DENSE_LIMIT, EigenResult, SparseSymmetric, cg_solve,
                     is_positive_definite, max_gen_eig, smallest_eig_estimate)
from .model import ConstraintSense, GtrsProblem

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class IntervalKind(enum.Enum):
    TWO_SIDED = "two_sided"
    RIGHT_UNBOUNDED = "right_unbounded"
    LEFT_UNBOUNDED = "left_unbounded"
    SINGLETON = "singleton"
    EMPTY = "empty"


@dataclass
class PencilInterval:
    """The multipliers at which Q1 + lam * Q2 is positive semidefinite.

    ``left`` and ``right`` are the raw endpoints of that set over all real
    multipliers (infinite when unbounded); the family is strictly definite
    at ``shift``.  For inequality-constrained problems only nonnegative
    multipliers are admissible, so the working interval clamps the left
    endpoint at zero.  ``left_eig`` / ``right_eig`` hold the extreme
    eigenpairs that produced each finite endpoint; their vectors are null
    vectors of the family at that endpoint and are reused by the boundary
    case analysis.
    """

    shift: float
    left: float
    right: float
    kind: IntervalKind
    sense: ConstraintSense
    left_eig: EigenResult | None = None
    right_eig: EigenResult | None = None

    @property
    def working_left(self) -> float:
        if self.sense is ConstraintSense.INEQUALITY:
            return max(0.0, self.left)
        return self.left

    @property
    def working_right(self) -> float:
        return self.right

    @property
    def left_clamped(self) -> bool:
        return self.sense is ConstraintSense.INEQUALITY and self.left < 0.0

    @property
    def width(self) -> float:
        return self.right - self.left

    def endpoint(self, side: str) -> float:
        if side == "left":
            return self.working_left
        if side == "right":
            return self.working_right
        raise ValueError("side must be 'left' or 'right'")

    def endpoint_eig(self, side: str) -> EigenResult | None:
        return self.left_eig if side == "left" else self.right_eig


def _pencil_matrix(problem: GtrsProblem, lam: float) -> SparseSymmetric:
    return problem.objective.q.add_scaled(lam, problem.constraint.q)


def _common_nullspace_trivial(q1: SparseSymmetric, q2: SparseSymmetric,
                              tol: float = 1e-10) -> bool:
    """Check null(Q1) and null(Q2) intersect only at zero via Q1^2 + Q2^2."""
    scale = max(q1.norm_inf() ** 2 + q2.norm_inf() ** 2, 1e-300)
    if q1.n <= DENSE_LIMIT:
        d1, d2 = q1.to_dense(), q2.to_dense()
        s = d1 @ d1 + d2 @ d2
        smallest = float(np.linalg.eigvalsh(s)[0])
        return smallest > tol * scale
    # Large case: iterative estimate on the squared operator.
    op = spla.LinearOperator(
        (q1.n, q1.n),
        matvec=lambda x: q1.matvec(q1.matvec(x)) + q2.matvec(q2.matvec(x)))
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal((q1.n, 3))
    with np.errstate(all="ignore"):
        w, _ = spla.lobpcg(op, x0, largest=False, tol=tol * scale, maxiter=2000)
    return float(np.min(w)) > tol * scale


class _DefinitenessBudget:
    def __init__(self, budget: int):
        self.remaining = budget
        self.best_lam = None
        self.best_est = -math.inf

    def probe(self, problem: GtrsProblem, lam: float) -> tuple[bool, float]:
        if self.remaining <= 0:
            raise _BudgetExhausted
        self.remaining -= 1
        pencil = _pencil_matrix(problem, lam)
        flag, est = is_positive_definite(pencil)
        if est > self.best_est:
            self.best_est, self.best_lam = est, lam
        return flag, est


class _BudgetExhausted(Exception):
    pass


def find_definite_shift(problem: GtrsProblem, budget: int = 80) -> float:
    """A multiplier at which Q1 + lam * Q2 is positive definite.

    Probes lam = 0 first, then a geometric grid, then refines around the
    best probe by golden-section search on the (concave) smallest-eigenvalue
    estimate.  Nonnegative multipliers are preferred; negative ones are only
    probed for equality-constrained problems.  Raises when no definite point
    exists within the probe budget: an unbounded-below or assumption
    violation for genuinely indefinite families, an unsupported-problem
    error when the semidefinite set degenerates to a point.
    """
    if budget < 1:
        raise ValidationError("find_definite_shift requires budget >= 1")
    tracker = _DefinitenessBudget(budget)
    allow_negative = problem.sense is ConstraintSense.EQUALITY

    probes: list[float] = [0.0]
    mag = 1.0
    while mag <= 2.0 ** 24 and len(probes) < max(8, budget // 2):
        probes.append(mag)
        if allow_negative:
            probes.append(-mag)
        mag *= 2.0

    tried: list[tuple[float, float]] = []
    try:
        for lam in probes:
            ok, est = tracker.probe(problem, lam)
            if ok:
                return lam
            tried.append((lam, est))

        # Golden-section refinement around the best probe.  The smallest
        # eigenvalue is concave in lam, so the maximum over a bracket is
        # found reliably; we stop as soon as any definite point appears.
        tried.sort()
        lams = [t[0] for t in tried]
        ests = [t[1] for t in tried]
        i = int(np.argmax(ests))
        lo = lams[max(0, i - 1)]
        hi = lams[min(len(lams) - 1, i + 1)]
        if lo == hi:
            raise _BudgetExhausted
        a, b = lo, hi
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        ok, f1 = tracker.probe(problem, x1)
        if ok:
            return x1
        ok, f2 = tracker.probe(problem, x2)
        if ok:
            return x2
        while tracker.remaining > 0:
            if f1 < f2:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                ok, f2 = tracker.probe(problem, x2)
                if ok:
                    return x2
            else:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                ok, f1 = tracker.probe(problem, x1)
                if ok:
                    return x1
    except _BudgetExhausted:
        pass

    _raise_no_definite_point(problem, tracker.best_est)


def _raise_no_definite_point(problem: GtrsProblem, best_est: float):
    scale = 1.0 + problem.objective.q.norm_inf() + problem.constraint.q.norm_inf()
    if best_est > -1e-7 * scale:
        raise UnsupportedProblemError(
            "matrix family is semidefinite only on a degenerate (single-point) "
            "set; this problem class is not supported")
    if not _common_nullspace_trivial(problem.objective.q, problem.constraint.q):
        raise ValidationError(
            "common null space of the two quadratic forms is nontrivial; "
            "the problem is unbounded below or ill-posed")
    raise UnboundedError("problem is unbounded below: no admissible multiplier "
                         "makes the matrix family positive semidefinite")


def compute_interval(problem: GtrsProblem, shift: float,
                     tol: float = 1e-10) -> PencilInterval:
    """Endpoints of the semidefinite interval from the definite point ``shift``.

    With Q0 = Q1 + shift * Q2 positive definite, the largest eigenvalue u of
    the pair (-Q2, Q0) bounds how far the multiplier can grow (right endpoint
    shift + 1/u), and the largest eigenvalue of (Q2, Q0) bounds how far it
    can shrink.  A nonpositive eigenvalue on either side means the interval
    is unbounded in that direction.
    """
    q2 = problem.constraint.q
    q0 = _pencil_matrix(problem, shift)
    if q2.norm_inf() == 0.0:
        return PencilInterval(shift, -math.inf, math.inf,
                              IntervalKind.RIGHT_UNBOUNDED, problem.sense)

    right_eig = max_gen_eig(q2.scaled(-1.0), q0, tol=tol)
    left_eig = max_gen_eig(q2, q0, tol=tol)
    u_right, u_left = right_eig.value, left_eig.value
    u_floor = 1e-12 * max(abs(u_right), abs(u_left))

    right = shift + 1.0 / u_right if u_right > u_floor else math.inf
    left = shift - 1.0 / u_left if u_left > u_floor else -math.inf

    if math.isinf(right):
        kind = IntervalKind.RIGHT_UNBOUNDED
        right_eig = None
    elif math.isinf(left):
        kind = IntervalKind.LEFT_UNBOUNDED
        left_eig = None
    elif right - left <= 1e-10 * (1.0 + abs(shift)):
        kind = IntervalKind.SINGLETON
    else:
        kind = IntervalKind.TWO_SIDED
    return PencilInterval(shift, left, right, kind, problem.sense,
                          left_eig=left_eig, right_eig=right_eig)


def shifted_minimizer(problem: GtrsProblem, lam: float, tol: float = 1e-12,
                      max_iter: int | None = None) -> np.ndarray:
    """The stationary point x(lam) of objective + lam * constraint."""
    pencil = _pencil_matrix(problem, lam)
    rhs = -(problem.objective.b + lam * problem.constraint.b)
    return cg_solve(pencil, rhs, tol=tol, max_iter=max_iter)


def constraint_at_shift(problem: GtrsProblem, lam: float,
                        tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """x(lam) and the constraint value there.

    The constraint value is nonincreasing in lam on the interior of the
    semidefinite interval, which is what makes multiplier search possible.
    """
    x = shifted_minimizer(problem, lam, tol=tol)
    return x, problem.constraint.value(x)


def endpoint_null_vectors(problem: GtrsProblem, interval: PencilInterval,
                          side: str, residual_tol: float = 1e-6) -> list[np.ndarray]:
    """Null vectors of the family at a finite working endpoint.

    The eigenvectors that produced the endpoint are exactly the null vectors
    there, so they come for free; they are accepted after a residual check
    and re-orthonormalization.  Returns an empty list when the endpoint was
    clamped (the family is definite there) or vectors cannot be certified.
    """
    if side == "left" and interval.left_clamped:
        return []
    eig = interval.endpoint_eig(side)
    if eig is None or eig.cluster is None or eig.cluster.size == 0:
        return []
    lam = interval.endpoint(side)
    pencil = _pencil_matrix(problem, lam)
    scale = max(pencil.norm_inf(), 1e-300)
    q, _ = np.linalg.qr(eig.cluster)
    vectors = []
    for i in range(q.shape[1]):
        v = q[:, i]
        if np.linalg.norm(pencil.matvec(v)) <= residual_tol * scale:
            vectors.append(v)
    return vectors
