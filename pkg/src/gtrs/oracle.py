"""Dense reference solver, independent of the first-order pipeline.

Works entirely from dense factorizations: the multiplier interval comes
from dense generalized eigenvalues, the optimal multiplier from bisection
on the (monotone) constraint value along the stationary-point curve, and
degenerate endpoints from a pseudoinverse solve plus a null-space
correction.  Dimension is capped so the dense path stays cheap; the point
of this module is trustworthiness, not speed.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as dla

from .errors import (NumericalError, UnboundedError, UnsupportedProblemError,
                     ValidationError)
from .model import ConstraintSense, GtrsProblem

ORACLE_LIMIT = 300

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _dense(problem: GtrsProblem):
    q1 = problem.objective.q.to_dense()
    q2 = problem.constraint.q.to_dense()
    return q1, q2, problem.objective.b, problem.constraint.b, problem.constraint.c


def _f2(problem, x) -> float:
    return problem.constraint.value(x)


def _find_shift_dense(q1, q2, allow_negative: bool) -> float | None:
    def smallest(lam):
        return float(dla.eigvalsh(q1 + lam * q2)[0])

    scale = 1.0 + float(np.abs(q1).max(initial=0.0) + np.abs(q2).max(initial=0.0))
    tol = 1e-12 * scale
    probes = [0.0]
    mag = 1.0
    while mag <= 2.0 ** 20:
        probes.append(mag)
        if allow_negative:
            probes.append(-mag)
        mag *= 2.0
    vals = []
    for lam in probes:
        est = smallest(lam)
        if est > tol:
            return lam
        vals.append((lam, est))
    vals.sort()
    i = int(np.argmax([v for _, v in vals]))
    a = vals[max(0, i - 1)][0]
    b = vals[min(len(vals) - 1, i + 1)][0]
    for _ in range(200):
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1, f2v = smallest(x1), smallest(x2)
        if f1 > tol:
            return x1
        if f2v > tol:
            return x2
        if f1 < f2v:
            a = x1
        else:
            b = x2
        if b - a <= 1e-14 * (1.0 + abs(a) + abs(b)):
            break
    return None


def _null_split(a: np.ndarray, rhs: np.ndarray, ntol: float = 1e-9):
    """Pseudoinverse solve of a x = -rhs with the null basis of a."""
    w, u = dla.eigh(a)
    scale = max(np.abs(w).max(initial=0.0), 1e-300)
    null_mask = np.abs(w) <= ntol * scale
    coeff = u.T @ rhs
    null_norm = float(np.linalg.norm(coeff[null_mask]))
    inv = np.zeros_like(w)
    inv[~null_mask] = 1.0 / w[~null_mask]
    x_hat = -(u @ (inv * coeff))
    basis = u[:, null_mask]
    return x_hat, basis, null_norm


def _walk_dense(problem, x, basis) -> np.ndarray:
    """Move along the first null direction until the constraint vanishes."""
    v = basis[:, 0]
    curve = float(v @ problem.constraint.q.matvec(v))
    slope = float(problem.constraint.gradient(x) @ v)
    value = _f2(problem, x)
    a, b, c = 0.5 * curve, slope, value
    if abs(a) <= 1e-300:
        if b == 0.0:
            raise NumericalError("oracle null walk is degenerate")
        return x + (-c / b) * v
    disc = max(b * b - 4.0 * a * c, 0.0)
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b if b != 0.0 else 1.0))
    roots = [r for r in (q / a, c / q if q != 0.0 else math.inf) if math.isfinite(r)]
    theta = min(roots, key=lambda r: (abs(r), -r))
    return x + theta * v


def _polish(problem, x, tol) -> np.ndarray:
    for _ in range(5):
        value, grad = problem.constraint.value_and_gradient(x)
        if abs(value) <= tol * (1.0 + abs(problem.constraint.c)):
            break
        gn2 = float(grad @ grad)
        if gn2 <= 1e-300:
            break
        x = x - (value / gn2) * grad
    return x


def oracle_solve(problem: GtrsProblem, tol: float = 1e-10
                 ) -> tuple[float, np.ndarray]:
    """Reference optimal value and solution by dense bisection.

    Only supports dimensions up to ORACLE_LIMIT.  Raises UnboundedError for
    problems without an admissible semidefinite multiplier.
    """
    if problem.n > ORACLE_LIMIT:
        raise UnsupportedProblemError(
            "oracle supports n <= %d (got %d)" % (ORACLE_LIMIT, problem.n))
    problem.validate()
    q1, q2, b1, b2, _ = _dense(problem)
    allow_negative = problem.sense is ConstraintSense.EQUALITY

    shift = _find_shift_dense(q1, q2, allow_negative)
    if shift is None:
        raise UnboundedError("oracle: no definite multiplier; problem is "
                             "unbounded below or degenerate")
    q0 = q1 + shift * q2

    if np.abs(q2).max(initial=0.0) == 0.0:
        u_right = u_left = -1.0
    else:
        u_right = float(dla.eigh(-q2, q0, eigvals_only=True)[-1])
        u_left = float(dla.eigh(q2, q0, eigvals_only=True)[-1])
    right = shift + 1.0 / u_right if u_right > 1e-14 else math.inf
    left = shift - 1.0 / u_left if u_left > 1e-14 else -math.inf
    if problem.sense is ConstraintSense.INEQUALITY:
        left_clamped = left < 0.0
        left = max(0.0, left)
    else:
        left_clamped = False
    if right - left <= 1e-10 * (1.0 + abs(shift)):
        raise UnsupportedProblemError("oracle: degenerate multiplier interval")

    def x_of(lam: float) -> np.ndarray:
        a = q1 + lam * q2
        rhs = -(b1 + lam * b2)
        c_fac, low = dla.cho_factor(a)
        return dla.cho_solve((c_fac, low), rhs)

    def gamma(lam: float) -> float:
        return _f2(problem, x_of(lam))

    # Bracket endpoints, keeping a safety margin off genuine (singular)
    # endpoints.  A clamped endpoint is strictly inside the raw interval,
    # so it is evaluated exactly.
    width = (right - left) if math.isfinite(right - left) else 1.0 + abs(left)
    margin = 1e-7 * width
    lo = left if left_clamped else left + margin
    if math.isinf(right):
        hi = max(lo + 1.0, 2.0 * abs(lo) + 1.0)
        g_hi = gamma(hi)
        grown = 0
        while g_hi > 0.0 and grown < 60:
            prev = g_hi
            hi *= 2.0
            g_hi = gamma(hi)
            grown += 1
            if abs(g_hi - prev) <= 1e-14 * (1.0 + abs(prev)) and g_hi > 0.0:
                raise ValidationError("oracle: constraint value stays positive "
                                      "for all multipliers; problem infeasible "
                                      "or its optimum unattainable")
        if g_hi > 0.0:
            raise ValidationError("oracle: failed to bracket the multiplier")
    else:
        hi = right - margin

    band = tol * (1.0 + abs(problem.constraint.c))
    g_lo = gamma(lo)
    g_hi = gamma(hi)

    if g_lo <= band:
        # Multiplier pinned at the left end.
        if left_clamped or (abs(left) <= 1e-14 and
                            problem.sense is ConstraintSense.INEQUALITY):
            x = x_of(left)
            if _f2(problem, x) > band:
                raise NumericalError("oracle: inconsistent left-end solve")
            return problem.objective.value(x), x
        a = q1 + left * q2
        x_hat, basis, null_norm = _null_split(a, b1 + left * b2)
        if basis.shape[1] == 0 or null_norm > 1e-6 * (1.0 + np.linalg.norm(b1)):
            raise NumericalError("oracle: left endpoint is not degenerate but "
                                 "the constraint never crosses zero")
        x = x_hat
        if problem.sense is ConstraintSense.EQUALITY or left > 0.0:
            x = _walk_dense(problem, x_hat, basis)
            x = _polish(problem, x, tol)
        return problem.objective.value(x), x

    if g_hi >= -band:
        # Multiplier pinned at the right end.
        if math.isinf(right):
            raise ValidationError("oracle: unbounded multiplier bracket")
        a = q1 + right * q2
        x_hat, basis, null_norm = _null_split(a, b1 + right * b2)
        if basis.shape[1] == 0 or null_norm > 1e-6 * (1.0 + np.linalg.norm(b1)):
            raise NumericalError("oracle: right endpoint is not degenerate but "
                                 "the constraint never crosses zero")
        x = x_hat
        if _f2(problem, x) > band or problem.sense is ConstraintSense.EQUALITY:
            x = _walk_dense(problem, x_hat, basis)
            x = _polish(problem, x, tol)
        return problem.objective.value(x), x

    # Interior crossing: bisection on the monotone constraint value.
    lam_tol = 1e-13 * (1.0 + abs(hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = gamma(mid)
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= lam_tol:
            break
    x = x_of(0.5 * (lo + hi))
    x = _polish(problem, x, tol)
    return problem.objective.value(x), x
