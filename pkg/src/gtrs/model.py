"""Problem data model: quadratic forms and the constrained problem."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import SparseSymmetric


@dataclass(frozen=True)
class QuadraticForm:
    """q(x) = 1/2 x'Qx + b'x + c over a sparse symmetric Q."""

    q: SparseSymmetric
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        if self.b.shape != (self.q.n,):
            raise ValidationError("linear term has wrong dimension")

    @property
    def n(self) -> int:
        return self.q.n

    def value(self, x: np.ndarray) -> float:
        qx = self.q.matvec(x)
        return 0.5 * float(x @ qx) + float(self.b @ x) + self.c

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.q.matvec(x) + self.b

    def value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        qx = self.q.matvec(x)
        return 0.5 * float(x @ qx) + float(self.b @ x) + self.c, qx + self.b

    def add_scaled(self, scale: float, other: "QuadraticForm") -> "QuadraticForm":
        """This form plus ``scale`` times another, as a new form."""
        return QuadraticForm(self.q.add_scaled(scale, other.q),
                             self.b + scale * other.b,
                             self.c + scale * other.c)


class ConstraintSense(enum.Enum):
    INEQUALITY = "ineq"
    EQUALITY = "eq"


@dataclass(frozen=True)
class GtrsProblem:
    """Minimize ``objective`` subject to ``constraint <= 0`` (or ``= 0``).

    The objective carries no constant term; any constant shift belongs in the
    constraint where it changes the feasible set.
    """

    objective: QuadraticForm
    constraint: QuadraticForm
    sense: ConstraintSense = ConstraintSense.INEQUALITY

    def __post_init__(self):
        if self.objective.n != self.constraint.n:
            raise ValidationError("objective and constraint dimensions differ")
        if self.objective.c != 0.0:
            raise ValidationError("objective must have zero constant term")

    @property
    def n(self) -> int:
        return self.objective.n

    def validate(self) -> None:
        for name, form in (("objective", self.objective), ("constraint", self.constraint)):
            if not np.all(np.isfinite(form.b)) or not np.isfinite(form.c):
                raise ValidationError(f"{name} has non-finite coefficients")
            if form.q.vals.size and not np.all(np.isfinite(form.q.vals)):
                raise ValidationError(f"{name} matrix has non-finite entries")

    def shifted(self, lam: float) -> QuadraticForm:
        """The combined form ``objective + lam * constraint``."""
        return self.objective.add_scaled(lam, self.constraint)


def worked_example() -> GtrsProblem:
    """The two-variable instance used throughout the tests.

    Minimize 3x1^2 - x2^2/2 - x2 subject to -x1^2 + x2^2/2 + x2 + 1 <= 0.
    Its optimal value is 2, attained at (+-sqrt(2)/2, -1).
    """
    q1 = SparseSymmetric.from_diag([6.0, -1.0])
    q2 = SparseSymmetric.from_diag([-2.0, 1.0])
    f1 = QuadraticForm(q1, np.array([0.0, -1.0]))
    f2 = QuadraticForm(q2, np.array([0.0, 1.0]), 1.0)
    return GtrsProblem(f1, f2)
