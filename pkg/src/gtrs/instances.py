"""Seeded random test-instance generation.

The objective matrix is built with an exactly prescribed spectrum (log-
spaced between 1 and the target condition number) and sparsified by a
fixed number of random plane rotations, which preserve the spectrum and
roughly respect the density target.  The constraint matrix is random
sparse symmetric with forced sign-indefiniteness.  The constraint constant
is then chosen to pin the optimal multiplier where the requested case
needs it: strictly inside the admissible interval (easy), next to an
endpoint (hard1), or exactly at an endpoint with the degenerate
orthogonality planted (hard2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import SparseSymmetric
from .model import GtrsProblem, QuadraticForm
from .pencil import compute_interval, shifted_minimizer

CASES = ("easy", "hard1", "hard2")


@dataclass(frozen=True)
class InstanceSpec:
    """Parameters of one generated instance; equal specs generate equal data."""

    n: int
    density: float = 0.01
    cond: float = 10.0
    case: str = "easy"
    seed: int = 0
    kind: str = "gtrs"  # "gtrs" or "ip"
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("instance dimension must be >= 2")
        if not 0.0 < self.density <= 1.0:
            raise ValidationError("density must lie in (0, 1]")
        if self.cond < 1.0:
            raise ValidationError("condition number must be >= 1")
        if self.case not in CASES:
            raise ValidationError("case must be one of %s" % (CASES,))
        if self.kind not in ("gtrs", "ip"):
            raise ValidationError("kind must be 'gtrs' or 'ip'")


def _rotated_spectrum(diag: np.ndarray, rotations: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Conjugate a diagonal matrix by random plane rotations."""
    a = np.diag(diag).astype(np.float64)
    n = diag.size
    for _ in range(rotations):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        theta = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        ri, rj = a[i].copy(), a[j].copy()
        a[i] = c * ri - s * rj
        a[j] = s * ri + c * rj
        ci, cj = a[:, i].copy(), a[:, j].copy()
        a[:, i] = c * ci - s * cj
        a[:, j] = s * ci + c * cj
    return 0.5 * (a + a.T)


def _spd_with_condition(n: int, cond: float,
                        rng: np.random.Generator) -> SparseSymmetric:
    spectrum = np.logspace(0.0, np.log10(cond), n) if cond > 1.0 else np.ones(n)
    dense = _rotated_spectrum(spectrum, 3 * n, rng)
    r, c = np.nonzero(np.tril(dense))
    return SparseSymmetric(n, r, c, dense[r, c])


def _sparse_indefinite(n: int, density: float,
                       rng: np.random.Generator) -> SparseSymmetric:
    target = max(n, int(round(density * n * (n + 1) / 2)))
    rows = rng.integers(0, n, size=3 * target)
    cols = rng.integers(0, n, size=3 * target)
    swap = rows < cols
    rows[swap], cols[swap] = cols[swap], rows[swap]
    keys, first = np.unique(rows * n + cols, return_index=True)
    order = np.sort(first)[:target]
    rows, cols = rows[order], cols[order]
    vals = rng.standard_normal(rows.size)

    entries = {(int(r), int(c)): float(v) for r, c, v in zip(rows, cols, vals)}
    # Force indefiniteness: a positive and a negative diagonal entry give
    # Rayleigh quotients of both signs.
    p = int(rng.integers(0, n))
    q = int(rng.integers(0, n - 1))
    if q >= p:
        q += 1
    spread = 1.0 + float(np.abs(vals).max(initial=0.0))
    entries[(p, p)] = spread
    entries[(q, q)] = -spread
    r = np.array([k[0] for k in entries], dtype=np.int64)
    c = np.array([k[1] for k in entries], dtype=np.int64)
    v = np.array(list(entries.values()))
    return SparseSymmetric(n, r, c, v)


def generate_instance(spec: InstanceSpec):
    """Build the instance described by ``spec``.

    Returns a :class:`GtrsProblem` for kind "gtrs", or the tuple
    ``(A, a, B, c1, c2)`` of interval-constrained problem data for kind
    "ip".  The same spec always produces bitwise-identical output.
    """
    rng = np.random.default_rng(spec.seed)
    q1 = _spd_with_condition(spec.n, spec.cond, rng)
    q2 = _sparse_indefinite(spec.n, spec.density, rng)
    # Linear terms are scaled up so optimal values are O(100): the stock
    # termination constants are absolute, and instances whose values hover
    # near zero stop them long before the relative accuracy they were
    # picked for.
    b1 = 10.0 * rng.standard_normal(spec.n)
    b2 = 2.5 * rng.standard_normal(spec.n)

    if spec.kind == "ip":
        a_lin = rng.standard_normal(spec.n)
        if spec.c1 is not None and spec.c2 is not None:
            c1, c2 = float(spec.c1), float(spec.c2)
        else:
            from .linalg import cg_solve
            x0 = cg_solve(q1, a_lin, tol=1e-12)
            v0 = float(x0 @ q2.matvec(x0))
            c1, c2 = v0 - 1.0, v0 + 1.0
        return q1, a_lin, q2, c1, c2

    objective = QuadraticForm(q1, b1)
    base = GtrsProblem(objective, QuadraticForm(q2, b2, 0.0))
    interval = compute_interval(base, 0.0)  # q1 is positive definite
    left, right = interval.working_left, interval.right
    width = right - left

    if spec.case == "easy":
        lam_t = left + rng.uniform(0.2, 0.6) * width
    elif spec.case == "hard1":
        # Near-degenerate: shrink the linear term's component along the
        # endpoint null direction to a small fraction tau, then place the
        # multiplier at a matched distance from the endpoint so the
        # stationary point stays moderate while the curvature along the
        # near-null direction is ~tau at the solution.
        vmat, _ = np.linalg.qr(interval.right_eig.cluster)
        a2 = b1 + right * b2
        tau = 10.0 ** rng.uniform(-1.7, -1.0)
        b1 = b1 - (1.0 - tau) * (vmat @ (vmat.T @ a2))
        base = GtrsProblem(QuadraticForm(q1, b1), QuadraticForm(q2, b2, 0.0))
        v = vmat[:, 0]
        coupling = abs(float(v @ (b1 + right * b2)))
        curve = abs(float(v @ q2.matvec(v)))
        dist = rng.uniform(0.5, 2.0) * coupling / max(curve, 1e-300)
        dist = min(max(dist, 1e-8 * width), 0.4 * width)
        lam_t = right - dist
    else:
        lam_t = right

    if spec.case == "hard2":
        vmat, _ = np.linalg.qr(interval.right_eig.cluster)
        a2 = b1 + right * b2
        b1 = b1 - vmat @ (vmat.T @ a2)
        base = GtrsProblem(QuadraticForm(q1, b1), QuadraticForm(q2, b2, 0.0))
        pencil = q1.add_scaled(right, q2)

        def deflate(z):
            return z - vmat @ (vmat.T @ z)

        from .linalg import cg_solve
        x_ref = cg_solve(pencil, -deflate(b1 + right * b2), tol=1e-12,
                         projector=deflate)
        kappa = rng.uniform(0.05, 0.25)
        c = kappa * (1.0 + abs(base.constraint.value(x_ref))) \
            - base.constraint.value(x_ref)
    else:
        x_t = shifted_minimizer(base, lam_t, tol=1e-12,
                                max_iter=max(200 * spec.n, 50_000))
        c = -base.constraint.value(x_t)

    return GtrsProblem(QuadraticForm(q1, b1), QuadraticForm(q2, b2, float(c)))
