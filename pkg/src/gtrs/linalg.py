"""Sparse symmetric linear algebra kernels.

Everything here is matrix-free in spirit: the only dense paths are
fallbacks for small dimensions (``n <= DENSE_LIMIT``), where exact dense
factorizations are both faster and serve as trustworthy certificates.

Matrices are stored as the lower triangle in coordinate form and are
immutable after construction; sharing them across threads is safe.  The
iterative kernels (:func:`cg_solve`, :func:`max_gen_eig`) are plain
functions without hidden state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
from scipy.io import mmread, mmwrite
from scipy.sparse.linalg import lobpcg

from .errors import IterativeFailureError, ValidationError

# Dimension at or below which dense factorizations replace iterative kernels.
DENSE_LIMIT = 300

# Fixed seed for eigensolver starting blocks: solves must be reproducible.
_EIG_SEED = 0x5EED


class SparseSymmetric:
    """A real symmetric matrix stored as its lower triangle in COO form.

    Only entries with ``row >= col`` may be stored and (row, col) pairs must
    be unique.  A compressed full-matrix view is built lazily for products;
    that view is an internal optimization, not part of the data contract.
    """

    __slots__ = ("n", "rows", "cols", "vals", "_csr", "_norm_inf")

    def __init__(self, n: int, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValidationError("rows, cols, vals must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValidationError("index out of range for dimension %d" % n)
        if np.any(rows < cols):
            raise ValidationError("only the lower triangle (row >= col) may be stored")
        if rows.size:
            keys = rows * n + cols
            if np.unique(keys).size != keys.size:
                raise ValidationError("duplicate (row, col) entries")
        self.n = int(n)
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self._csr = None
        self._norm_inf = None

    # -- constructors -------------------------------------------------

    @classmethod
    def from_dense(cls, a, tol: float = 0.0) -> "SparseSymmetric":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("dense input must be square")
        if not np.allclose(a, a.T, atol=1e-12 * (1.0 + np.abs(a).max(initial=0.0))):
            raise ValidationError("dense input must be symmetric")
        n = a.shape[0]
        sym = 0.5 * (a + a.T)
        r, c = np.nonzero(np.tril(np.abs(sym) > tol))
        return cls(n, r, c, sym[r, c])

    @classmethod
    def from_diag(cls, d) -> "SparseSymmetric":
        d = np.asarray(d, dtype=np.float64)
        idx = np.arange(d.size)
        keep = d != 0.0
        return cls(d.size, idx[keep], idx[keep], d[keep])

    @classmethod
    def identity(cls, n: int) -> "SparseSymmetric":
        return cls.from_diag(np.ones(n))

    @classmethod
    def zeros(cls, n: int) -> "SparseSymmetric":
        return cls(n, [], [], [])

    # -- views ----------------------------------------------------------

    @property
    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            lower = sp.coo_matrix((self.vals, (self.rows, self.cols)),
                                  shape=(self.n, self.n))
            strict = sp.coo_matrix(
                (self.vals[self.rows != self.cols],
                 (self.cols[self.rows != self.cols], self.rows[self.rows != self.cols])),
                shape=(self.n, self.n))
            self._csr = (lower + strict).tocsr()
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    @property
    def nnz_lower(self) -> int:
        return self.vals.size

    def norm_inf(self) -> float:
        """Max absolute row sum of the full symmetric matrix."""
        if self._norm_inf is None:
            self._norm_inf = float(np.abs(self.csr).sum(axis=1).max()) if self.vals.size else 0.0
        return self._norm_inf

    # -- algebra ----------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    __matmul__ = matvec

    def add_scaled(self, scale: float, other: "SparseSymmetric") -> "SparseSymmetric":
        """Return ``self + scale * other`` as a new matrix."""
        if other.n != self.n:
            raise ValidationError("dimension mismatch in add_scaled")
        merged = sp.coo_matrix(
            (np.concatenate([self.vals, scale * other.vals]),
             (np.concatenate([self.rows, other.rows]),
              np.concatenate([self.cols, other.cols]))),
            shape=(self.n, self.n)).tocsr().tocoo()
        return SparseSymmetric(self.n, merged.row, merged.col, merged.data)

    def scaled(self, scale: float) -> "SparseSymmetric":
        return SparseSymmetric(self.n, self.rows, self.cols, scale * self.vals)


@dataclass
class EigenResult:
    """One extreme generalized eigenpair with its quality certificate."""

    value: float
    vector: np.ndarray
    residual: float
    converged: bool
    near_multiple: bool = False
    # Eigenvectors whose eigenvalues sit within the multiplicity band of
    # ``value``; used by the boundary-case machinery as null-space seeds.
    cluster: np.ndarray | None = field(default=None, repr=False)


def cg_solve(a, b: np.ndarray, tol: float = 1e-12, max_iter: int | None = None,
             *, projector=None) -> np.ndarray:
    """Conjugate gradient solve of ``a x = b`` for positive definite ``a``.

    ``a`` may be a :class:`SparseSymmetric` or anything with a ``matvec``.
    Stops when ``||a x - b|| <= tol * max(1, ||b||)``.  With ``projector``
    given, the solve is restricted to the subspace it maps onto (used for
    deflated systems whose operator is singular on the complement).

    Raises :class:`IterativeFailureError` carrying the best iterate when the
    residual target is not met within ``max_iter`` iterations.
    """
    if tol <= 0:
        raise ValidationError("cg_solve requires tol > 0")
    apply_a = a.matvec if hasattr(a, "matvec") else a
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if max_iter is None:
        max_iter = max(20 * n, 2000)
    if projector is not None:
        b = projector(b)
    target = tol * max(1.0, float(np.linalg.norm(b)))

    x = np.zeros(n)
    r = b.copy()
    rnorm = float(np.linalg.norm(r))
    if rnorm <= target:
        return x
    p = r.copy()
    rs = rnorm**2
    best_x, best_r = x.copy(), rnorm
    for _ in range(max_iter):
        ap = apply_a(p)
        if projector is not None:
            ap = projector(ap)
        pap = float(p @ ap)
        if pap <= 0:
            raise IterativeFailureError(
                "cg_solve hit non-positive curvature: operator is not positive definite",
                best=best_x, residual=best_r)
        alpha = rs / pap
        x = x + alpha * p
        r = r - alpha * ap
        rnorm = float(np.linalg.norm(r))
        if rnorm < best_r:
            best_x, best_r = x.copy(), rnorm
        if rnorm <= target:
            return x
        rs_new = rnorm**2
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise IterativeFailureError(
        "cg_solve: residual %.3e above target %.3e after %d iterations"
        % (best_r, target, max_iter),
        best=best_x, residual=best_r)


def _dense_pair(m: SparseSymmetric, n_mat: SparseSymmetric | None):
    md = m.to_dense()
    nd = n_mat.to_dense() if n_mat is not None else None
    return md, nd


def _cluster_mask(values: np.ndarray, top: float, rel_gap: float = 1e-8) -> np.ndarray:
    scale = max(1.0, abs(top))
    return np.abs(values - top) <= rel_gap * scale


def max_gen_eig(m: SparseSymmetric, n_mat: SparseSymmetric, tol: float = 1e-9,
                max_iter: int = 2000, block: int = 3) -> EigenResult:
    """Largest eigenvalue/vector of the definite pencil ``M v = lam N v``.

    ``n_mat`` must be positive definite.  Dense solve below
    :data:`DENSE_LIMIT`; a blocked LOBPCG iteration above it.  The result is
    flagged ``near_multiple`` when the top of the spectrum is numerically
    clustered (relative gap below 1e-8), and the clustered eigenvectors are
    returned so callers can reuse them as null-space candidates.
    """
    if tol <= 0:
        raise ValidationError("max_gen_eig requires tol > 0")
    dim = m.n
    if dim != n_mat.n:
        raise ValidationError("pencil matrices must share dimension")

    if dim <= DENSE_LIMIT:
        md, nd = _dense_pair(m, n_mat)
        w, v = dla.eigh(md, nd)
        top = float(w[-1])
        mask = _cluster_mask(w, top)
        vec = v[:, -1]
        vec = vec / np.linalg.norm(vec)
        resid = float(np.linalg.norm(md @ vec - top * (nd @ vec)))
        return EigenResult(top, vec, resid, True,
                           near_multiple=int(mask.sum()) > 1,
                           cluster=v[:, mask])

    rng = np.random.default_rng(_EIG_SEED)
    k = min(block, dim - 1)
    x0 = rng.standard_normal((dim, k))
    scale = max(1.0, m.norm_inf())
    with np.errstate(all="ignore"):
        w, v = lobpcg(m.csr, x0, B=n_mat.csr, largest=True,
                      tol=tol * scale, maxiter=max_iter)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    top = float(w[0])
    vec = v[:, 0] / np.linalg.norm(v[:, 0])
    resid = float(np.linalg.norm(m.matvec(vec) - top * n_mat.matvec(vec)))
    converged = resid <= 10 * tol * scale
    if not converged and resid > 1e-4 * scale:
        raise IterativeFailureError(
            "max_gen_eig: residual %.3e did not converge" % resid,
            best=EigenResult(top, vec, resid, False), residual=resid)
    mask = _cluster_mask(w, top)
    return EigenResult(top, vec, resid, converged,
                       near_multiple=int(mask.sum()) > 1,
                       cluster=v[:, mask])


def smallest_eig_estimate(a: SparseSymmetric, tol: float = 1e-8,
                          max_iter: int = 3000) -> float:
    """Estimate of the smallest eigenvalue of a symmetric matrix."""
    if a.n <= DENSE_LIMIT:
        return float(dla.eigvalsh(a.to_dense())[0])
    rng = np.random.default_rng(_EIG_SEED + 1)
    x0 = rng.standard_normal((a.n, min(3, a.n - 1)))
    scale = max(1.0, a.norm_inf())
    with np.errstate(all="ignore"):
        w, _ = lobpcg(a.csr, x0, largest=False, tol=tol * scale, maxiter=max_iter)
    return float(np.min(w))


def is_positive_definite(a: SparseSymmetric, tol: float | None = None) -> tuple[bool, float]:
    """Decide definiteness; returns ``(flag, smallest_eigenvalue_estimate)``.

    ``flag`` is true iff the smallest-eigenvalue estimate exceeds ``tol``
    (default ``1e-10 * (1 + ||A||_inf)``).  Small matrices are decided by a
    dense eigenvalue solve; large ones by a cheap negative-curvature CG probe
    followed by an iterative smallest-eigenvalue estimate only when the probe
    is inconclusive.
    """
    if tol is None:
        tol = 1e-10 * (1.0 + a.norm_inf())
    if a.n <= DENSE_LIMIT:
        est = float(dla.eigvalsh(a.to_dense())[0])
        return est > tol, est

    # Curvature probe: a CG run on a random right-hand side either exposes a
    # non-positive curvature direction (certified not PD) or converges, in
    # which case the smallest-eigenvalue estimate below is cheap to polish.
    rng = np.random.default_rng(_EIG_SEED + 2)
    rhs = rng.standard_normal(a.n)
    try:
        cg_solve(a, rhs, tol=1e-6, max_iter=min(4 * a.n, 4000))
    except IterativeFailureError as err:
        if "curvature" in str(err):
            est = smallest_eig_estimate(a)
            return est > tol, est
        # Slow convergence alone is not a definiteness verdict.
    est = smallest_eig_estimate(a)
    return est > tol, est


def null_space_basis(a: SparseSymmetric, tol: float = 1e-10,
                     seeds: np.ndarray | None = None) -> list[np.ndarray]:
    """Orthonormal basis of the numerical null space of a PSD matrix.

    Vectors span the eigenspace of eigenvalues with ``|lam| <= tol * ||A||``;
    the list is empty when the matrix is numerically nonsingular.  Raises
    :class:`ValidationError` when an eigenvalue below ``-tol * ||A||`` shows
    the matrix is indefinite.  ``seeds`` supplies starting vectors for the
    iterative path (e.g. eigenvector blocks carried over from the pencil
    analysis).
    """
    scale = max(a.norm_inf(), 1e-300)
    band = tol * scale
    if a.n <= DENSE_LIMIT:
        w, v = dla.eigh(a.to_dense())
        if w[0] < -band:
            raise ValidationError(
                "null_space_basis: matrix is indefinite (eigenvalue %.3e)" % w[0])
        cols = [v[:, i] for i in range(a.n) if abs(w[i]) <= band]
        return cols

    k = 4 if seeds is None else max(4, seeds.shape[1] + 1)
    k = min(k, a.n - 1)
    rng = np.random.default_rng(_EIG_SEED + 3)
    x0 = rng.standard_normal((a.n, k))
    if seeds is not None:
        x0[:, :seeds.shape[1]] = seeds
    with np.errstate(all="ignore"):
        w, v = lobpcg(a.csr, x0, largest=False, tol=tol * scale, maxiter=5000)
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    if w[0] < -10 * band:
        raise ValidationError(
            "null_space_basis: matrix is indefinite (eigenvalue %.3e)" % w[0])
    cols = v[:, np.abs(w) <= 10 * band]
    if cols.shape[1] == 0:
        return []
    q, _ = np.linalg.qr(cols)
    return [q[:, i] for i in range(q.shape[1])]


def coarse_max_eig(a: SparseSymmetric, precision: float = 0.1) -> float:
    """Largest-eigenvalue estimate M with ``lam_max - precision <= M <= lam_max``.

    The returned Rayleigh quotient underestimates the true value by at most
    the final residual norm, which is driven below ``precision``.
    """
    if a.n <= DENSE_LIMIT:
        return float(dla.eigvalsh(a.to_dense())[-1])
    rng = np.random.default_rng(_EIG_SEED + 4)
    x0 = rng.standard_normal((a.n, 2))
    w, v, hist = None, None, None
    maxiter = 200
    for _ in range(6):
        with np.errstate(all="ignore"):
            w, v = lobpcg(a.csr, x0, largest=True, tol=0.25 * precision,
                          maxiter=maxiter)
        top = int(np.argmax(w))
        vec = v[:, top] / np.linalg.norm(v[:, top])
        resid = float(np.linalg.norm(a.matvec(vec) - w[top] * vec))
        if resid <= precision:
            return float(w[top])
        x0 = v
        maxiter *= 2
    raise IterativeFailureError(
        "coarse_max_eig did not reach precision %.3g (residual %.3e)"
        % (precision, resid), residual=resid)


# -- Matrix Market I/O ----------------------------------------------------

def write_matrix_market(path, a: SparseSymmetric) -> None:
    """Write the lower triangle in symmetric coordinate format, 1-based."""
    lower = sp.coo_matrix((a.vals, (a.rows, a.cols)), shape=(a.n, a.n))
    mmwrite(str(path), lower, symmetry="symmetric", precision=17)


def read_matrix_market(path) -> SparseSymmetric:
    try:
        raw = mmread(str(path))
    except Exception as exc:
        raise ValidationError("failed to parse %s: %s" % (path, exc)) from exc
    if raw.shape[0] != raw.shape[1]:
        raise ValidationError("%s: matrix is not square" % path)
    coo = sp.tril(sp.coo_matrix(raw))
    full = sp.coo_matrix(raw)
    if abs(full - full.T).max() > 1e-12 * (1.0 + abs(full).max()):
        raise ValidationError("%s: matrix is not symmetric" % path)
    return SparseSymmetric(raw.shape[0], coo.row, coo.col, coo.data)
