"""Dense real linear algebra core: vectors, flagged matrices, Krylov bases, grades.

Everything is plain float64 numpy. Matrices are small and dense; the
orthogonalization is modified Gram-Schmidt with one reorthogonalization
pass, which keeps bases orthonormal to roughly machine precision at the
problem sizes this package targets (n up to a few hundred).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, PreconditionError, SpecError

# Vectors are bare float64 ndarrays; ``vector`` below is the validating
# constructor used at API boundaries.
Vector = np.ndarray

SYMMETRY_TOL = 1e-13
ORTHOGONALITY_TOL = 1e-12
GRADE_TOL = 1e-10


def vector(entries) -> np.ndarray:
    """Validate and copy a 1-d real array: finite entries, length >= 1."""
    v = np.array(entries, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise SpecError("vector entries must be finite")
    return v


def check_unit(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nv = float(np.linalg.norm(v))
    if abs(nv - 1.0) > tol:
        raise PreconditionError(f"vector must have unit norm, got ||v|| = {nv!r}")
    return v


@dataclass(frozen=True)
class Matrix:
    """Square dense real matrix with caller-asserted structure flags.

    The constructor verifies the flags: a symmetric matrix must satisfy
    max|A - A^T| <= 1e-13 and an orthogonal one max|A^T A - I| <= 1e-12.
    The stored array is an owned read-only copy.
    """

    a: np.ndarray
    is_symmetric: bool = False
    is_orthogonal: bool = False

    def __post_init__(self):
        arr = np.array(self.a, dtype=float, order="C")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"matrix must be square, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise SpecError("matrix entries must be finite")
        if self.is_symmetric:
            dev = float(np.abs(arr - arr.T).max())
            if dev > SYMMETRY_TOL:
                raise SpecError(f"symmetry flag violated: max|A - A^T| = {dev:.3e}")
        if self.is_orthogonal:
            gram = arr.T @ arr
            dev = float(np.abs(gram - np.eye(arr.shape[0])).max())
            if dev > ORTHOGONALITY_TOL:
                raise SpecError(f"orthogonality flag violated: max|A^T A - I| = {dev:.3e}")
        arr.setflags(write=False)
        object.__setattr__(self, "a", arr)

    @classmethod
    def ensure(cls, m) -> "Matrix":
        """Coerce an ndarray (flags auto-detected) or pass a Matrix through."""
        if isinstance(m, Matrix):
            return m
        arr = np.array(m, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"matrix must be square, got shape {arr.shape}")
        sym = bool(np.abs(arr - arr.T).max() <= SYMMETRY_TOL) if arr.size else True
        orth = bool(np.abs(arr.T @ arr - np.eye(arr.shape[0])).max() <= ORTHOGONALITY_TOL)
        return cls(arr, is_symmetric=sym, is_orthogonal=orth)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @cached_property
    def norm_max(self) -> float:
        return float(np.abs(self.a).max()) if self.a.size else 0.0

    @cached_property
    def transpose(self) -> "Matrix":
        if self.is_symmetric:
            return self
        return Matrix(self.a.T, is_symmetric=False, is_orthogonal=self.is_orthogonal)


@dataclass(frozen=True)
class KrylovBasis:
    """Orthonormal basis of a Krylov subspace plus its recurrence coefficients.

    ``columns`` is n x m with pairwise orthonormal columns spanning the
    Krylov space of dimension ``m``. ``h`` is the m x m upper-Hessenberg
    array of orthogonalization coefficients; column j (for j < m-1) holds
    the projections of A @ columns[:, j] onto columns[:, :j+1] and the
    subdiagonal entry h[j+1, j] is the norm of the orthogonalized remainder.
    The trailing column is only populated when the basis stopped at the
    grade of the start vector.
    """

    columns: np.ndarray
    m: int
    h: np.ndarray


def matvec(A, x: np.ndarray) -> np.ndarray:
    """Return A @ x with shape validation."""
    A = Matrix.ensure(A)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != A.n:
        raise DimensionMismatchError(
            f"matvec shape mismatch: matrix is {A.n}x{A.n}, vector has shape {x.shape}"
        )
    return A.a @ x


def a_inner(A, x: np.ndarray, y: np.ndarray) -> float:
    """Return x^T A y. The caller asserts that A is symmetric positive definite."""
    A = Matrix.ensure(A)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (A.n,) or y.shape != (A.n,):
        raise DimensionMismatchError(
            f"a_inner shape mismatch: matrix is {A.n}x{A.n}, vectors have shapes "
            f"{x.shape} and {y.shape}"
        )
    return float(x @ (A.a @ y))


def _arnoldi(a: np.ndarray, v: np.ndarray, m: int, tol: float, amax: float):
    """Build up to ``m`` orthonormal Krylov vectors for (a, v).

    Returns (q, h, count, broke). ``q`` has ``count`` columns, ``h`` is the
    square count x count recurrence array, and ``broke`` is True when the
    next candidate vector fell below the rank cutoff
    tol * max(1, amax) * (running max candidate norm), i.e. the grade of v
    is ``count``.
    """
    n = v.shape[0]
    m = min(m, n)
    q = np.empty((n, m), dtype=float)
    h = np.zeros((m + 1, m), dtype=float)
    nv = np.linalg.norm(v)
    q[:, 0] = v / nv
    ref = max(nv, 1.0)
    scale = tol * max(1.0, amax)
    count = 1
    broke = False
    for j in range(m - 1):
        u = a @ q[:, j]
        ref = max(ref, np.linalg.norm(u))
        for _ in range(2):
            for i in range(j + 1):
                c = q[:, i] @ u
                u = u - c * q[:, i]
                h[i, j] += c
        nu = np.linalg.norm(u)
        if nu <= scale * ref:
            broke = True
            break
        h[j + 1, j] = nu
        q[:, j + 1] = u / nu
        count += 1
    return q[:, :count], h[:count, :count], count, broke


def krylov_basis(A, v: np.ndarray, m: int, tol: float = GRADE_TOL) -> KrylovBasis:
    """Orthonormal basis of the order-m Krylov space of (A, v).

    Stops early at the grade of v, so the effective dimension of the result
    is min(m, d(A, v)).
    """
    A = Matrix.ensure(A)
    v = vector(v)
    if v.shape[0] != A.n:
        raise DimensionMismatchError("start vector length does not match matrix size")
    if m < 1:
        raise PreconditionError(f"basis size must be >= 1, got {m}")
    if np.linalg.norm(v) == 0.0:
        raise PreconditionError("zero start vector")
    q, h, count, _ = _arnoldi(A.a, v, m, tol, A.norm_max)
    q = q.copy()
    q.setflags(write=False)
    h = h.copy()
    h.setflags(write=False)
    return KrylovBasis(columns=q, m=count, h=h)


def grade(A, v: np.ndarray, tol: float = GRADE_TOL) -> int:
    """Dimension at which the Krylov sequence of (A, v) stops growing.

    Total function: returns 0 exactly when v = 0, and at most n otherwise.
    """
    A = Matrix.ensure(A)
    v = vector(v)
    if v.shape[0] != A.n:
        raise DimensionMismatchError("vector length does not match matrix size")
    if np.linalg.norm(v) == 0.0:
        return 0
    _, _, count, _ = _arnoldi(A.a, v, A.n, tol, A.norm_max)
    return count


def minimal_poly_degree(A, seed: int = 0, tol: float = GRADE_TOL) -> int:
    """Estimate the degree of the minimal polynomial of A.

    Takes the maximum grade over a few seeded random start vectors; a
    generic vector attains the exact degree with probability one.
    """
    A = Matrix.ensure(A)
    best = 0
    for i in range(3):
        rng = np.random.default_rng([seed, i])
        v = rng.standard_normal(A.n)
        v /= np.linalg.norm(v)
        best = max(best, grade(A, v, tol))
        if best == A.n:
            break
    return best
