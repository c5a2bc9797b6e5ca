"""Orthogonal Krylov projections, their monic polynomials, and shift optima.

The central operation takes a unit vector v and produces the component of
A^s v orthogonal to the Krylov space of order s. That component equals
p(A) v for a uniquely determined monic polynomial p of degree s whenever
the grade of v is at least s, and its norm is the minimum of ||q(A) v||
over all monic q of degree s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatchError,
    PreconditionError,
)
from .linalg import GRADE_TOL, Matrix, _arnoldi, check_unit, vector


@dataclass(frozen=True)
class MonicPolynomial:
    """Monic real polynomial p(z) = z^s + sum_j low_coeffs[j] * z^j."""

    low_coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.low_coeffs) < 1:
            raise PreconditionError("monic polynomial degree must be >= 1")
        object.__setattr__(self, "low_coeffs", tuple(float(c) for c in self.low_coeffs))

    @property
    def degree(self) -> int:
        return len(self.low_coeffs)

    def coeffs_desc(self) -> np.ndarray:
        """Coefficients highest power first, leading 1 included."""
        return np.concatenate(([1.0], np.asarray(self.low_coeffs)[::-1]))

    def __call__(self, z):
        return np.polyval(self.coeffs_desc(), z)

    def multiply(self, other: "MonicPolynomial") -> "MonicPolynomial":
        prod = np.polymul(self.coeffs_desc(), other.coeffs_desc())
        return MonicPolynomial(tuple(prod[1:][::-1]))


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of one orthogonal Krylov projection.

    ``w_tilde`` is the un-normalized projection, ``w`` its unit version
    (None when the projection vanished because the grade of v is <= s),
    ``poly`` the monic polynomial with w_tilde = poly(A) v, and ``norm``
    equals ||w_tilde||.
    """

    w_tilde: np.ndarray
    w: np.ndarray | None
    poly: MonicPolynomial
    norm: float


def _monic_coeffs(h: np.ndarray, s: int) -> tuple[float, ...]:
    """Recover the ascending coefficients of the optimal monic polynomial.

    Works in the coordinates of the orthonormal Krylov basis: the
    coordinate vectors of v, Av, ..., A^s v form a staircase matrix driven
    by the Hessenberg recurrence, and the least-squares system reduces to
    an s x s upper-triangular solve.
    """
    y = np.zeros(s + 1)
    y[0] = 1.0
    staircase = np.zeros((s + 1, s))
    for j in range(s):
        staircase[:, j] = y
        y = np.concatenate((h[: j + 2, : j + 1] @ y[: j + 1], np.zeros(s - 1 - j)))
    rhs = -y[:s]
    c = np.zeros(s)
    for i in range(s - 1, -1, -1):
        c[i] = (rhs[i] - staircase[i, i + 1 : s] @ c[i + 1 :]) / staircase[i, i]
    return tuple(c)


def _annihilating_coeffs(h: np.ndarray, k: int, s: int) -> tuple[float, ...]:
    # Characteristic polynomial of the k x k recurrence block, padded with a
    # factor z^(s-k); it annihilates v because the grade of v is k.
    chi = np.real(np.poly(h[:k, :k]))
    desc = np.concatenate((chi, np.zeros(s - k)))
    return tuple(desc[1:][::-1])


def _project(a: np.ndarray, v: np.ndarray, s: int, amax: float, tol: float = GRADE_TOL):
    """Hot-path projection: returns (norm, unit_vector_or_None, ascending coeffs)."""
    q, h, count, _ = _arnoldi(a, v, s + 1, tol, amax)
    if count <= s:
        return 0.0, None, _annihilating_coeffs(h, count, s)
    norm = 1.0
    for j in range(s):
        norm *= h[j + 1, j]
    return norm, q[:, s], _monic_coeffs(h, s)


def arnoldi_projection(A, v: np.ndarray, s: int) -> ProjectionResult:
    """Project A^s v onto the orthogonal complement of the order-s Krylov space.

    The result w_tilde lies in A^s v + K_s(A, v), is orthogonal to
    K_s(A, v), and has the smallest norm among all monic images q(A) v of
    degree s. It vanishes exactly when the grade of v is at most s, in
    which case the returned polynomial annihilates v.
    """
    A = Matrix.ensure(A)
    v = check_unit(vector(v))
    if v.shape[0] != A.n:
        raise DimensionMismatchError("vector length does not match matrix size")
    if s < 1:
        raise PreconditionError(f"projection degree must be >= 1, got {s}")
    if s >= A.n:
        raise PreconditionError(
            f"restart length exceeds dimension: s = {s} >= n = {A.n}"
        )
    norm, w, coeffs = _project(A.a, v, s, A.norm_max)
    poly = MonicPolynomial(coeffs)
    if w is None:
        return ProjectionResult(np.zeros(A.n), None, poly, 0.0)
    return ProjectionResult(norm * w, w, poly, norm)


def evaluate_monic(poly: MonicPolynomial, A, v: np.ndarray) -> np.ndarray:
    """Evaluate poly(A) v by Horner's scheme using only matrix-vector products."""
    A = Matrix.ensure(A)
    v = vector(v)
    if v.shape[0] != A.n:
        raise DimensionMismatchError("vector length does not match matrix size")
    return _horner(A.a, poly.low_coeffs, v)


def _horner(a: np.ndarray, low_coeffs, v: np.ndarray) -> np.ndarray:
    u = v.copy()
    for c in reversed(low_coeffs):
        u = a @ u + c * v
    return u


@dataclass(frozen=True)
class IdealShift:
    """Minimizer and minimum of the spectral norm ||A - alpha I|| over real alpha."""

    alpha: float
    value: float


def _spectral_norm(m: np.ndarray, rel_tol: float = 1e-10, max_iters: int = 50000) -> float:
    """Spectral norm by block power iteration on m^T m.

    A block of two vectors captures the near-degenerate top pair that
    appears at shift optima, where a single power vector converges
    arbitrarily slowly. The top Ritz value of the projected 2x2 problem is
    additionally Aitken-extrapolated (exact for a single residual decay
    mode), clipped to its valid range, and must stall for several
    consecutive iterations before the method returns.
    """
    n = m.shape[0]
    b = m.T @ m
    upper = float(np.trace(b))
    k = min(2, n)
    rng = np.random.default_rng(0x5EED)
    x, _ = np.linalg.qr(rng.standard_normal((n, k)))
    history: list[float] = []
    prev_ext = -1.0
    stall = 0
    for _ in range(max_iters):
        y = b @ x
        if float(np.abs(y).max()) <= 1e-300:
            return 0.0
        x, _ = np.linalg.qr(y)
        proj = x.T @ (b @ x)
        rq = float(np.linalg.eigvalsh(0.5 * (proj + proj.T))[-1])
        history.append(rq)
        ext = rq
        if len(history) >= 3:
            r0, r1, r2 = history[-3], history[-2], history[-1]
            denom = (r2 - r1) - (r1 - r0)
            if abs(denom) > 1e-30:
                ext = r2 - (r2 - r1) ** 2 / denom
            ext = min(max(ext, rq), upper)
        if abs(ext - prev_ext) <= rel_tol * max(ext, 1e-300):
            stall += 1
            if stall >= 4:
                return float(np.sqrt(max(ext, 0.0)))
        else:
            stall = 0
        prev_ext = ext
    raise ConvergenceFailure(
        "power iteration did not converge",
        diagnostics={
            "iterations": max_iters,
            "last_estimate": float(np.sqrt(max(prev_ext, 0.0))),
        },
    )


def _golden_min(f, lo: float, hi: float, width: float = 1e-12):
    """Golden-section minimization of a unimodal scalar function."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > width:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def ideal_arnoldi_s1(A, eigendata=None) -> IdealShift:
    """Best real shift: minimize ||A - alpha I|| in the spectral norm.

    The norm is evaluated by power iteration and the scalar minimization by
    golden-section search; the map alpha -> ||A - alpha I|| is convex, so
    the search is safe. When eigendata for a normal matrix is supplied the
    result is cross-checked against the smallest eigenvalue-enclosing disk
    with center on the real axis.
    """
    A = Matrix.ensure(A)
    n = A.n
    eye = np.eye(n)

    def f(alpha):
        return _spectral_norm(A.a - alpha * eye)

    half = max(A.norm_max * n, 1.0)
    alpha, value = _golden_min(f, -half, half)
    if eigendata is not None:
        pts = np.asarray(eigendata.points, dtype=complex)

        def disk(alpha):
            return float(np.abs(pts - alpha).max())

        alpha_d, value_d = _golden_min(disk, -half, half)
        if abs(value - value_d) > 1e-7 or abs(alpha - alpha_d) > 1e-5:
            raise ConvergenceFailure(
                "ideal shift cross-check failed against the eigenvalue disk",
                diagnostics={
                    "power_alpha": alpha,
                    "power_value": value,
                    "disk_alpha": alpha_d,
                    "disk_value": value_d,
                },
            )
        # The disk solution is exact for normal matrices; prefer it.
        alpha, value = alpha_d, value_d
    return IdealShift(alpha=float(alpha), value=float(value))


@dataclass(frozen=True)
class WorstCaseEstimate:
    """Multi-start lower bound for the worst-case projection norm.

    ``phi_hat`` is the largest projection norm found, attained at the unit
    vector ``vector``; ``per_start`` holds the per-start values after local
    refinement. The estimate never exceeds the true supremum because every
    candidate is a feasible unit vector.
    """

    phi_hat: float
    vector: np.ndarray
    per_start: tuple[float, ...]


def _proj_sq(a: np.ndarray, v: np.ndarray, s: int, amax: float):
    norm, w, coeffs = _project(a, v, s, amax)
    if w is None:
        return 0.0, None, coeffs
    return norm * norm, norm * w, coeffs


def _sphere_ascent(a, at, s, v, amax, grad_tol=1e-13, max_iters=400):
    """Maximize ||P_s(A; v) v||^2 on the unit sphere by projected ascent.

    The gradient uses the envelope theorem: with the optimal monic
    polynomial p frozen, the gradient of ||p(A) v||^2 is 2 p(A)^T p(A) v.
    """
    f, wt, coeffs = _proj_sq(a, v, s, amax)
    if wt is None:
        return f, v
    step = 1.0
    for _ in range(max_iters):
        g = 2.0 * _horner(at, coeffs, wt)
        r = g - (g @ v) * v
        rn = np.linalg.norm(r)
        if rn <= grad_tol * max(f, 1e-30):
            break
        moved = False
        while step > 1e-18:
            u = v + step * r
            u /= np.linalg.norm(u)
            f2, wt2, coeffs2 = _proj_sq(a, u, s, amax)
            if wt2 is not None and f2 > f + 1e-4 * step * rn * rn:
                v, f, wt, coeffs = u, f2, wt2, coeffs2
                step *= 1.6
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return f, v


def worst_case_arnoldi_estimate(
    A, s: int, n_starts: int, seed: int, cfg=None
) -> WorstCaseEstimate:
    """Seeded multi-start lower bound on the worst-case projection norm.

    Each start runs the cross iteration to its norm limit (which never
    exceeds the worst-case value) and is then refined by deterministic
    ascent on the sphere. Results are merged by maximum, first start
    winning ties, so the output is a pure function of the seed.
    """
    from .iterations import IterationConfig, aci_run

    A = Matrix.ensure(A)
    if n_starts < 1:
        raise PreconditionError(f"n_starts must be >= 1, got {n_starts}")
    from .linalg import grade, minimal_poly_degree

    d = minimal_poly_degree(A)
    if not 1 <= s < d:
        raise PreconditionError(
            f"requires 1 <= s < d(A): s = {s}, estimated d(A) = {d}"
        )
    if cfg is None:
        cfg = IterationConfig(max_steps=2000, diff_tol=1e-10)
    at = A.transpose.a
    best = -1.0
    best_v = None
    per_start = []
    for i in range(n_starts):
        rng = np.random.default_rng([seed, i])
        v0 = None
        for _ in range(100):
            cand = rng.standard_normal(A.n)
            cand /= np.linalg.norm(cand)
            if grade(A, cand) >= s + 1:
                v0 = cand
                break
        if v0 is None:
            raise PreconditionError("could not sample a start vector of sufficient grade")
        trace = aci_run(A, s, v0, cfg)
        tau = trace.tau_estimate
        f, v_ref = _sphere_ascent(A.a, at, s, trace.final_v, A.norm_max)
        val = max(tau, float(np.sqrt(f)))
        v_val = v_ref if f >= tau * tau else trace.final_v
        per_start.append(val)
        if val > best:
            best = val
            best_v = v_val
    return WorstCaseEstimate(phi_hat=best, vector=best_v, per_start=tuple(per_start))
