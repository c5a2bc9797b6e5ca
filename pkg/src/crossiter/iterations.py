"""Iteration drivers: cross iterations with A and A^T, and restarted gradients.

The cross iteration alternates normalized orthogonal Krylov projections
with A and with A^T. Its two norm sequences interlace and are
nondecreasing, so they share a limit; the recorded traces expose exactly
the quantities those statements are about (projection norms, Rayleigh
quotients for degree one, successive differences).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownError, PreconditionError
from .linalg import Matrix, a_inner, check_unit, grade, vector
from .projection import MonicPolynomial, _project

NAN = float("nan")


@dataclass(frozen=True)
class IterationConfig:
    """Run-control knobs shared by all drivers."""

    max_steps: int = 100_000
    diff_tol: float = 1e-12
    record_vectors: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise PreconditionError(f"max_steps must be >= 1, got {self.max_steps}")
        if not self.diff_tol > 0.0:
            raise PreconditionError(f"diff_tol must be positive, got {self.diff_tol}")


@dataclass
class AciStepRecord:
    """One full cross step: projection with A, then with A^T.

    ``diff_v`` is the distance between the incoming and outgoing v iterate;
    ``diff_w`` compares this step's w with the next step's and is NaN on
    the final record. ``alpha``/``beta`` hold the degree-one Rayleigh
    quotients and are NaN for larger degrees.
    """

    k: int
    norm_w_tilde: float
    norm_v_tilde: float
    alpha: float = NAN
    beta: float = NAN
    diff_v: float = NAN
    diff_w: float = NAN
    poly_v: MonicPolynomial | None = None
    poly_w: MonicPolynomial | None = None
    v_k: np.ndarray | None = None
    w_k: np.ndarray | None = None


@dataclass
class IterationTrace:
    """Full record of a cross-iteration run.

    ``tau_estimate`` is the last projection norm, the natural estimate of
    the common norm limit. For symmetric runs each record covers two half
    steps of the single-operator iteration, so ``records[k].v_k`` walks the
    even subsequence and ``diff_v`` is the even-subsequence difference.
    """

    records: list[AciStepRecord]
    terminated_by: str
    tau_estimate: float
    kind: str
    s: int
    v0: np.ndarray
    final_v: np.ndarray
    final_w: np.ndarray | None

    def merged_norms(self) -> np.ndarray:
        """Interleaved norm sequence ||w~_0||, ||v~_1||, ||w~_1||, ..."""
        out = np.empty(2 * len(self.records))
        for i, r in enumerate(self.records):
            out[2 * i] = r.norm_w_tilde
            out[2 * i + 1] = r.norm_v_tilde
        return out


def _cross_engine(step_a, step_b, v0, cfg, kind, s, step_check=None):
    records: list[AciStepRecord] = []
    v = v0

    def finish(reason, final_v, final_w):
        tau = records[-1].norm_v_tilde if records else 0.0
        return IterationTrace(
            records=records,
            terminated_by=reason,
            tau_estimate=tau,
            kind=kind,
            s=s,
            v0=v0.copy(),
            final_v=final_v,
            final_w=final_w,
        )

    prev_w = None
    terminated = "max_steps"
    for k in range(cfg.max_steps):
        nw, w, cw = step_a(v)
        if w is None:
            raise BreakdownError(
                f"projection with A broke down at step {k}: the iterate lost grade",
                trace=finish("breakdown", v, prev_w),
            )
        nv, v_next, cv = step_b(w)
        if v_next is None:
            raise BreakdownError(
                f"projection with A^T broke down at step {k}: the iterate lost grade",
                trace=finish("breakdown", v, w),
            )
        rec = AciStepRecord(
            k=k,
            norm_w_tilde=nw,
            norm_v_tilde=nv,
            alpha=-cw[0] if s == 1 else NAN,
            beta=-cv[0] if s == 1 else NAN,
            diff_v=float(np.linalg.norm(v_next - v)),
            poly_v=MonicPolynomial(cw),
            poly_w=MonicPolynomial(cv),
            v_k=v.copy() if cfg.record_vectors else None,
            w_k=w.copy() if cfg.record_vectors else None,
        )
        if prev_w is not None:
            records[-1].diff_w = float(np.linalg.norm(w - prev_w))
        records.append(rec)
        if step_check is not None:
            msg = step_check(rec)
            if msg:
                raise BreakdownError(msg, trace=finish("breakdown", v_next, w))
        prev_w = w
        v = v_next
        if rec.diff_v < cfg.diff_tol:
            terminated = "diff_tol_reached"
            break
    return finish(terminated, v, prev_w)


def _check_start(A: Matrix, s: int, v0: np.ndarray) -> np.ndarray:
    v0 = check_unit(vector(v0))
    if v0.shape[0] != A.n:
        raise PreconditionError("start vector length does not match matrix size")
    if s < 1:
        raise PreconditionError(f"restart length must be >= 1, got {s}")
    d = grade(A, v0)
    if d < s + 1:
        raise PreconditionError(
            f"start grade too small: d(A, v0) = {d} < s + 1 = {s + 1}; "
            "the iteration requires a unit start of grade at least s + 1"
        )
    return v0


def aci_run(A, s: int, v0, cfg: IterationConfig | None = None) -> IterationTrace:
    """Alternating cross iteration with A and A^T at restart length s.

    Each step projects A^s v onto the complement of the order-s Krylov
    space, normalizes, and repeats with A^T from the result. The trace
    records both projection norms per step; their merged sequence is
    nondecreasing and converges to the common limit tau.
    """
    A = Matrix.ensure(A)
    cfg = cfg or IterationConfig()
    v0 = _check_start(A, s, v0)
    a = A.a
    at = A.transpose.a
    amax = A.norm_max

    def step_a(x):
        return _project(a, x, s, amax)

    def step_b(x):
        return _project(at, x, s, amax)

    return _cross_engine(step_a, step_b, v0, cfg, "aci", s)


def aci_symmetric_run(A, s: int, v0, cfg: IterationConfig | None = None) -> IterationTrace:
    """Single-operator cross iteration for symmetric A.

    With A = A^T the two half steps coincide, so one record covers two
    applications of the projection map and the v fields walk the even
    subsequence; the stopping signal is the even difference
    ||v_{k+2} - v_k||, which is the quantity that actually converges.
    """
    A = Matrix.ensure(A)
    if not A.is_symmetric:
        raise PreconditionError("aci_symmetric_run requires a symmetric matrix")
    cfg = cfg or IterationConfig()
    v0 = _check_start(A, s, v0)
    a = A.a
    amax = A.norm_max

    def step(x):
        return _project(a, x, s, amax)

    return _cross_engine(step, step, v0, cfg, "aci_symmetric", s)


def aci1_rayleigh_step(A, v):
    """One symmetric degree-one step: shift by the Rayleigh quotient, normalize.

    Returns (v_next, rho, norm). Breaks down exactly when v is an
    eigenvector, i.e. the shifted image vanishes.
    """
    A = Matrix.ensure(A)
    if not A.is_symmetric:
        raise PreconditionError("aci1_rayleigh_step requires a symmetric matrix")
    v = check_unit(vector(v))
    if v.shape[0] != A.n:
        raise PreconditionError("vector length does not match matrix size")
    av = A.a @ v
    rho = float(v @ av)
    vt = av - rho * v
    norm = float(np.linalg.norm(vt))
    if norm <= 1e-12 * max(1.0, A.norm_max):
        raise BreakdownError(
            f"rayleigh step breakdown: v is an eigenvector (residual norm {norm:.3e})"
        )
    return vt / norm, rho, norm


def aci1_orthogonal_run(A, v0, cfg: IterationConfig | None = None) -> IterationTrace:
    """Degree-one cross iteration for an orthogonal matrix.

    Uses the Rayleigh-quotient form of the projections and checks the
    orthogonal-matrix identities per step: ||w~||^2 = 1 - alpha^2,
    ||v~||^2 = 1 - beta^2, and |beta| <= |alpha|. Violations beyond 1e-12
    raise a breakdown error carrying the partial trace.
    """
    A = Matrix.ensure(A)
    if not A.is_orthogonal:
        raise PreconditionError("aci1_orthogonal_run requires an orthogonal matrix")
    cfg = cfg or IterationConfig()
    v0 = _check_start(A, 1, v0)
    a = A.a
    at = A.transpose.a

    def half_step(op):
        def step(x):
            y = op @ x
            rho = float(x @ y)
            t = y - rho * x
            norm = float(np.linalg.norm(t))
            if norm <= 1e-14:
                return norm, None, (-rho,)
            if abs(norm * norm - (1.0 - rho * rho)) > 1e-12:
                raise BreakdownError(
                    "orthogonal norm identity violated: "
                    f"||t||^2 = {norm * norm!r} vs 1 - rho^2 = {1.0 - rho * rho!r}"
                )
            return norm, t / norm, (-rho,)

        return step

    def step_check(rec: AciStepRecord):
        if abs(rec.beta) > abs(rec.alpha) + 1e-12:
            return (
                "orthogonal Rayleigh ordering violated: "
                f"|beta| = {abs(rec.beta)!r} > |alpha| = {abs(rec.alpha)!r}"
            )
        return None

    return _cross_engine(
        half_step(a), half_step(at), v0, cfg, "aci1_orthogonal", 1, step_check
    )


@dataclass
class CgStepRecord:
    """State at the start of one restart cycle of the gradient method."""

    k: int
    y_k: np.ndarray
    residual_norm: float
    a_norm_error: float


@dataclass
class CgResult:
    """Records plus termination data of a restarted gradient run."""

    records: list[CgStepRecord]
    terminated_by: str
    solution_error: float


def optimum_s_gradient_run(A, b, x0, s: int, cfg: IterationConfig | None = None) -> CgResult:
    """Conjugate gradients restarted every s steps, with normalized residuals.

    Each cycle minimizes the A-norm error over the s-dimensional plane of
    steepest descent (the standard CG recurrence run for s inner steps) and
    records the normalized residual direction entering the cycle. Stops
    when the residual drops below diff_tol relative to the start, when the
    even-subsequence direction difference falls below diff_tol, or at
    max_steps cycles.
    """
    A = Matrix.ensure(A)
    cfg = cfg or IterationConfig()
    if not A.is_symmetric:
        raise PreconditionError("optimum_s_gradient_run requires a symmetric matrix")
    evals = np.linalg.eigvalsh(0.5 * (A.a + A.a.T))
    if evals[0] <= 0.0:
        raise PreconditionError(
            f"matrix is not positive definite: smallest eigenvalue {evals[0]!r}"
        )
    b = vector(b)
    x0 = vector(x0)
    if b.shape[0] != A.n or x0.shape[0] != A.n:
        raise PreconditionError("right-hand side or start length does not match matrix size")
    if s < 1:
        raise PreconditionError(f"restart length must be >= 1, got {s}")
    a = A.a
    r0 = b - a @ x0
    nr0 = float(np.linalg.norm(r0))
    if nr0 == 0.0:
        raise PreconditionError("already converged: initial residual is zero")
    d = grade(A, r0)
    if d < s + 1:
        raise PreconditionError(
            f"start grade too small: d(A, r0) = {d} < s + 1 = {s + 1}"
        )
    x_true = np.linalg.solve(a, b)
    x = x0.astype(float).copy()
    r = r0.copy()
    records: list[CgStepRecord] = []
    ys: list[np.ndarray] = []
    terminated = "max_steps"
    for k in range(cfg.max_steps):
        nr = float(np.linalg.norm(r))
        if nr == 0.0:
            terminated = "exact_solution"
            break
        y = r / nr
        e = x_true - x
        ae2 = float(e @ (a @ e))
        if ae2 < -1e-14 * max(1.0, A.norm_max) * float(e @ e):
            raise BreakdownError(
                f"A-inner product of the error went negative: {ae2!r}"
            )
        records.append(CgStepRecord(k, y, nr, math.sqrt(max(ae2, 0.0))))
        ys.append(y)
        if nr < cfg.diff_tol * nr0:
            terminated = "residual_tol"
            break
        if len(ys) >= 3 and float(np.linalg.norm(ys[-1] - ys[-3])) < cfg.diff_tol:
            terminated = "diff_tol_reached"
            break
        p = r.copy()
        rr = float(r @ r)
        for _ in range(s):
            q = a @ p
            pq = float(p @ q)
            if pq <= 0.0:
                raise BreakdownError(
                    f"loss of positive definiteness: p^T A p = {pq!r}"
                )
            t = rr / pq
            x = x + t * p
            r = r - t * q
            rr2 = float(r @ r)
            if rr2 == 0.0:
                break
            p = r + (rr2 / rr) * p
            rr = rr2
    e = x_true - x
    solution_error = math.sqrt(max(float(e @ (a @ e)), 0.0))
    return CgResult(records=records, terminated_by=terminated, solution_error=solution_error)
