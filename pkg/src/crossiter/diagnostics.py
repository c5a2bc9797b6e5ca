"""Trace analysis: interlacing checks, limit structure, rates, fixed points.

These verifiers turn the qualitative convergence statements about the
cross iteration into concrete residuals on finished traces: monotonicity
of the merged norm sequence, eigenbasis support and grade of the limit,
the degree-one norm relation tau^2 = a^2 (1 - a^2) (lambda_i - lambda_j)^2,
interpolation residuals of the double-step polynomial, and per-block
contraction factors for orthogonal matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .generators import EigenData
from .iterations import IterationTrace
from .linalg import Matrix, grade
from .projection import arnoldi_projection

INTERLACING_TOL = 1e-12


@dataclass(frozen=True)
class InterlacingViolation:
    """A decrease in the merged norm sequence: merged[index] dropped by ``drop``."""

    index: int
    drop: float


def check_interlacing(trace: IterationTrace, tol: float = INTERLACING_TOL):
    """Indices where the merged norm sequence decreases by more than ``tol``.

    An empty list confirms the interlaced monotonicity of the two
    projection-norm sequences on this run.
    """
    merged = trace.merged_norms()
    if merged.size == 0:
        raise PreconditionError("trace is empty")
    out = []
    for i in range(1, merged.size):
        drop = merged[i - 1] - merged[i]
        if drop > tol:
            out.append(InterlacingViolation(index=i, drop=float(drop)))
    return out


def count_stationary(trace: IterationTrace, tol: float = INTERLACING_TOL) -> int:
    """Number of merged-norm steps that are equalities up to ``tol``."""
    merged = trace.merged_norms()
    return int(np.sum(np.abs(np.diff(merged)) <= tol)) if merged.size else 0


@dataclass(frozen=True)
class LimitReport:
    """Structure of a converged limit vector.

    ``support`` lists eigenbasis coordinates above ``support_tol`` (None
    without eigendata), ``limit_grade`` is the grade of the limit,
    ``fixed_point_residual`` measures how far the limit is from being fixed
    under one full cross step. The remaining fields are populated when the
    corresponding relation applies (symmetric degree one, symmetric general
    degree, orthogonal degree one).
    """

    limit_vector: np.ndarray
    subsequence: str
    tau: float
    support: tuple[int, ...] | None
    limit_grade: int
    fixed_point_residual: float
    tau_relation_residual: float | None = None
    q_interpolation_residuals: tuple[float, ...] | None = None
    rayleigh_limit: float | None = None


def detect_limit(
    trace: IterationTrace,
    eigendata: EigenData | None = None,
    support_tol: float = 1e-8,
    matrix=None,
) -> LimitReport:
    """Extract and analyze the limit of a converged trace.

    The limit vector is the final iterate of the relevant subsequence (the
    even one for symmetric runs). Needs either eigendata or the plain
    matrix; eigenbasis fields are omitted in the latter case.
    """
    if trace.terminated_by != "diff_tol_reached":
        raise PreconditionError(
            f"no limit detected: trace terminated by {trace.terminated_by!r}"
        )
    if eigendata is not None:
        A = eigendata.matrix
    elif matrix is not None:
        A = Matrix.ensure(matrix)
    else:
        raise PreconditionError("detect_limit needs eigendata or the matrix")
    v_star = trace.final_v
    subsequence = "even" if trace.kind == "aci_symmetric" else "full"
    tau = trace.tau_estimate

    first = arnoldi_projection(A, v_star, trace.s)
    if first.w is None:
        raise PreconditionError("limit vector lost grade; cannot apply the cross map")
    second = arnoldi_projection(A.transpose, first.w, trace.s)
    if second.w is None:
        raise PreconditionError("limit vector lost grade; cannot apply the cross map")
    fixed_point_residual = float(np.linalg.norm(second.w - v_star))

    support = None
    if eigendata is not None:
        coords = eigendata.coords(v_star)
        support = tuple(int(i) for i in np.flatnonzero(np.abs(coords) > support_tol))

    report = LimitReport(
        limit_vector=v_star.copy(),
        subsequence=subsequence,
        tau=tau,
        support=support,
        limit_grade=grade(A, v_star),
        fixed_point_residual=fixed_point_residual,
    )

    if eigendata is None:
        return report

    tau_rel = None
    q_res = None
    rayleigh = None
    symmetric = eigendata.spec.kind in ("symmetric", "spd")
    if symmetric and trace.s == 1 and support is not None and len(support) == 2:
        tau_rel = verify_tau_relation(report, eigendata)
    if symmetric:
        q_res = tuple(float(r) for r in verify_q_interpolation(report, eigendata, trace.s))
    if trace.kind == "aci1_orthogonal" and trace.records:
        last = trace.records[-1]
        rayleigh = 0.5 * (last.alpha + last.beta)
    return LimitReport(
        limit_vector=report.limit_vector,
        subsequence=report.subsequence,
        tau=report.tau,
        support=report.support,
        limit_grade=report.limit_grade,
        fixed_point_residual=report.fixed_point_residual,
        tau_relation_residual=tau_rel,
        q_interpolation_residuals=q_res,
        rayleigh_limit=rayleigh,
    )


def verify_tau_relation(report: LimitReport, eigendata: EigenData) -> float:
    """Residual of the degree-one norm relation for a two-eigenvector limit.

    With the limit supported on eigenvalues lambda_i, lambda_j and first
    coordinate a, returns |tau^2 - a^2 (1 - a^2) (lambda_i - lambda_j)^2|.
    """
    if eigendata.spec.kind not in ("symmetric", "spd"):
        raise PreconditionError("tau relation applies to symmetric matrices only")
    if report.support is None or len(report.support) != 2:
        size = None if report.support is None else len(report.support)
        raise PreconditionError(f"tau relation needs support size 2, got {size}")
    i, j = report.support
    lam = eigendata.real_eigenvalues
    coords = eigendata.coords(report.limit_vector)
    alpha2 = float(coords[i]) ** 2
    predicted = alpha2 * (1.0 - alpha2) * (lam[i] - lam[j]) ** 2
    return float(abs(report.tau**2 - predicted))


def verify_q_interpolation(report: LimitReport, eigendata: EigenData, s: int):
    """Interpolation residuals of the double-step polynomial at the support.

    Forms Q = P(.; w*) P(.; v*) from a diagnostic double step at the limit
    and returns |Q(lambda_k) - tau^2| over all support eigenvalues; small
    residuals confirm that the limit is annihilated by Q - tau^2 I.
    """
    if eigendata.spec.kind not in ("symmetric", "spd"):
        raise PreconditionError("interpolation check applies to symmetric matrices only")
    if report.support is None or not report.support:
        raise PreconditionError("interpolation check needs a nonempty support")
    A = eigendata.matrix
    v_star = report.limit_vector
    first = arnoldi_projection(A, v_star, s)
    if first.w is None:
        raise PreconditionError("limit vector lost grade during the diagnostic step")
    second = arnoldi_projection(A, first.w, s)
    q = second.poly.multiply(first.poly)
    lam = eigendata.real_eigenvalues
    tau2 = report.tau**2
    return np.array([abs(q(lam[k]) - tau2) for k in report.support])


@dataclass(frozen=True)
class RateReport:
    """Per-block geometric decay versus the predicted contraction factors.

    Both dictionaries map block indices to squared-norm per-step ratios;
    ``empirical`` is fitted on the post-transient half of the trace,
    ``predicted`` evaluates the limit contraction factors at the smallest
    rotation cosine.
    """

    per_block_empirical_rho: dict[int, float]
    predicted_zeta: dict[int, float]
    transient_cutoff: int


def predicted_block_zeta(c1: float, c: float) -> float:
    """Limit squared-norm contraction of a rotation block with cosine c."""
    return (1.0 + 2.0 * c1 * (c1 - c) / (1.0 - c1 * c1)) ** 2


def predicted_unit_zeta(c1: float) -> float:
    """Limit squared-norm contraction of the [1] block."""
    return ((1.0 - c1) / (1.0 + c1)) ** 2


def estimate_contraction(trace: IterationTrace, eigendata: EigenData) -> RateReport:
    """Fit per-block decay of a converged orthogonal run against predictions.

    Needs recorded vectors. Fits log squared block norms over the final
    half of the steps; blocks whose norms fall below 1e-150 are fitted on
    the part above that floor.
    """
    spec = eigendata.spec
    if spec.kind != "orthogonal":
        raise PreconditionError("contraction estimate applies to orthogonal matrices")
    if spec.has_minus_one or any(c <= 0.0 for c, _ in spec.rotation_blocks):
        raise PreconditionError(
            "contraction estimate requires strictly positive rotation cosines "
            "and no [-1] block"
        )
    if not trace.records or trace.records[0].v_k is None:
        raise PreconditionError("vectors not recorded; rerun with record_vectors")
    rotation = [
        (idx, real)
        for idx, real in enumerate(eigendata.block_reals)
        if len(eigendata.blocks[idx]) == 2
    ]
    c1 = min(real for _, real in rotation)
    targets = [(idx, predicted_block_zeta(c1, real)) for idx, real in rotation if real > c1]
    targets += [
        (idx, predicted_unit_zeta(c1))
        for idx, real in enumerate(eigendata.block_reals)
        if len(eigendata.blocks[idx]) == 1
    ]
    cutoff = len(trace.records) // 2
    empirical: dict[int, float] = {}
    predicted: dict[int, float] = {}
    for idx, zeta in targets:
        cols = list(eigendata.blocks[idx])
        ks, logs = [], []
        for rec in trace.records[cutoff:]:
            nrm = np.linalg.norm(eigendata.coords(rec.v_k)[cols])
            if nrm > 1e-150:
                ks.append(rec.k)
                logs.append(2.0 * np.log(nrm))
        predicted[idx] = zeta
        if len(ks) >= 2:
            slope = np.polyfit(ks, logs, 1)[0]
            empirical[idx] = float(np.exp(slope))
        else:
            empirical[idx] = float("nan")
    return RateReport(
        per_block_empirical_rho=empirical,
        predicted_zeta=predicted,
        transient_cutoff=cutoff,
    )


def check_zero_fov_case(trace: IterationTrace, eigendata: EigenData):
    """Tail averages of the two Rayleigh sequences for a mixed-sign spectrum.

    Checks the hypotheses first: some rotation block is populated in the
    start vector, and some populated block has a real part of opposite (or
    zero) sign product with it. Returns (alpha_tail, beta_tail), which
    converge to zero under those hypotheses.
    """
    spec = eigendata.spec
    if spec.kind != "orthogonal":
        raise PreconditionError("zero field-of-values check applies to orthogonal matrices")
    norms0 = eigendata.block_norms(trace.v0)
    populated = [i for i, nrm in enumerate(norms0) if nrm > 1e-12]
    rot_populated = [i for i in populated if len(eigendata.blocks[i]) == 2]
    if not rot_populated:
        raise PreconditionError(
            "hypotheses unmet: no rotation block is populated in the start vector"
        )
    reals = eigendata.block_reals
    ok = any(
        reals[l] * reals[j] <= 0.0
        for l in rot_populated
        for j in populated
        if j != l or reals[l] == 0.0
    )
    if not ok:
        raise PreconditionError(
            "hypotheses unmet: no populated block pair has non-positive "
            "product of real parts"
        )
    tail = trace.records[-max(1, len(trace.records) // 10) :]
    alpha_tail = float(np.mean([r.alpha for r in tail]))
    beta_tail = float(np.mean([r.beta for r in tail]))
    return alpha_tail, beta_tail
