"""Command-line entry point: configure runs, execute them, emit traces and reports.

Outputs are a per-step CSV trace, a JSON state sidecar carrying the
vectors the diagnostics need, and a JSON report. All numbers round-trip
exactly (CSV uses 17 significant digits, JSON uses shortest exact repr),
so re-analyzing stored outputs reproduces the report byte for byte.

Exit codes: 0 success, 2 configuration error, 3 precondition violation,
4 numerical breakdown or non-convergence of an inner solver.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .diagnostics import (
    check_interlacing,
    check_zero_fov_case,
    count_stationary,
    detect_limit,
    estimate_contraction,
)
from .errors import (
    BreakdownError,
    ConvergenceFailure,
    CrossIterError,
    PreconditionError,
    SpecError,
)
from .generators import EigenData, SpectrumSpec, make_matrix, random_unit_start, zero_in_fov
from .iterations import (
    AciStepRecord,
    CgResult,
    CgStepRecord,
    IterationConfig,
    IterationTrace,
    aci1_orthogonal_run,
    aci_run,
    aci_symmetric_run,
    optimum_s_gradient_run,
)
from .linalg import Matrix
from .projection import worst_case_arnoldi_estimate

ALGORITHMS = ("aci", "aci_symmetric", "aci1_orthogonal", "cg")
ACI_CSV_HEADER = "k,norm_w_tilde,norm_v_tilde,alpha,beta,diff_v,diff_w"
CG_CSV_HEADER = "k,residual_norm,a_norm_error,diff_y_even"
STATE_FORMAT = "crossiter-trace-state-v1"
CLUSTER_ANGLE_TOL = 1e-6


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return None
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _state_path_for(trace_path: str) -> str:
    base = trace_path[:-4] if trace_path.endswith(".csv") else trace_path
    return base + "_state.json"


# ---------------------------------------------------------------------------
# configuration


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise SpecError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"config is not valid JSON: {exc}") from exc


def _load_matrix_operand(config: dict):
    """Return (Matrix, eigendata or None, spec dict or None)."""
    if "spec" in config:
        spec = SpectrumSpec.from_json(config["spec"])
        matrix, eigendata = make_matrix(spec)
        return matrix, eigendata, spec.to_json()
    if "matrix" in config:
        matrix = Matrix.ensure(np.asarray(config["matrix"], dtype=float))
        return matrix, None, None
    if "matrix_path" in config:
        path = config["matrix_path"]
        if path.endswith(".npy"):
            arr = np.load(path)
        else:
            with open(path) as handle:
                arr = np.asarray(json.load(handle), dtype=float)
        return Matrix.ensure(arr), None, None
    raise SpecError("config needs one of 'spec', 'matrix', or 'matrix_path'")


def _iteration_config(config: dict, args) -> IterationConfig:
    section = dict(config.get("iteration", {}))
    if args.max_steps is not None:
        section["max_steps"] = args.max_steps
    if args.diff_tol is not None:
        section["diff_tol"] = args.diff_tol
    if args.seed is not None:
        section["seed"] = args.seed
    allowed = {"max_steps", "diff_tol", "record_vectors", "seed"}
    unknown = set(section) - allowed
    if unknown:
        raise SpecError(f"unknown iteration fields: {sorted(unknown)}")
    return IterationConfig(**section)


def _resolve_start(config: dict, args, matrix: Matrix, eigendata, s: int) -> np.ndarray:
    start = dict(config.get("start", {"seed": 0}))
    if args.seed is not None and "vector" not in start:
        start["seed"] = args.seed
    if "vector" in start:
        v = np.asarray(start["vector"], dtype=float)
        if v.shape != (matrix.n,):
            raise SpecError(
                f"start vector has length {v.shape}, matrix needs {matrix.n}"
            )
        return v
    if "seed" not in start:
        raise SpecError("start needs either 'vector' or 'seed'")
    min_grade = start.get("min_grade", s + 1 if eigendata is not None else None)
    nonzero_blocks = start.get("nonzero_blocks")
    if eigendata is None:
        rng = np.random.default_rng(start["seed"])
        v = rng.standard_normal(matrix.n)
        return v / np.linalg.norm(v)
    return random_unit_start(
        matrix.n,
        start["seed"],
        eigendata=eigendata,
        min_grade=min_grade,
        nonzero_blocks=nonzero_blocks,
    )


def _validate_algorithm(config: dict, matrix: Matrix, eigendata) -> tuple[str, int]:
    algorithm = config.get("algorithm")
    if algorithm not in ALGORITHMS:
        raise SpecError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    s = int(config.get("s", 1))
    if algorithm == "aci1_orthogonal":
        if s != 1:
            raise SpecError("aci1_orthogonal runs at restart length 1")
        kind = eigendata.spec.kind if eigendata is not None else None
        if (kind is not None and kind != "orthogonal") or not matrix.is_orthogonal:
            raise SpecError("aci1_orthogonal requires an orthogonal spec")
    if algorithm == "aci_symmetric" and not matrix.is_symmetric:
        raise SpecError("aci_symmetric requires a symmetric spec")
    if algorithm == "cg":
        kind = eigendata.spec.kind if eigendata is not None else None
        if kind is not None and kind != "spd":
            raise SpecError("cg requires an spd spec")
    return algorithm, s


# ---------------------------------------------------------------------------
# report construction (shared by run and analyze)


def _limit_section(trace: IterationTrace, eigendata, matrix: Matrix):
    if trace.terminated_by != "diff_tol_reached":
        return None, f"trace not converged (terminated by {trace.terminated_by})"
    report = detect_limit(trace, eigendata=eigendata, matrix=matrix)
    section = {
        "limit_vector": report.limit_vector,
        "subsequence": report.subsequence,
        "tau": report.tau,
        "support": list(report.support) if report.support is not None else None,
        "limit_grade": report.limit_grade,
        "fixed_point_residual": report.fixed_point_residual,
        "tau_relation_residual": report.tau_relation_residual,
        "q_interpolation_residuals": (
            list(report.q_interpolation_residuals)
            if report.q_interpolation_residuals is not None
            else None
        ),
        "rayleigh_limit": report.rayleigh_limit,
    }
    return section, None


def _build_aci_report(trace: IterationTrace, eigendata, matrix: Matrix, algorithm: str):
    violations = check_interlacing(trace)
    limit, limit_reason = _limit_section(trace, eigendata, matrix)
    rate = None
    zero_fov_section = None
    final_block_norms = None
    if eigendata is not None:
        final_block_norms = eigendata.block_norms(trace.final_v)
        if eigendata.spec.kind == "orthogonal":
            if trace.records and trace.records[0].v_k is not None:
                try:
                    rr = estimate_contraction(trace, eigendata)
                    rate = {
                        "per_block_empirical_rho": {
                            str(k): v for k, v in sorted(rr.per_block_empirical_rho.items())
                        },
                        "predicted_zeta": {
                            str(k): v for k, v in sorted(rr.predicted_zeta.items())
                        },
                        "transient_cutoff": rr.transient_cutoff,
                    }
                except PreconditionError:
                    rate = None
            if algorithm == "aci1_orthogonal" and zero_in_fov(eigendata.spec):
                try:
                    alpha_tail, beta_tail = check_zero_fov_case(trace, eigendata)
                    zero_fov_section = {"alpha_limit": alpha_tail, "beta_limit": beta_tail}
                except PreconditionError:
                    zero_fov_section = None
    report = {
        "algorithm": algorithm,
        "s": trace.s,
        "steps": len(trace.records),
        "terminated_by": trace.terminated_by,
        "tau": trace.tau_estimate,
        "interlacing": {
            "violations": [{"index": v.index, "drop": v.drop} for v in violations],
            "stationary_count": count_stationary(trace),
        },
        "limit": limit,
        "limit_reason": limit_reason,
        "rate": rate,
        "zero_fov": zero_fov_section,
        "final_block_norms": final_block_norms,
    }
    return _jsonable(report)


def _build_cg_report(result: CgResult, s: int):
    records = result.records
    ys = [r.y_k for r in records]
    evens = ys[0::2]
    odds = ys[1::2]
    diff_even = (
        float(np.linalg.norm(evens[-1] - evens[-2])) if len(evens) >= 2 else None
    )
    diff_odd = float(np.linalg.norm(odds[-1] - odds[-2])) if len(odds) >= 2 else None
    angle = None
    if evens and odds:
        cosang = float(np.clip(abs(evens[-1] @ odds[-1]), 0.0, 1.0))
        angle = float(np.degrees(np.arccos(cosang)))
    ratio = ratio_delta = None
    errs = [r.a_norm_error for r in records]
    if len(errs) >= 3 and errs[-2] > 0.0 and errs[-3] > 0.0:
        ratio = errs[-1] / errs[-2]
        ratio_delta = abs(errs[-1] / errs[-2] - errs[-2] / errs[-3])
    report = {
        "algorithm": "cg",
        "s": s,
        "steps": len(records),
        "terminated_by": result.terminated_by,
        "solution_error": result.solution_error,
        "final_residual_norm": records[-1].residual_norm if records else None,
        "direction_diff_even_final": diff_even,
        "direction_diff_odd_final": diff_odd,
        "angle_even_odd_deg": angle,
        "a_norm_ratio_final": ratio,
        "a_norm_ratio_delta_final": ratio_delta,
    }
    return _jsonable(report)


# ---------------------------------------------------------------------------
# trace and state serialization


def _aci_trace_csv(trace: IterationTrace) -> str:
    lines = [ACI_CSV_HEADER]
    for r in trace.records:
        lines.append(
            ",".join(
                (
                    str(r.k),
                    _fmt(r.norm_w_tilde),
                    _fmt(r.norm_v_tilde),
                    _fmt(r.alpha),
                    _fmt(r.beta),
                    _fmt(r.diff_v),
                    _fmt(r.diff_w),
                )
            )
        )
    return "\n".join(lines) + "\n"


def _cg_trace_csv(result: CgResult) -> str:
    lines = [CG_CSV_HEADER]
    ys = [r.y_k for r in result.records]
    for i, r in enumerate(result.records):
        diff_even = (
            float(np.linalg.norm(ys[i] - ys[i - 2])) if i >= 2 else float("nan")
        )
        lines.append(
            ",".join(
                (str(r.k), _fmt(r.residual_norm), _fmt(r.a_norm_error), _fmt(diff_even))
            )
        )
    return "\n".join(lines) + "\n"


def _aci_state(trace: IterationTrace, algorithm: str) -> dict:
    state = {
        "format": STATE_FORMAT,
        "algorithm": algorithm,
        "kind": trace.kind,
        "s": trace.s,
        "terminated_by": trace.terminated_by,
        "tau": trace.tau_estimate,
        "v0": trace.v0,
        "final_v": trace.final_v,
        "final_w": trace.final_w,
        "record_vectors": trace.records[0].v_k is not None if trace.records else False,
        "vectors": None,
    }
    if state["record_vectors"]:
        state["vectors"] = {
            "v": [r.v_k for r in trace.records],
            "w": [r.w_k for r in trace.records],
        }
    return _jsonable(state)


def _cg_state(result: CgResult, s: int) -> dict:
    return _jsonable(
        {
            "format": STATE_FORMAT,
            "algorithm": "cg",
            "kind": "cg",
            "s": s,
            "terminated_by": result.terminated_by,
            "solution_error": result.solution_error,
            "y": [r.y_k for r in result.records],
        }
    )


def _parse_csv(text: str, expected_header: str, path: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SpecError(f"trace file {path} is empty")
    header = lines[0]
    if header != expected_header:
        expected_cols = expected_header.split(",")
        got = header.split(",")
        missing = [c for c in expected_cols if c not in got]
        extra = [c for c in got if c not in expected_cols]
        raise SpecError(
            f"trace header mismatch in {path}: missing columns {missing}, "
            f"unexpected columns {extra}"
        )
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(expected_header.split(",")):
            raise SpecError(f"malformed trace row in {path}: {ln!r}")
        rows.append([float(p) for p in parts])
    return rows


def _rebuild_aci_trace(rows, state) -> IterationTrace:
    vectors = state.get("vectors")
    records = []
    for i, row in enumerate(rows):
        k, nw, nv, alpha, beta, diff_v, diff_w = row
        rec = AciStepRecord(
            k=int(k),
            norm_w_tilde=nw,
            norm_v_tilde=nv,
            alpha=float("nan") if alpha is None else alpha,
            beta=float("nan") if beta is None else beta,
            diff_v=diff_v,
            diff_w=diff_w,
        )
        if vectors is not None:
            rec.v_k = np.asarray(vectors["v"][i], dtype=float)
            rec.w_k = np.asarray(vectors["w"][i], dtype=float)
        records.append(rec)
    if vectors is not None and len(vectors["v"]) != len(rows):
        raise SpecError(
            f"state field 'vectors' has {len(vectors['v'])} entries, trace has {len(rows)} rows"
        )
    return IterationTrace(
        records=records,
        terminated_by=state["terminated_by"],
        tau_estimate=float(state["tau"]),
        kind=state["kind"],
        s=int(state["s"]),
        v0=np.asarray(state["v0"], dtype=float),
        final_v=np.asarray(state["final_v"], dtype=float),
        final_w=(
            np.asarray(state["final_w"], dtype=float)
            if state.get("final_w") is not None
            else None
        ),
    )


def _rebuild_cg_result(rows, state) -> CgResult:
    ys = state.get("y")
    if ys is None or len(ys) != len(rows):
        have = 0 if ys is None else len(ys)
        raise SpecError(
            f"state field 'y' has {have} entries, trace has {len(rows)} rows"
        )
    records = [
        CgStepRecord(
            k=int(row[0]),
            y_k=np.asarray(ys[i], dtype=float),
            residual_norm=row[1],
            a_norm_error=row[2],
        )
        for i, row in enumerate(rows)
    ]
    return CgResult(
        records=records,
        terminated_by=state["terminated_by"],
        solution_error=float(state["solution_error"]),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    config = _load_json(args.config)
    matrix, eigendata, spec_dict = _load_matrix_operand(config)
    algorithm, s = _validate_algorithm(config, matrix, eigendata)
    itcfg = _iteration_config(config, args)
    outputs = dict(config.get("outputs", {}))
    trace_path = os.path.join(args.out_dir, outputs.get("trace", "trace.csv"))
    report_path = os.path.join(args.out_dir, outputs.get("report", "report.json"))
    state_path = os.path.join(
        args.out_dir, outputs.get("state", os.path.basename(_state_path_for(trace_path)))
    )

    if algorithm == "cg":
        x0 = _resolve_start(config, args, matrix, None, s)
        b = np.asarray(config.get("b", np.zeros(matrix.n)), dtype=float)
        if b.shape != (matrix.n,):
            raise SpecError(f"right-hand side has shape {b.shape}, matrix needs {matrix.n}")
        result = optimum_s_gradient_run(matrix, b, x0, s, itcfg)
        csv_text = _cg_trace_csv(result)
        state = _cg_state(result, s)
        report = _build_cg_report(result, s)
    else:
        v0 = _resolve_start(config, args, matrix, eigendata, s)
        if algorithm == "aci":
            trace = aci_run(matrix, s, v0, itcfg)
        elif algorithm == "aci_symmetric":
            trace = aci_symmetric_run(matrix, s, v0, itcfg)
        else:
            trace = aci1_orthogonal_run(matrix, v0, itcfg)
        csv_text = _aci_trace_csv(trace)
        state = _aci_state(trace, algorithm)
        report = _build_aci_report(trace, eigendata, matrix, algorithm)

    if spec_dict is not None:
        state["spec"] = spec_dict
    _atomic_write(trace_path, csv_text)
    _atomic_write(state_path, json.dumps(state, indent=2) + "\n")
    _atomic_write(report_path, json.dumps(report, indent=2) + "\n")
    print(json.dumps({"trace": trace_path, "state": state_path, "report": report_path}))
    return 0


def cmd_analyze(args) -> int:
    with open(args.trace) as handle:
        csv_text = handle.read()
    state_path = args.state or _state_path_for(args.trace)
    try:
        with open(state_path) as handle:
            state = json.load(handle)
    except FileNotFoundError as exc:
        raise SpecError(f"state sidecar not found: {state_path}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"state sidecar is not valid JSON: {exc}") from exc
    if state.get("format") != STATE_FORMAT:
        raise SpecError(f"state field 'format' must be {STATE_FORMAT!r}")

    eigendata = None
    matrix = None
    if args.eigendata:
        obj = _load_json(args.eigendata)
        if "kind" in obj:
            matrix, eigendata = make_matrix(SpectrumSpec.from_json(obj))
        elif "matrix" in obj:
            matrix = Matrix.ensure(np.asarray(obj["matrix"], dtype=float))
        else:
            raise SpecError("eigendata file needs a spectrum spec or a 'matrix' field")
    elif "spec" in state:
        matrix, eigendata = make_matrix(SpectrumSpec.from_json(state["spec"]))
    else:
        raise SpecError("analyze needs --eigendata when the state carries no spec")

    algorithm = state.get("algorithm")
    if algorithm == "cg":
        rows = _parse_csv(csv_text, CG_CSV_HEADER, args.trace)
        result = _rebuild_cg_result(rows, state)
        report = _build_cg_report(result, int(state["s"]))
    elif algorithm in ALGORITHMS:
        rows = _parse_csv(csv_text, ACI_CSV_HEADER, args.trace)
        trace = _rebuild_aci_trace(rows, state)
        if trace.terminated_by != "diff_tol_reached":
            raise PreconditionError(
                f"trace not converged (terminated by {trace.terminated_by})"
            )
        report = _build_aci_report(trace, eigendata, matrix, algorithm)
    else:
        raise SpecError(f"state field 'algorithm' is invalid: {algorithm!r}")

    out_path = args.out or os.path.join(args.out_dir, "report.json")
    _atomic_write(out_path, json.dumps(report, indent=2) + "\n")
    print(json.dumps({"report": out_path}))
    return 0


def _cluster_directions(vectors, tol=CLUSTER_ANGLE_TOL):
    reps = []
    sizes = []
    for v in vectors:
        placed = False
        for i, rep in enumerate(reps):
            cosang = min(1.0, abs(float(v @ rep)))
            if np.arccos(cosang) <= tol:
                sizes[i] += 1
                placed = True
                break
        if not placed:
            reps.append(v)
            sizes.append(1)
    return reps, sizes


def cmd_sweep(args) -> int:
    config = _load_json(args.config)
    matrix, eigendata, spec_dict = _load_matrix_operand(config)
    algorithm, s = _validate_algorithm(config, matrix, eigendata)
    if algorithm == "cg":
        raise SpecError("sweep drives the cross iterations, not cg")
    itcfg = _iteration_config(config, args)
    n_starts = args.n_starts if args.n_starts is not None else config.get("n_starts")
    if n_starts is None or int(n_starts) < 1:
        raise SpecError(f"n_starts must be >= 1, got {n_starts}")
    n_starts = int(n_starts)
    seed = args.seed if args.seed is not None else config.get("start", {}).get("seed", 0)

    starts = []
    limit_vectors = []
    for i in range(n_starts):
        entry = {"index": i, "tau": None, "terminated_by": None, "steps": None, "error": None}
        try:
            if eigendata is not None:
                v0 = random_unit_start(
                    matrix.n, [seed, i], eigendata=eigendata, min_grade=s + 1
                )
            else:
                rng = np.random.default_rng([seed, i])
                v0 = rng.standard_normal(matrix.n)
                v0 /= np.linalg.norm(v0)
            if algorithm == "aci":
                trace = aci_run(matrix, s, v0, itcfg)
            elif algorithm == "aci_symmetric":
                trace = aci_symmetric_run(matrix, s, v0, itcfg)
            else:
                trace = aci1_orthogonal_run(matrix, v0, itcfg)
            entry["tau"] = trace.tau_estimate
            entry["terminated_by"] = trace.terminated_by
            entry["steps"] = len(trace.records)
            if trace.terminated_by == "diff_tol_reached":
                limit_vectors.append(trace.final_v)
        except CrossIterError as exc:
            entry["error"] = str(exc)
        starts.append(entry)

    estimate = worst_case_arnoldi_estimate(matrix, s, n_starts, seed)
    estimate_t = worst_case_arnoldi_estimate(matrix.transpose, s, n_starts, seed)
    _, sizes = _cluster_directions(limit_vectors)
    summary = {
        "algorithm": algorithm,
        "s": s,
        "n_starts": n_starts,
        "seed": seed,
        "starts": starts,
        "phi_hat": estimate.phi_hat,
        "phi_hat_transpose": estimate_t.phi_hat,
        "phi_abs_diff": abs(estimate.phi_hat - estimate_t.phi_hat),
        "limit_clusters": {"count": len(sizes), "sizes": sizes},
    }
    if spec_dict is not None:
        summary["spec"] = spec_dict
    outputs = dict(config.get("outputs", {}))
    out_path = os.path.join(args.out_dir, outputs.get("summary", "summary.json"))
    _atomic_write(out_path, json.dumps(_jsonable(summary), indent=2) + "\n")
    print(json.dumps({"summary": out_path}))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossiter",
        description="Cross-iteration runs, sweeps, and trace diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--seed", type=int, default=None, help="override start/iteration seed")
        p.add_argument("--max-steps", type=int, default=None, help="override max steps")
        p.add_argument("--diff-tol", type=float, default=None, help="override stopping tolerance")

    run_p = sub.add_parser("run", help="execute one configured run")
    run_p.add_argument("--config", required=True)
    common(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run many seeded starts and aggregate")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--n-starts", type=int, default=None)
    common(sweep_p)
    sweep_p.set_defaults(func=cmd_sweep)

    an_p = sub.add_parser("analyze", help="recompute the report from stored outputs")
    an_p.add_argument("--trace", required=True)
    an_p.add_argument("--state", default=None)
    an_p.add_argument("--eigendata", default=None, help="spectrum spec JSON path")
    an_p.add_argument("--out", default=None)
    common(an_p)
    an_p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc), "exit_code": 2}), file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(json.dumps({"error": str(exc), "exit_code": 3}), file=sys.stderr)
        return 3
    except (BreakdownError, ConvergenceFailure) as exc:
        print(json.dumps({"error": str(exc), "exit_code": 4}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
