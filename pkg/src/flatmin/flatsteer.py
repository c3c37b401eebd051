"""Flatness steering: drive a moment matrix toward a rank-consistent one.

The outer loop alternates two maps.  B projects the trailing (degree-d)
columns of the current moment matrix M onto the span of its leading
(degree <= d-1) columns, giving the nearest column-rank-consistent matrix
B_M.  A solves a small SDP that trades the moment objective <f, y> off
against the spectral-arrow bound E on ||M(y) - B_M||_F^2 / c, where
c = dist(M, B_M)^2:

    minimize   lam * E + (1 - lam) * <f, y>
    such that  M_d(y) >= 0,   y_0 = 1,
               ||vec(M_d(y) - B_M)||^2 <= E * c,
               (gradient-variety mode) localizing equalities V(y) = 0.

The iteration M <- A_M stops when M is flat (rank M_d = rank M_{d-1}),
approximately flat (||A_M - B_M||_F small), or out of budget.  Flat limits
feed atom extraction and bound certification.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import sdpcore
from .extract import AtomicMeasure, ExtractConfig, ValidationReport, extract_atoms, validate_atoms
from .moment import (
    MomentVector,
    atomic_moment_vector,
    build_indexer,
    gaussian_moment_vector,
    hankel_residual,
    moment_matrix,
    moments_from_matrix,
    poly_coeff_vector,
)
from .polyparse import Polynomial, poly_space
from .sdpcore import (
    SdpProblem,
    SdpSolution,
    SolverConfig,
    arrow_constraint,
    assemble_moment_relaxation,
    assemble_nds_relaxation,
    solve,
)


@dataclass
class SteerConfig:
    tol_rank: float = 1e-4  # relative eigenvalue cutoff for numerical rank
    tol_flat: float = 1e-2  # approximate flatness, scaled by 1 + ||M||_F
    tol_val: float = 1e-2  # |f(a_i) - U| budget, scaled by 1 + |U|
    tau_hankel: float = 1e-6  # scaled by 1 + max |entry|
    tau_grad: float = 1e-4  # scaled by (1 + ||a||)^(deg f - 1)
    tau_weight: float = 1e-6
    tau_commute: float = 1e-3
    rho: float = 2.0  # half-width of the synthetic-start sampling box
    ridge_eps: float = 1e-3
    max_outer_iters: int = 100
    wall_clock_s: float = 300.0
    rescale_ratio: float = 1e6  # entry-spread trigger for variable rescaling
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass
class ProjectionResult:
    """Nearest column-rank-consistent matrix to M, plus the move distance."""

    matrix: np.ndarray
    basis_cols: Tuple[int, ...]
    rank: int
    distance: float


def project_columns(
    entries: np.ndarray, n: int, d: int, tol_rank: float = 1e-4
) -> ProjectionResult:
    """Project the trailing columns of M onto the span of the leading block.

    The leading s_{d-1} columns are kept verbatim; a pivoted QR of that block
    selects an orthonormal basis Q_r of its numerical column space, and each
    degree-d column is replaced by Q_r Q_r^T times itself.
    """
    entries = np.asarray(entries, dtype=float)
    s_d = poly_space(n, d).s
    s_sub = poly_space(n, d - 1).s
    if entries.shape != (s_d, s_d):
        raise ValueError(f"expected a {s_d}x{s_d} matrix, got {entries.shape}")
    skel = entries[:, :s_sub]
    Q, R, piv = scipy.linalg.qr(skel, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    cutoff = tol_rank * max(diag[0] if diag.size else 0.0, 1e-300)
    rank = int(np.sum(diag > cutoff))
    out = entries.copy()
    if rank == 0:
        out[:, s_sub:] = 0.0
    else:
        Qr = Q[:, :rank]
        out[:, s_sub:] = Qr @ (Qr.T @ entries[:, s_sub:])
    distance = float(np.linalg.norm(out - entries, "fro"))
    return ProjectionResult(out, tuple(int(p) for p in piv[:rank]), rank, distance)


def modified_moment_matrix(
    entries: np.ndarray, n: int, d: int
) -> Tuple[np.ndarray, float]:
    """Replace the trailing blocks of M by their Hankel-consistent completion.

    With M = [[A, B], [B^T, D]] split at s_{d-1}, solve A W = B in least
    squares and return [[A, A W], [W^T A, W^T A W]] together with the
    residual ||A W - B||_F.
    """
    entries = np.asarray(entries, dtype=float)
    s_sub = poly_space(n, d - 1).s
    A = entries[:s_sub, :s_sub]
    B = entries[:s_sub, s_sub:]
    W, *_ = np.linalg.lstsq(A, B, rcond=None)
    AW = A @ W
    out = entries.copy()
    out[:s_sub, s_sub:] = AW
    out[s_sub:, :s_sub] = AW.T
    out[s_sub:, s_sub:] = W.T @ AW
    return out, float(np.linalg.norm(AW - B, "fro"))


@dataclass
class FlatnessReport:
    rank_full: int
    rank_sub: int
    is_flat: bool
    eigen_gap: float  # smallest kept / largest dropped eigenvalue
    hankel_residual_modified: float


def flatness_report(
    entries: np.ndarray, n: int, d: int, tol_rank: float = 1e-4
) -> FlatnessReport:
    """Numerical-rank comparison of M_d against its leading M_{d-1} block."""
    entries = np.asarray(entries, dtype=float)
    s_sub = poly_space(n, d - 1).s
    eigs = np.linalg.eigvalsh(0.5 * (entries + entries.T))
    lam_max = float(eigs[-1]) if eigs.size else 0.0
    cutoff = tol_rank * max(lam_max, 1.0)
    rank_full = int(np.sum(eigs > cutoff))
    sub_eigs = np.linalg.eigvalsh(
        0.5 * (entries[:s_sub, :s_sub] + entries[:s_sub, :s_sub].T)
    )
    rank_sub = int(np.sum(sub_eigs > cutoff))
    kept = eigs[eigs > cutoff]
    dropped = eigs[eigs <= cutoff]
    if kept.size and dropped.size and float(dropped.max()) > 0:
        gap = float(kept.min()) / float(dropped.max())
    else:
        gap = float("inf")
    modified, _ = modified_moment_matrix(entries, n, d)
    h_res = hankel_residual(modified, n, d)
    return FlatnessReport(rank_full, rank_sub, rank_full == rank_sub, gap, h_res)


@dataclass
class SteerState:
    """One outer iteration: the steered moments and their flatness status."""

    y: MomentVector
    matrix: np.ndarray  # M_d(y) for the steered y
    e_value: float
    objective: float  # <f, y> in the working frame
    iteration: int
    flat: str  # "exact" | "approximate" | "no"
    flat_residual: float  # ||A_M - B_M||_F against the projection target
    solver_status: str
    projection_distance: float  # dist(M, B_M) before the solve


def steer_once(
    entries: np.ndarray,
    f: Polynomial,
    lam: float,
    k: int,
    iteration: int,
    config: SteerConfig,
    equalities: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> SteerState:
    """One steering step M -> A_M.

    A projection distance at solver resolution means M is already
    rank-consistent; the step short-circuits with E = 0 and A_M = M, since
    the arrow constraint would be degenerate (c ~ squared solver noise).
    """
    n = f.nvars
    d = k // 2
    proj = project_columns(entries, n, d, config.tol_rank)
    scale = 1.0 + float(np.linalg.norm(entries, "fro"))
    c = proj.distance**2

    if proj.distance <= 1e-6 * scale:
        state = _state_from_matrix(entries, f, k, iteration, "no", proj.distance)
        return replace(state, solver_status="short_circuit")

    relax = assemble_moment_relaxation(f, k)
    m_moment = relax.problem.num_vars  # s_k - 1 moment unknowns
    block = relax.problem.psd_blocks[0]

    # vec(M(y) - B_M) is affine in the moment unknowns.
    v_const = (block.const - proj.matrix).reshape(-1)
    v_lin = block.lin.reshape(m_moment, -1).T

    # The blend lambda*E + (1-lambda)*<f, y> must keep its raw trade-off:
    # <f, y> is invariant under the variable rescaling (coefficients pick up
    # c^|alpha|, moments lose it) and E is a ratio of same-frame distances.
    # Dividing the WHOLE blend by one positive scalar preserves both the
    # argmin and the trade-off, so normalize by the incumbent objective value
    # |<f, y_prev>|: far from the minimum that value dwarfs lambda*E (as the
    # raw blend intends) while each individual SDP stays O(1)-scaled; near
    # the minimum it decays to O(1) and E is priced back in.
    y_prev = moments_from_matrix(entries, n, d)
    obj_scale = max(1.0, abs(float(poly_coeff_vector(f, y_prev.indexer) @ y_prev.values)))

    if lam == 0.0:
        # Pure objective steering: fix E = 1 so the ball keeps its radius.
        num_vars = m_moment
        objective = (1.0 - lam) / obj_scale * relax.problem.objective
        objective_const = (1.0 - lam) / obj_scale * relax.problem.objective_const
        arrow = arrow_constraint(
            c, v_const, v_lin, e_const=1.0, e_lin=np.zeros(num_vars)
        )
        psd = [block]
    else:
        # Unknowns: (y_alpha ..., E); E enters only the objective and arrow.
        num_vars = m_moment + 1
        objective = np.concatenate(
            [(1.0 - lam) / obj_scale * relax.problem.objective, [lam / obj_scale]]
        )
        objective_const = (1.0 - lam) / obj_scale * relax.problem.objective_const
        e_lin = np.zeros(num_vars)
        e_lin[-1] = 1.0
        arrow = arrow_constraint(
            c,
            v_const,
            np.hstack([v_lin, np.zeros((v_lin.shape[0], 1))]),
            e_const=0.0,
            e_lin=e_lin,
        )
        psd = [
            sdpcore.PsdBlock(
                block.size,
                block.const,
                np.concatenate(
                    [block.lin, np.zeros((1,) + block.const.shape)], axis=0
                ),
            )
        ]

    eq_lhs = eq_rhs = None
    if equalities is not None:
        lhs, rhs = equalities
        if lhs.size:
            eq_lhs = (
                np.hstack([lhs, np.zeros((lhs.shape[0], 1))])
                if num_vars > m_moment
                else lhs
            )
            eq_rhs = rhs

    problem = SdpProblem(
        num_vars=num_vars,
        objective=objective,
        objective_const=objective_const,
        psd_blocks=psd,
        arrow_blocks=[arrow],
        eq_lhs=eq_lhs,
        eq_rhs=eq_rhs,
    )
    sol = solve(problem, config.solver)
    if sol.status != sdpcore.OPTIMAL or sol.x is None:
        return SteerState(
            MomentVector(relax.indexer, np.zeros(len(relax.indexer))),
            entries.copy(),
            float("nan"),
            float("nan"),
            iteration,
            "no",
            float("inf"),
            sol.status,
            proj.distance,
        )

    y_vals = np.concatenate([[1.0], sol.x[:m_moment]])
    y = MomentVector(relax.indexer, y_vals)
    steered = moment_matrix(y, d).entries
    e_value = 1.0 if lam == 0.0 else float(sol.x[-1])
    obj = float(poly_coeff_vector(f, relax.indexer) @ y_vals)

    flat, residual = assess_flatness(steered, n, d, config)
    return SteerState(
        y, steered, e_value, obj, iteration, flat, residual, sol.status, proj.distance
    )


def assess_flatness(
    entries: np.ndarray, n: int, d: int, config: SteerConfig
) -> Tuple[str, float]:
    """Classify a moment matrix as exactly flat, approximately flat, or not.

    Exact flatness is the numerical-rank equality rank M_d = rank M_{d-1};
    approximate flatness means the matrix sits within tol_flat (scaled by
    1 + ||M||_F) of its own column-rank-consistent projection.
    """
    report = flatness_report(entries, n, d, config.tol_rank)
    proj = project_columns(entries, n, d, config.tol_rank)
    if report.is_flat:
        return "exact", proj.distance
    if proj.distance <= config.tol_flat * (1.0 + np.linalg.norm(entries, "fro")):
        return "approximate", proj.distance
    return "no", proj.distance


@dataclass
class LowerBoundRecord:
    """Outcome of the plain relaxation solve that opens a run."""

    status: str
    value: Optional[float]  # finite certified bound when status == "optimal"
    trend: Optional[float]  # objective direction along a ray when unbounded

    def finite(self) -> bool:
        return self.status == sdpcore.OPTIMAL and self.value is not None


@dataclass
class AlgorithmResult:
    mode: str
    lam: float
    k: int
    status: str  # "ok" | "budget_exhausted" | "numerical_failure"
    flat: str  # "exact" | "approximate" | "no"
    iterations: int
    wall_time_s: float
    lower: LowerBoundRecord
    upper: Optional[float]
    measure: Optional[AtomicMeasure]
    validation: Optional[ValidationReport]
    verdict: str  # certification verdict, or "none"
    final_state: Optional[SteerState]
    report: Optional[FlatnessReport]
    rescale: float  # variable substitution x -> rescale * x used internally
    seed: int


class _Rescaler:
    """Variable substitution x -> c * x that tames badly spread moments.

    Objective values <f, y> are invariant; points map back by a = c * a_hat
    and moments by y_alpha = c^{|alpha|} * y_hat_alpha.
    """

    def __init__(self, c: float, n: int, k: int) -> None:
        self.c = c
        indexer = build_indexer(n, k)
        self.degrees = np.array([sum(e) for e in indexer.forward])

    def scale_poly(self, f: Polynomial) -> Polynomial:
        return Polynomial(
            f.nvars,
            {expo: coeff * self.c ** sum(expo) for expo, coeff in f.terms.items()},
        )

    def scale_moments(self, values: np.ndarray) -> np.ndarray:
        # y_hat_alpha = y_alpha / c^{|alpha|} keeps <f_c, y_hat> = <f, y>.
        return values / self.c**self.degrees

    def unscale_point(self, a: np.ndarray) -> np.ndarray:
        return self.c * a


def _entry_spread(entries: np.ndarray) -> float:
    """Ratio of the largest entry magnitude to the smallest significant one.

    Entries below 1e-9 of the maximum are treated as zeros, not scales, so
    near-cancelled odd moments do not masquerade as a huge spread.
    """
    mags = np.abs(entries)
    top = float(mags.max())
    if top == 0.0:
        return 1.0
    floor = mags[mags > 1e-9 * top]
    return float(top / floor.min())


def _synthetic_start(n: int, k: int, config: SteerConfig, rng: np.random.Generator) -> np.ndarray:
    """Moments of a random atomic measure, convexly blended with a Gaussian.

    The blend keeps y_0 = 1 while the Gaussian share makes M_d strictly
    positive definite, so the first projection distance is informative.
    """
    d = k // 2
    n_pts = poly_space(n, d).s
    pts = rng.uniform(-config.rho, config.rho, size=(n_pts, n))
    weights = np.full(n_pts, 1.0 / n_pts)
    atomic = atomic_moment_vector(pts, weights, k).values
    gauss = gaussian_moment_vector(n, k, sigma=1.0).values
    return (1.0 - config.ridge_eps) * atomic + config.ridge_eps * gauss


def _certificate_start(
    n: int, k: int, ray: np.ndarray, config: SteerConfig
) -> Optional[np.ndarray]:
    """Start from an unboundedness certificate, lifted back to a measure-like
    moment vector: ridge moments plus the normalized improving direction."""
    direction = np.concatenate([[0.0], ray])
    top = float(np.abs(direction).max())
    if not np.isfinite(top) or top <= 0:
        return None
    direction = direction / top
    base = gaussian_moment_vector(n, k, sigma=1.0).values
    vals = base + direction / config.ridge_eps
    if vals[0] <= 0:
        return None
    vals = vals / vals[0]
    d = k // 2
    indexer = build_indexer(n, k)
    eigs = np.linalg.eigvalsh(
        moment_matrix(MomentVector(indexer, vals), d).entries
    )
    if eigs[0] < -1e-6 * max(eigs[-1], 1.0):
        return None
    return vals


def run_algorithm(
    f: Polynomial,
    lam: float,
    mode: str = "moment",
    k: Optional[int] = None,
    config: SteerConfig = SteerConfig(),
) -> AlgorithmResult:
    """Full pipeline: relaxation bound, steering loop, extraction, validation.

    mode "moment" uses the plain degree-k moment relaxation; mode "nds" adds
    the gradient-ideal localizing equalities, restricting candidate measures
    to the critical points of f.  lam trades rank steering (lam = 1) against
    objective steering (lam = 0).
    """
    if mode not in ("moment", "nds"):
        raise ValueError(f"unknown mode {mode!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    n = f.nvars
    deg = f.degree()
    if deg < 1:
        raise ValueError("constant objective: nothing to minimize")
    k = deg if k is None else k
    if k < deg:
        raise ValueError(f"relaxation order {k} below the polynomial degree {deg}")
    if k % 2:
        k += 1  # odd orders lift to the next even order
    d = k // 2
    t0 = time.monotonic()
    rng = np.random.default_rng(config.seed)

    def _result(status, flat, iters, lower, upper, measure, validation, verdict,
                state, report, rescale_c):
        return AlgorithmResult(
            mode, lam, k, status, flat, iters, time.monotonic() - t0,
            lower, upper, measure, validation, verdict, state, report,
            rescale_c, config.seed,
        )

    # Opening relaxation: its optimum is the certified lower bound (when
    # finite) and the preferred starting point for the steering loop.
    assemble = assemble_moment_relaxation if mode == "moment" else assemble_nds_relaxation
    relax = assemble(f, k)
    base_sol = solve(relax.problem, config.solver)
    lower = _classify_lower(base_sol)

    start_vals: Optional[np.ndarray] = None
    if base_sol.status == sdpcore.OPTIMAL and base_sol.x is not None:
        candidate = np.concatenate([[1.0], base_sol.x])
        entries = moment_matrix(MomentVector(relax.indexer, candidate), d).entries
        if mode == "nds" or _entry_spread(entries) <= config.rescale_ratio:
            start_vals = candidate
    elif (
        mode == "nds"
        and base_sol.status == sdpcore.UNBOUNDED
        and base_sol.x is not None
    ):
        start_vals = _certificate_start(n, k, base_sol.x, config)
    if start_vals is None:
        start_vals = _synthetic_start(n, k, config, rng)

    # Working frame: the variable substitution x -> c*x keeps the moment
    # matrix entries commensurate with the coefficients of f.  The guard
    # re-fires inside the loop whenever an iterate spreads out again.
    f_work = f
    total_c = 1.0
    equalities: Optional[Tuple[np.ndarray, np.ndarray]] = None
    entries = moment_matrix(MomentVector(relax.indexer, start_vals), d).entries

    def _rebalance(entries: np.ndarray, force: bool = False) -> np.ndarray:
        nonlocal f_work, total_c, equalities
        if not force and _entry_spread(entries) <= config.rescale_ratio:
            return entries
        max_entry = float(np.abs(entries).max())
        # Balance against the original coefficient scale: work-frame
        # coefficients grow with every substitution and would keep the
        # target matrix magnitude large.
        max_coeff = max(abs(co) for co in f.terms.values())
        c_step = (max_entry / max(max_coeff, 1.0)) ** (1.0 / (2 * k))
        if not np.isfinite(c_step) or c_step <= 0.0:
            return entries
        if force:
            # A forced rebalance may also shrink the frame, but a near-unit
            # step would loop without progress.
            if abs(np.log(c_step)) < 1e-2:
                return entries
        elif c_step <= 1.0:
            return entries
        step = _Rescaler(c_step, n, k)
        total_c *= c_step
        f_work = step.scale_poly(f_work)
        y_now = moments_from_matrix(entries, n, d)
        scaled = step.scale_moments(
            np.concatenate([y_now.values, np.zeros(len(relax.indexer) - len(y_now.values))])
        )
        if mode == "nds":
            work = assemble_nds_relaxation(f_work, k)
            equalities = (work.problem.eq_lhs, work.problem.eq_rhs)
        return moment_matrix(MomentVector(relax.indexer, scaled), d).entries

    entries = _rebalance(entries)
    if mode == "nds" and equalities is None:
        work = assemble_nds_relaxation(f_work, k)
        equalities = (work.problem.eq_lhs, work.problem.eq_rhs)

    def _attempt_extraction(matrix: np.ndarray, flat_kind: str):
        """Extract, unscale, and validate; None when the measure is unusable."""
        rep = flatness_report(matrix, n, d, config.tol_rank)
        source = matrix if flat_kind == "exact" else modified_moment_matrix(matrix, n, d)[0]
        hint = max(min(rep.rank_full, poly_space(n, d - 1).s), 1)
        measure = extract_atoms(
            source, n, d, hint,
            ExtractConfig(config.tol_rank, config.tau_weight, config.tau_commute, config.seed),
        )
        if measure.is_empty():
            return None
        if total_c != 1.0:
            measure = AtomicMeasure(
                total_c * measure.atoms, measure.weights,
                measure.reconstruction_residual, measure.diagnostics,
            )
        y_now = moments_from_matrix(matrix, n, d)
        full = build_indexer(n, k)
        vals = np.zeros(len(full))
        vals[: len(y_now.values)] = y_now.values
        upper = float(poly_coeff_vector(f_work, full) @ vals)
        validation = validate_atoms(
            measure, f, upper, mode, config.tol_val, config.tau_grad
        )
        return measure, validation, rep, upper

    status = "budget_exhausted"
    iters = 0
    extracted = None
    flat, start_dist = assess_flatness(entries, n, d, config)
    state = _state_from_matrix(entries, f_work, k, 0, flat, start_dist)
    if flat == "approximate":
        # A merely-approximate start must still yield a usable measure;
        # otherwise the loop gets a chance to improve it.
        extracted = _attempt_extraction(entries, flat)
        if extracted is None or extracted[1].verdict == "invalid":
            extracted = None
            flat = "no"
            state = replace(state, flat="no")
    if flat != "no":
        status = "ok"  # the start already satisfies the rank condition
    else:
        for iteration in range(1, config.max_outer_iters + 1):
            iters = iteration
            entries = _rebalance(entries)
            state = steer_once(entries, f_work, lam, k, iteration, config, equalities)
            if state.solver_status not in (sdpcore.OPTIMAL, "short_circuit"):
                # One recovery attempt: force the frame back into balance
                # even when the spread trigger has not fired yet.
                c_before = total_c
                entries = _rebalance(entries, force=True)
                if total_c != c_before:
                    state = steer_once(
                        entries, f_work, lam, k, iteration, config, equalities
                    )
            if state.solver_status == "short_circuit":
                # The ball is degenerate, so the iterate cannot move again:
                # either it passes the same exit gate as a steered iterate or
                # the run is stalled for good.
                flat, dist = assess_flatness(entries, n, d, config)
                if flat == "approximate":
                    extracted = _attempt_extraction(entries, flat)
                    if extracted is None or extracted[1].verdict == "invalid":
                        extracted = None
                        flat = "no"
                state = replace(state, flat=flat, flat_residual=dist)
                if flat != "no":
                    status = "ok"
                break
            if state.solver_status != sdpcore.OPTIMAL:
                return _result(
                    "numerical_failure", "no", iters, lower, None, None, None,
                    "none", state, None, total_c,
                )
            entries = state.matrix
            flat = state.flat
            if flat == "approximate":
                extracted = _attempt_extraction(entries, flat)
                if extracted is None or extracted[1].verdict == "invalid":
                    # Near rank-consistency without a usable measure: steer on.
                    extracted = None
                    flat = "no"
                    state = replace(state, flat="no")
            if flat != "no":
                status = "ok"
                break
            if time.monotonic() - t0 > config.wall_clock_s:
                break

    if state is None or state.flat == "no":
        return _result(
            "budget_exhausted",
            "no", iters, lower, None, None, None, "none", state, None, total_c,
        )

    final_entries = state.matrix
    if extracted is None:
        extracted = _attempt_extraction(final_entries, state.flat)
    if extracted is None:
        report = flatness_report(final_entries, n, d, config.tol_rank)
        upper = state.objective
        return _result(
            "ok", state.flat, iters, lower, upper, None, None, "none",
            state, report, total_c,
        )
    measure, validation, report, upper = extracted
    verdict = validation.verdict
    if verdict == "certified_interval" and mode == "nds" and state.flat == "exact":
        # In gradient-variety mode the atoms must also stay consistent with
        # the modified matrix being a genuine moment matrix.
        h_res = report.hankel_residual_modified
        h_tol = config.tau_hankel * (1.0 + float(np.abs(final_entries).max()))
        if h_res > h_tol:
            verdict = "upper_bound_only"
    return _result(
        "ok", state.flat, iters, lower, upper, measure, validation, verdict,
        state, report, total_c,
    )


def run_relaxation(
    f: Polynomial,
    mode: str = "moment",
    k: Optional[int] = None,
    config: SteerConfig = SteerConfig(),
) -> AlgorithmResult:
    """Plain relaxation bound plus a certificate attempt at its optimum.

    Solves the degree-k relaxation once, with no steering.  When the optimum
    is attained, the moment matrix is checked for rank flatness; extraction
    runs on the matrix itself (exact flatness), or on its structured
    projection when the matrix is close to flat or the projection is Hankel
    to tolerance.  Atoms that reproduce the bound upgrade it to a candidate
    optimality certificate.
    """
    if mode not in ("moment", "nds"):
        raise ValueError(f"unknown mode {mode!r}")
    n = f.nvars
    deg = f.degree()
    if deg < 1:
        raise ValueError("constant objective: nothing to minimize")
    k = deg if k is None else k
    if k < deg:
        raise ValueError(f"relaxation order {k} below the polynomial degree {deg}")
    if k % 2:
        k += 1  # odd orders lift to the next even order
    d = k // 2
    t0 = time.monotonic()

    def _result(status, flat, upper, measure, validation, verdict, state, report):
        return AlgorithmResult(
            mode, 0.0, k, status, flat, 0, time.monotonic() - t0,
            lower, upper, measure, validation, verdict, state, report,
            1.0, config.seed,
        )

    assemble = assemble_moment_relaxation if mode == "moment" else assemble_nds_relaxation
    relax = assemble(f, k)
    sol = solve(relax.problem, config.solver)
    lower = _classify_lower(sol)
    if sol.status == sdpcore.UNBOUNDED:
        return _result("ok", "no", None, None, None, "none", None, None)
    if sol.status != sdpcore.OPTIMAL or sol.x is None:
        return _result("numerical_failure", "no", None, None, None, "none", None, None)

    y = MomentVector(relax.indexer, np.concatenate([[1.0], sol.x]))
    entries = moment_matrix(y, d).entries
    flat, dist = assess_flatness(entries, n, d, config)
    state = _state_from_matrix(entries, f, k, 0, flat, dist)
    report = flatness_report(entries, n, d, config.tol_rank)
    h_tol = config.tau_hankel * (1.0 + float(np.abs(entries).max()))
    hankel_ok = report.hankel_residual_modified <= h_tol
    if flat == "no" and not hankel_ok:
        return _result("ok", "no", None, None, None, "none", state, report)

    source = entries if flat == "exact" else modified_moment_matrix(entries, n, d)[0]
    hint = max(min(report.rank_full, poly_space(n, d - 1).s), 1)
    measure = extract_atoms(
        source, n, d, hint,
        ExtractConfig(config.tol_rank, config.tau_weight, config.tau_commute, config.seed),
    )
    upper = state.objective if flat != "no" else None
    if measure.is_empty():
        return _result("ok", flat, upper, None, None, "none", state, report)
    validation = validate_atoms(
        measure, f, state.objective, mode, config.tol_val, config.tau_grad
    )
    if validation.verdict == "invalid":
        return _result("ok", flat, upper, None, None, "none", state, report)
    verdict = validation.verdict
    if verdict == "certified_interval" and mode == "nds" and not hankel_ok:
        # Without a Hankel-consistent projection the gradient-variety
        # argument does not apply; the atoms still bound from above.
        verdict = "upper_bound_only"
    return _result("ok", flat, state.objective, measure, validation, verdict, state, report)


def _state_from_matrix(
    entries: np.ndarray,
    f: Polynomial,
    k: int,
    iteration: int,
    flat: str,
    distance: float,
) -> SteerState:
    """Wrap a raw moment matrix as a SteerState without a steering solve."""
    n = f.nvars
    d = k // 2
    y_low = moments_from_matrix(entries, n, d)
    full = build_indexer(n, k)
    vals = np.zeros(len(full))
    vals[: len(y_low.values)] = y_low.values
    y = MomentVector(full, vals)
    obj = float(poly_coeff_vector(f, full) @ vals)
    return SteerState(
        y, entries.copy(), 0.0, obj, iteration, flat, distance, "start", distance
    )


def _classify_lower(sol: SdpSolution) -> LowerBoundRecord:
    if sol.status == sdpcore.OPTIMAL:
        return LowerBoundRecord(sol.status, sol.objective_value, None)
    if sol.status == sdpcore.UNBOUNDED:
        return LowerBoundRecord(sol.status, None, sol.trend)
    return LowerBoundRecord(sol.status, None, None)
