"""Dense-block semidefinite programs and the cone-solver bridge.

Problems are affine in a decision vector x: minimize c @ x + c0 subject to
PSD blocks F0 + sum_j x_j F_j >= 0, arrow blocks (see ArrowBlock), and linear
equalities A x = b.  Equalities are removed by null-space elimination before
the cone solve, which keeps them satisfied exactly and improves conditioning
of the reduced system.  The interior-point kernel is cvxopt's conelp
(primal-dual path following with Nesterov-Todd scaling, Mehrotra
predictor-corrector and a self-dual embedding that produces infeasibility /
unboundedness certificates); statuses are re-checked here against the
returned iterate before being reported.

Moment relaxations: for a polynomial f of degree <= k (k even), the order-k
relaxation minimizes sum_alpha f_alpha y_alpha over pseudo-moment vectors y
with y_0 = 1 and M_{k/2}(y) >= 0.  Its optimum is a lower bound for the
global minimum of f.  The gradient-variety variant adds the localizing rows
of every partial derivative of f as equality constraints, which tightens the
bound whenever f attains its minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .moment import (
    MomentVector,
    MonomialIndexer,
    build_indexer,
    localizing_rows,
    poly_coeff_vector,
    _position_matrix,
)
from .polyparse import Polynomial

OPTIMAL = "optimal"
UNBOUNDED = "unbounded_below"
INFEASIBLE = "infeasible"
MAX_ITERS = "max_iters"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverConfig:
    """Interior-point knobs; defaults match the documented tolerances."""

    tol: float = 1e-7
    max_iters: int = 200
    # Runaway-objective cut-off, applied as -threshold*(1 + |objective at the
    # zero point of the free variables|).
    unbounded_threshold: float = 1e9
    seed: int = 0
    # Diagnostic path: lower arrow blocks as dense PSD matrices instead of
    # second-order cones (used to cross-check the Schur-complement lowering).
    lower_arrow_as_psd: bool = False


@dataclass
class PsdBlock:
    """Affine symmetric block F0 + sum_j x_j lin[j], constrained PSD."""

    size: int
    const: np.ndarray  # (size, size)
    lin: np.ndarray  # (m, size, size)

    def materialize(self, x: np.ndarray) -> np.ndarray:
        if self.lin.shape[0] == 0:
            return self.const.copy()
        return self.const + np.tensordot(np.asarray(x, float), self.lin, axes=1)


class ArrowDegenerateError(ValueError):
    """Raised when the residual scale c is zero: the matrix already satisfies
    the rank condition and the caller should short-circuit with E = 0."""


@dataclass
class ArrowBlock:
    """Arrow matrix [[I_q, v], [v^T, E*c]] with v, E affine in x.

    PSD of the arrow is equivalent (Schur complement on the identity block)
    to ||v||^2 <= E * c, so the block is lowered to a second-order cone of
    dimension q + 2 during the solve; materialize() builds the dense matrix
    for inspection and testing.
    """

    center_scale: float  # c > 0
    vec_dim: int  # q
    v_const: np.ndarray  # (q,)
    v_lin: np.ndarray  # (q, m)
    e_const: float
    e_lin: np.ndarray  # (m,)

    def v_of(self, x: np.ndarray) -> np.ndarray:
        return self.v_const + self.v_lin @ np.asarray(x, float)

    def e_of(self, x: np.ndarray) -> float:
        return float(self.e_const + self.e_lin @ np.asarray(x, float))

    def materialize(self, x: Sequence[float] = ()) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q = self.vec_dim
        out = np.eye(q + 1)
        v = self.v_of(x)
        out[:q, q] = v
        out[q, :q] = v
        out[q, q] = self.e_of(x) * self.center_scale
        return out

    def margin(self, x: np.ndarray) -> float:
        """E*c - ||v||^2 at x; nonnegative iff the arrow matrix is PSD."""
        v = self.v_of(x)
        return self.e_of(x) * self.center_scale - float(v @ v)


def arrow_constraint(
    center_scale: float,
    v_const: Sequence[float],
    v_lin: np.ndarray,
    e_const: float,
    e_lin: Sequence[float],
) -> ArrowBlock:
    """Build the arrow block for residual vector v(x) and slack E(x).

    center_scale is ||M - B_M||_F^2 of the matrix being steered; a zero value
    means the rank condition already holds and is signalled as
    ArrowDegenerateError so the caller can skip the solve with E = 0.
    """
    if center_scale < 0:
        raise ValueError("center_scale must be nonnegative")
    if center_scale == 0.0:
        raise ArrowDegenerateError("residual scale is zero; nothing to steer")
    v_const = np.asarray(v_const, dtype=float)
    v_lin = np.asarray(v_lin, dtype=float)
    e_lin = np.asarray(e_lin, dtype=float)
    if v_lin.shape[0] != v_const.shape[0]:
        raise ValueError("v_const and v_lin disagree on the vector dimension")
    return ArrowBlock(
        float(center_scale), v_const.shape[0], v_const, v_lin, float(e_const), e_lin
    )


@dataclass
class SdpProblem:
    num_vars: int
    objective: np.ndarray  # (m,)
    objective_const: float = 0.0
    psd_blocks: List[PsdBlock] = field(default_factory=list)
    arrow_blocks: List[ArrowBlock] = field(default_factory=list)
    eq_lhs: Optional[np.ndarray] = None  # (neq, m)
    eq_rhs: Optional[np.ndarray] = None  # (neq,)


@dataclass
class SdpSolution:
    status: str
    x: Optional[np.ndarray]
    objective_value: float
    duals: List[np.ndarray]
    kkt_residuals: Dict[str, float]
    trend: Optional[float] = None  # certificate objective for unbounded runs


def _eliminate_equalities(
    problem: SdpProblem, tol: float
) -> Tuple[Optional[np.ndarray], Optional[np.ndarray], bool]:
    """Return (x_particular, nullspace_basis, feasible) for A x = b.

    Rows are sup-norm normalized before the SVD so the rank cut is scale
    free; an inconsistent system reports feasible=False.
    """
    A, b = problem.eq_lhs, problem.eq_rhs
    m = problem.num_vars
    if A is None or A.shape[0] == 0:
        return np.zeros(m), np.eye(m), True
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    norms = np.maximum(np.abs(A).max(axis=1), np.abs(b))
    keep = norms > 0
    A, b, norms = A[keep], b[keep], norms[keep]
    if A.shape[0] == 0:
        return np.zeros(m), np.eye(m), True
    A = A / norms[:, None]
    b = b / norms
    _, sing, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sing > max(A.shape) * np.finfo(float).eps * sing[0]))
    x_p, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ x_p - b)) > 1e-8 * (1.0 + np.max(np.abs(b))):
        return None, None, False
    nullspace = vt[rank:].T  # (m, m - rank), orthonormal columns
    return x_p, nullspace, True


def _reduce_problem(
    problem: SdpProblem, x_p: np.ndarray, nullspace: np.ndarray
) -> SdpProblem:
    """Substitute x = x_p + N z into objective and blocks."""
    reduced = SdpProblem(
        num_vars=nullspace.shape[1],
        objective=nullspace.T @ problem.objective,
        objective_const=problem.objective_const + float(problem.objective @ x_p),
    )
    for blk in problem.psd_blocks:
        const = blk.materialize(x_p)
        lin = np.tensordot(nullspace, blk.lin, axes=(0, 0))
        reduced.psd_blocks.append(PsdBlock(blk.size, const, lin))
    for arr in problem.arrow_blocks:
        reduced.arrow_blocks.append(
            ArrowBlock(
                arr.center_scale,
                arr.vec_dim,
                arr.v_of(x_p),
                arr.v_lin @ nullspace,
                arr.e_of(x_p),
                nullspace.T @ arr.e_lin,
            )
        )
    return reduced


def _arrow_as_psd(arr: ArrowBlock, m: int) -> PsdBlock:
    q = arr.vec_dim
    const = np.eye(q + 1)
    const[:q, q] = arr.v_const
    const[q, :q] = arr.v_const
    const[q, q] = arr.e_const * arr.center_scale
    lin = np.zeros((m, q + 1, q + 1))
    lin[:, :q, q] = arr.v_lin.T
    lin[:, q, :q] = arr.v_lin.T
    lin[:, q, q] = arr.e_lin * arr.center_scale
    return PsdBlock(q + 1, const, lin)


def _build_cones(problem: SdpProblem):
    """Stack SOC rows (arrows) then PSD rows into conelp's G, h, dims."""
    m = problem.num_vars
    g_parts, h_parts, soc_dims, psd_dims = [], [], [], []
    for arr in problem.arrow_blocks:
        c = arr.center_scale
        rows = 2 + arr.vec_dim
        h = np.concatenate(([arr.e_const * c + 1.0, arr.e_const * c - 1.0], 2.0 * arr.v_const))
        g = np.zeros((rows, m))
        g[0] = arr.e_lin * c
        g[1] = arr.e_lin * c
        g[2:] = 2.0 * arr.v_lin
        g_parts.append(-g)
        h_parts.append(h)
        soc_dims.append(rows)
    for blk in problem.psd_blocks:
        b = blk.size
        h_parts.append(blk.const.reshape(b * b))
        g_parts.append(-blk.lin.reshape((m, b * b)).T if m else np.zeros((b * b, 0)))
        psd_dims.append(b)
    G = np.vstack(g_parts) if g_parts else np.zeros((0, m))
    h = np.concatenate(h_parts) if h_parts else np.zeros(0)
    return G, h, {"l": 0, "q": soc_dims, "s": psd_dims}


def _feasibility_residual(problem: SdpProblem, x: np.ndarray) -> float:
    """Worst scaled constraint violation of x across all blocks."""
    worst = 0.0
    for blk in problem.psd_blocks:
        mat = blk.materialize(x)
        scale = 1.0 + float(np.abs(mat).max())
        lam_min = float(np.linalg.eigvalsh(mat)[0])
        worst = max(worst, max(0.0, -lam_min) / scale)
    for arr in problem.arrow_blocks:
        v = arr.v_of(x)
        scale = 1.0 + abs(arr.e_of(x) * arr.center_scale) + float(v @ v)
        worst = max(worst, max(0.0, -arr.margin(x)) / scale)
    return worst


def solve(problem: SdpProblem, config: SolverConfig = SolverConfig()) -> SdpSolution:
    """Solve the SDP; statuses are optimal / unbounded_below / infeasible /
    max_iters / numerical_failure.  Deterministic for fixed inputs."""
    m = problem.num_vars
    x_p, nullspace, feasible = _eliminate_equalities(problem, config.tol)
    if not feasible:
        return SdpSolution(INFEASIBLE, None, float("inf"), [], {"equality": float("inf")})

    work = problem
    if problem.eq_lhs is not None and problem.eq_lhs.shape[0] > 0:
        work = _reduce_problem(problem, x_p, nullspace)
    if config.lower_arrow_as_psd and work.arrow_blocks:
        work = SdpProblem(
            work.num_vars,
            work.objective,
            work.objective_const,
            work.psd_blocks + [_arrow_as_psd(a, work.num_vars) for a in work.arrow_blocks],
            [],
        )

    def lift(z: np.ndarray) -> np.ndarray:
        return x_p + nullspace @ z

    if work.num_vars == 0:
        # Fully determined by the equalities; just report feasibility.
        x = lift(np.zeros(0))
        resid = _feasibility_residual(problem, x)
        status = OPTIMAL if resid <= 10 * config.tol else INFEASIBLE
        value = float(problem.objective @ x + problem.objective_const)
        return SdpSolution(status, x, value, [], {"primal": resid, "gap": 0.0})

    G, h, dims = _build_cones(work)
    options = {
        "show_progress": False,
        "maxiters": config.max_iters,
        "abstol": config.tol,
        "reltol": max(10 * config.tol, 1e-9),
        "feastol": max(config.tol, 1e-9),
    }
    # An exception inside conelp (cone scaling breakdown) usually means the
    # iterates ran away along a descent ray.  Retrying with a smaller
    # iteration cap recovers the pre-breakdown iterate, which the "unknown"
    # classifier below can still judge (unbounded trend vs. plain failure).
    sol = None
    budget = options["maxiters"]
    while budget >= 3:
        try:
            sol = cvx_solvers.conelp(
                cvx_matrix(work.objective),
                cvx_matrix(G),
                cvx_matrix(h),
                dims,
                options={**options, "maxiters": budget},
            )
            break
        except (ValueError, ArithmeticError, ZeroDivisionError):
            budget //= 2
    if sol is None:
        return SdpSolution(
            NUMERICAL_FAILURE, None, float("nan"), [], {"error": float("nan")}
        )

    def extract_duals(sol) -> List[np.ndarray]:
        if sol.get("z") is None:
            return []
        z = np.array(sol["z"]).ravel()
        offset = sum(dims["q"])
        duals = []
        for b in dims["s"]:
            duals.append(z[offset : offset + b * b].reshape(b, b))
            offset += b * b
        return duals

    def _field(name: str) -> float:
        val = sol.get(name)
        return float(val) if val is not None else float("nan")

    status = sol["status"]
    residuals = {
        "primal": _field("primal infeasibility"),
        "dual": _field("dual infeasibility"),
        "gap": _field("gap"),
    }

    if status == "optimal":
        z = np.array(sol["x"]).ravel()
        x = lift(z)
        value = float(problem.objective @ x + problem.objective_const)
        feas = _feasibility_residual(problem, x)
        residuals["primal"] = max(residuals["primal"], feas) if np.isfinite(residuals["primal"]) else feas
        if feas > 10 * config.tol:
            return SdpSolution(NUMERICAL_FAILURE, x, value, extract_duals(sol), residuals)
        return SdpSolution(OPTIMAL, x, value, extract_duals(sol), residuals)

    if status == "primal infeasible":
        return SdpSolution(INFEASIBLE, None, float("inf"), extract_duals(sol), residuals)

    if status == "dual infeasible":
        z = np.array(sol["x"]).ravel()
        trend = float(work.objective @ z)
        ray = nullspace @ z
        return SdpSolution(
            UNBOUNDED, ray, float("-inf"), [], residuals, trend=trend
        )

    # status "unknown": classify from the final iterate.
    if sol.get("x") is not None:
        z = np.array(sol["x"]).ravel()
        x = lift(z)
        value = float(problem.objective @ x + problem.objective_const)
        feas = _feasibility_residual(problem, x)
        gap = sol.get("relative gap")
        if feas <= 10 * config.tol and gap is not None and gap <= 1e3 * config.tol:
            residuals["primal"] = feas
            return SdpSolution(OPTIMAL, x, value, extract_duals(sol), residuals)
        if feas <= 1e2 * config.tol:
            # Two descent signatures: the objective ran away, or the iterate
            # norm exploded while staying (exactly) feasible with a negative,
            # still-decreasing objective.
            runaway = value < -config.unbounded_threshold * (
                1.0 + abs(problem.objective_const)
            )
            norm_blowup = value < 0.0 and z.size > 0 and float(
                np.max(np.abs(z))
            ) > 1e9 * (1.0 + abs(problem.objective_const))
            if runaway or norm_blowup:
                return SdpSolution(
                    UNBOUNDED, x, float("-inf"), [], residuals, trend=value
                )
        return SdpSolution(MAX_ITERS, x, value, extract_duals(sol), residuals)
    return SdpSolution(NUMERICAL_FAILURE, None, float("nan"), [], residuals)


@lru_cache(maxsize=None)
def _moment_block_arrays(n: int, d: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Constant part and per-moment-variable parts of M_d(y) when the
    degree-k moment vector y has its constant pinned to 1 and the remaining
    s_k - 1 moments are decision variables in basis order."""
    pos = _position_matrix(n, d)
    s_d = pos.shape[0]
    m = len(build_indexer(n, k)) - 1
    const = (pos == 0).astype(float)
    lin = np.zeros((m, s_d, s_d))
    for i in range(s_d):
        for j in range(s_d):
            p = pos[i, j]
            if p > 0:
                lin[p - 1, i, j] = 1.0
    return const, lin


@dataclass
class MomentRelaxation:
    """A moment relaxation SDP plus the basis bookkeeping to read solutions."""

    f: Polynomial
    k: int
    d: int
    indexer: MonomialIndexer
    problem: SdpProblem
    localizers: List[np.ndarray] = field(default_factory=list)

    def moment_vector(self, x: np.ndarray) -> MomentVector:
        vals = np.concatenate(([1.0], np.asarray(x, dtype=float)))
        return MomentVector(self.indexer, vals)


def assemble_moment_relaxation(f: Polynomial, k: int) -> MomentRelaxation:
    """Order-k moment relaxation of min f: decision dim s_k - 1, one PSD
    block M_{floor(k/2)}(y), constant moment pinned by substitution."""
    if f.nvars < 1:
        raise ValueError("need at least one variable")
    if f.degree() > k:
        raise ValueError(f"deg f = {f.degree()} exceeds relaxation order {k}")
    n = f.nvars
    d = k // 2
    indexer = build_indexer(n, k)
    const, lin = _moment_block_arrays(n, d, k)
    cvec = poly_coeff_vector(f, indexer)
    problem = SdpProblem(
        num_vars=len(indexer) - 1,
        objective=cvec[1:].copy(),
        objective_const=float(cvec[0]),
        psd_blocks=[PsdBlock(const.shape[0], const.copy(), lin.copy())],
    )
    return MomentRelaxation(f, k, d, indexer, problem)


def assemble_nds_relaxation(f: Polynomial, k: int) -> MomentRelaxation:
    """Moment relaxation plus localizing equality rows for every partial
    derivative of f (the gradient-variety tightening); duplicate and zero
    rows are dropped."""
    relax = assemble_moment_relaxation(f, k)
    rows_list = []
    for i in range(f.nvars):
        p = f.partial(i)
        if p.is_zero():
            continue
        loc = localizing_rows(p, k)
        rows_list.append(loc.rows)
        relax.localizers.append(loc.rows)
    if rows_list:
        stacked = np.vstack(rows_list)
        stacked = stacked[np.any(stacked != 0.0, axis=1)]
        stacked = np.unique(stacked, axis=0)
        relax.problem.eq_lhs = stacked[:, 1:]
        relax.problem.eq_rhs = -stacked[:, 0]
    return relax
