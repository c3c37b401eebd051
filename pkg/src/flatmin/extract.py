"""Atom extraction from flat moment matrices, and measure validation.

A flat order-d moment matrix of rank r is the moment matrix of an r-atom
measure.  The atoms are recovered by the multiplication-operator method:
a column basis of r monomials of degree <= d-1 is selected by pivoted QR,
each coordinate's truncated multiplication operator N_l is written in that
basis by least squares on the matrix columns, and the joint eigenstructure
of the (commuting, for exactly flat input) family is read off the ordered
real Schur vectors of a random convex combination.  Weights come from
nonnegative least squares against the moments of degree <= d.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import nnls

from .moment import (
    atomic_moment_vector,
    build_indexer,
    moment_matrix,
    moments_from_matrix,
    monomial_values,
)
from .polyparse import Polynomial, poly_space


@dataclass
class ExtractConfig:
    tol_rank: float = 1e-4  # relative pivot cutoff for the column basis
    tau_weight: float = 1e-6  # atoms below this weight are pruned
    tau_commute: float = 1e-3  # scaled commutator / non-realness budget
    seed: int = 0


@dataclass
class AtomicMeasure:
    """Finitely many weighted points; atoms are sorted lexicographically."""

    atoms: np.ndarray  # (r, n)
    weights: np.ndarray  # (r,)
    reconstruction_residual: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.weights)

    def is_empty(self) -> bool:
        return len(self.weights) == 0


def _empty_measure(n: int, diagnostics: Dict[str, float]) -> AtomicMeasure:
    return AtomicMeasure(
        np.zeros((0, n)), np.zeros(0), float("inf"), diagnostics
    )


def extract_atoms(
    entries: np.ndarray,
    n: int,
    d: int,
    rank_hint: int,
    config: ExtractConfig = ExtractConfig(),
) -> AtomicMeasure:
    """Recover an atomic measure from a (near-)flat order-d moment matrix.

    rank_hint is the numerical rank of the matrix (at most s_{d-1} for flat
    input); extraction degrades to an empty measure with diagnostics when the
    eigenstructure is not consistent with commuting real operators.
    """
    entries = np.asarray(entries, dtype=float)
    s_d = poly_space(n, d).s
    s_sub = poly_space(n, d - 1).s
    if entries.shape != (s_d, s_d):
        raise ValueError(f"expected a {s_d}x{s_d} matrix, got {entries.shape}")
    if rank_hint > s_sub:
        raise ValueError(
            f"rank hint {rank_hint} exceeds the degree-{d - 1} basis size {s_sub}"
        )
    if rank_hint < 1:
        return _empty_measure(n, {"failure": 1.0, "rank_hint": float(rank_hint)})

    indexer = build_indexer(n, 2 * d)
    basis_d = build_indexer(n, d)

    # Column basis: pivoted QR over the degree-<=(d-1) columns.
    skel = entries[:, :s_sub]
    _, R, piv = scipy.linalg.qr(skel, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    cutoff = config.tol_rank * max(diag[0] if diag.size else 0.0, 1e-300)
    rank_skel = int(np.sum(diag > cutoff))
    r = min(rank_hint, rank_skel)
    if r < 1:
        return _empty_measure(n, {"failure": 1.0, "skeleton_rank": 0.0})
    basis_pos = np.sort(piv[:r])
    basis_expos = [basis_d.forward[p] for p in basis_pos]
    C = entries[:, basis_pos]

    # Truncated multiplication operators by least squares on the columns.
    ops = []
    for l in range(n):
        rhs = np.column_stack(
            [
                entries[:, basis_d.backward[_shift(beta, l)]]
                for beta in basis_expos
            ]
        )
        N_l, *_ = np.linalg.lstsq(C, rhs, rcond=None)
        ops.append(N_l)

    op_scale = (1.0 + max(np.linalg.norm(N, "fro") for N in ops)) ** 2
    commute = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            commute = max(
                commute, float(np.linalg.norm(ops[a] @ ops[b] - ops[b] @ ops[a], "fro"))
            )
    diagnostics = {"commutator": commute, "operator_scale": op_scale}
    if commute > config.tau_commute * op_scale:
        diagnostics["failure"] = 1.0
        return _empty_measure(n, diagnostics)

    # Joint eigenstructure from the ordered real Schur form of a random
    # convex combination; 2x2 bumps signal complex pairs and abort.
    rng = np.random.default_rng(config.seed)
    w = rng.random(n) + 0.1
    w /= w.sum()
    N = sum(wi * Ni for wi, Ni in zip(w, ops))
    T, Q = scipy.linalg.schur(np.asarray(N), output="real")
    sub = np.abs(np.diag(T, -1)) if r > 1 else np.zeros(0)
    t_scale = 1.0 + float(np.abs(T).max())
    diagnostics["max_subdiagonal"] = float(sub.max()) if sub.size else 0.0
    if sub.size and sub.max() > config.tau_commute * t_scale:
        diagnostics["failure"] = 1.0
        return _empty_measure(n, diagnostics)

    atoms = np.empty((r, n))
    for i in range(r):
        q = Q[:, i]
        for l in range(n):
            atoms[i, l] = float(q @ ops[l] @ q)

    # Weights: nonnegative least squares on the moments of degree <= d.
    y_full = moments_from_matrix(entries, n, d)
    target = y_full.values[:s_d]
    V = np.column_stack([monomial_values(a, basis_d) for a in atoms])
    weights, nnls_resid = nnls(V, target)
    diagnostics["nnls_residual"] = float(nnls_resid)
    keep = weights > config.tau_weight
    atoms, weights = atoms[keep], weights[keep]
    if weights.size == 0:
        diagnostics["failure"] = 1.0
        return _empty_measure(n, diagnostics)
    weights = weights / weights.sum()

    order = np.lexsort(tuple(atoms[:, l] for l in reversed(range(n))))
    atoms, weights = atoms[order], weights[order]

    rebuilt = moment_matrix(
        atomic_moment_vector(atoms, weights, 2 * d), d
    ).entries
    residual = float(
        np.linalg.norm(rebuilt - entries, "fro") / (1.0 + np.linalg.norm(entries, "fro"))
    )
    return AtomicMeasure(atoms, weights, residual, diagnostics)


def _shift(beta: Tuple[int, ...], l: int) -> Tuple[int, ...]:
    out = list(beta)
    out[l] += 1
    return tuple(out)


@dataclass
class ValidationReport:
    """Per-atom consistency checks and the resulting certification verdict.

    verdict is one of:
      certified_interval -- atoms reproduce U and (in gradient-variety mode)
                            all lie in the gradient variety;
      upper_bound_only   -- atoms are consistent with U but at least one
                            fails the gradient membership test, so only the
                            upper bound is certified;
      invalid            -- the measure is empty or does not reproduce U.
    """

    verdict: str
    f_values: np.ndarray
    grad_norms: np.ndarray
    reconstruction_shares: np.ndarray
    weighted_objective: float
    grad_tolerances: np.ndarray


def validate_atoms(
    measure: AtomicMeasure,
    f: Polynomial,
    upper_bound: float,
    mode: str,
    tol_val: float = 1e-2,
    tau_grad: float = 1e-4,
) -> ValidationReport:
    """Check a candidate optimal measure against f and the claimed bound U.

    Every atom must satisfy |f(a_i) - U| <= tol_val * (1 + |U|); in mode
    "nds" certification additionally requires every atom to be a critical
    point of f up to the scale-aware tolerance
    tau_grad * (1 + ||a_i||)^(deg f - 1).
    """
    if mode not in ("moment", "nds"):
        raise ValueError(f"unknown mode {mode!r}")
    if measure.is_empty():
        return ValidationReport(
            "invalid", np.zeros(0), np.zeros(0), np.zeros(0), float("nan"), np.zeros(0)
        )
    grads = f.gradient()
    f_values = np.array([f.evaluate(a) for a in measure.atoms])
    grad_norms = np.array(
        [
            float(np.linalg.norm([g.evaluate(a) for g in grads]))
            for a in measure.atoms
        ]
    )
    grad_tols = np.array(
        [
            tau_grad * (1.0 + float(np.linalg.norm(a))) ** max(f.degree() - 1, 0)
            for a in measure.atoms
        ]
    )
    weighted = float(measure.weights @ f_values)

    # Share of the reconstructed mass carried by each atom (diagnostic).
    d_indexer = build_indexer(f.nvars, max(1, f.degree() // 2))
    norms = np.array(
        [measure.weights[i] * float(np.linalg.norm(monomial_values(a, d_indexer)) ** 2)
         for i, a in enumerate(measure.atoms)]
    )
    shares = norms / norms.sum() if norms.sum() > 0 else norms

    slack = tol_val * (1.0 + abs(upper_bound))
    values_ok = bool(np.all(np.abs(f_values - upper_bound) <= slack))
    consistent = values_ok and abs(weighted - upper_bound) <= slack
    grads_ok = bool(np.all(grad_norms <= grad_tols))

    if not consistent:
        verdict = "invalid"
    elif mode == "nds" and not grads_ok:
        verdict = "upper_bound_only"
    else:
        verdict = "certified_interval"
    return ValidationReport(verdict, f_values, grad_norms, shares, weighted, grad_tols)
