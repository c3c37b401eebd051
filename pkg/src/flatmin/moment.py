"""Moment vectors, generalized Hankel (moment) matrices, localizing rows.

The monomial basis is graded x1-major lexicographic: monomials are listed by
ascending total degree, and within a degree by descending lexicographic
exponent, so for n=2 the basis starts 1, x1, x2, x1^2, x1*x2, x2^2, x1^3, ...
A moment vector y of degree k lists one value per basis monomial; the moment
matrix of order d has entry (i, j) = y[alpha_i + alpha_j] and is well defined
whenever k >= 2d.  Matrices whose entries are constant on each index-sum class
{(i, j) : alpha_i + alpha_j = gamma} are exactly the generalized Hankel ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .polyparse import Exponent, Polynomial, poly_space


def _monomials_of_degree(n: int, deg: int) -> Iterator[Exponent]:
    if n == 1:
        yield (deg,)
        return
    for e1 in range(deg, -1, -1):
        for rest in _monomials_of_degree(n - 1, deg - e1):
            yield (e1,) + rest


@dataclass(frozen=True)
class MonomialIndexer:
    """Bidirectional map between basis positions and exponents, degree <= k.

    forward[pos] is the exponent tuple at a position; backward inverts it.
    Indexers of the same n nest: forward of degree k1 <= k2 is a prefix of
    the degree-k2 listing, so positions are stable across degrees.
    """

    n: int
    k: int
    forward: Tuple[Exponent, ...]
    backward: Dict[Exponent, int]

    def position(self, expo: Exponent) -> int:
        try:
            return self.backward[tuple(expo)]
        except KeyError:
            raise KeyError(
                f"monomial {tuple(expo)} outside basis (n={self.n}, k={self.k})"
            ) from None

    def __len__(self) -> int:
        return len(self.forward)


@lru_cache(maxsize=None)
def build_indexer(n: int, k: int) -> MonomialIndexer:
    """Construct (and cache) the graded x1-major lex indexer for (n, k)."""
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    forward: List[Exponent] = []
    for deg in range(k + 1):
        forward.extend(_monomials_of_degree(n, deg))
    assert len(forward) == poly_space(n, k).s
    backward = {expo: i for i, expo in enumerate(forward)}
    return MonomialIndexer(n, k, tuple(forward), backward)


@lru_cache(maxsize=None)
def _exponent_array(n: int, k: int) -> np.ndarray:
    return np.array(build_indexer(n, k).forward, dtype=np.int64)


@lru_cache(maxsize=None)
def _position_matrix(n: int, d: int) -> np.ndarray:
    """pos[i, j] = position of alpha_i + alpha_j in the degree-2d basis."""
    idx_d = build_indexer(n, d)
    idx_2d = build_indexer(n, 2 * d)
    s_d = len(idx_d)
    pos = np.empty((s_d, s_d), dtype=np.int64)
    for i, a in enumerate(idx_d.forward):
        for j, b in enumerate(idx_d.forward):
            pos[i, j] = idx_2d.backward[tuple(x + y for x, y in zip(a, b))]
    return pos


@lru_cache(maxsize=None)
def _index_classes(n: int, d: int) -> Tuple[Tuple[int, np.ndarray, np.ndarray], ...]:
    """Index-sum classes of the order-d matrix, one per degree-<=2d moment.

    Each entry is (moment_position, rows, cols) with rows/cols the matrix
    coordinates whose label exponents sum to that moment.
    """
    pos = _position_matrix(n, d)
    classes = []
    for m in range(len(build_indexer(n, 2 * d))):
        rows, cols = np.nonzero(pos == m)
        classes.append((m, rows, cols))
    return tuple(classes)


@dataclass
class MomentVector:
    """Pseudo-moment values y_alpha for all |alpha| <= k, in basis order."""

    indexer: MonomialIndexer
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.indexer),):
            raise ValueError(
                f"expected {len(self.indexer)} values, got {self.values.shape}"
            )

    def value(self, expo: Exponent) -> float:
        return float(self.values[self.indexer.position(expo)])


@dataclass
class MomentMatrix:
    """Order-d moment matrix; rows/columns are labeled by forward[:size]."""

    d: int
    size: int
    entries: np.ndarray
    indexer: MonomialIndexer  # degree-2d indexer used for moment lookups

    def row_labels(self) -> Tuple[Exponent, ...]:
        return self.indexer.forward[: self.size]


def moment_matrix(y: MomentVector, d: int) -> MomentMatrix:
    """Materialize M_d(y); requires y to carry moments up to degree 2d."""
    n, k = y.indexer.n, y.indexer.k
    if 2 * d > k:
        raise ValueError(f"moment matrix of order {d} needs degree {2 * d} > {k}")
    pos = _position_matrix(n, d)
    entries = y.values[pos]
    return MomentMatrix(d, pos.shape[0], entries, build_indexer(n, 2 * d))


def moments_from_matrix(entries: np.ndarray, n: int, d: int) -> MomentVector:
    """Read a degree-2d moment vector off a (near-)Hankel order-d matrix.

    Entries within each index-sum class are averaged, so the result is exact
    for generalized Hankel input and a least-squares Hankel projection
    otherwise.
    """
    entries = np.asarray(entries, dtype=float)
    s_d = len(build_indexer(n, d))
    if entries.shape != (s_d, s_d):
        raise ValueError(f"expected a {s_d}x{s_d} matrix, got {entries.shape}")
    vals = np.empty(len(build_indexer(n, 2 * d)))
    for m, rows, cols in _index_classes(n, d):
        vals[m] = float(np.mean(entries[rows, cols]))
    return MomentVector(build_indexer(n, 2 * d), vals)


def hankel_residual(entries: np.ndarray, n: int, d: int) -> float:
    """Max over index-sum classes of (max entry - min entry); 0 iff Hankel."""
    entries = np.asarray(entries, dtype=float)
    worst = 0.0
    for _, rows, cols in _index_classes(n, d):
        if len(rows) < 2:
            continue
        vals = entries[rows, cols]
        worst = max(worst, float(vals.max() - vals.min()))
    return worst


def monomial_values(point: Sequence[float], indexer: MonomialIndexer) -> np.ndarray:
    """Vector of all basis monomials evaluated at a point."""
    pt = np.asarray(point, dtype=float)
    if pt.shape != (indexer.n,):
        raise ValueError(f"point has shape {pt.shape}, need ({indexer.n},)")
    expos = _exponent_array(indexer.n, indexer.k)
    return np.prod(pt[np.newaxis, :] ** expos, axis=1)


def atomic_moment_vector(
    points: Sequence[Sequence[float]], weights: Sequence[float], k: int
) -> MomentVector:
    """Moments up to degree k of the measure sum_i weights[i] * delta(points[i]).

    Weights must be positive and sum to 1 within 1e-8, so the constant moment
    is exactly renormalized to 1.
    """
    if len(points) == 0 or len(points) != len(weights):
        raise ValueError("need matching, nonempty points and weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if abs(w.sum() - 1.0) > 1e-8:
        raise ValueError(f"weights sum to {w.sum()}, expected 1")
    w = w / w.sum()
    pts = np.asarray(points, dtype=float)
    n = pts.shape[1]
    indexer = build_indexer(n, k)
    vals = np.zeros(len(indexer))
    for wi, pt in zip(w, pts):
        vals += wi * monomial_values(pt, indexer)
    return MomentVector(indexer, vals)


def gaussian_moment_vector(n: int, k: int, sigma: float = 1.0) -> MomentVector:
    """Moments of the centered product Gaussian with scale sigma.

    E[x^(2m)] = sigma^(2m) (2m-1)!!, odd moments vanish; the moment matrix of
    any order d with 2d <= k is positive definite, which makes this vector a
    strict-feasibility ridge for mixing into atomic starts.
    """
    indexer = build_indexer(n, k)
    onedim = [1.0]
    for m in range(1, k + 1):
        onedim.append(0.0 if m % 2 else sigma**m * _double_factorial(m - 1))
    vals = np.array(
        [float(np.prod([onedim[e] for e in expo])) for expo in indexer.forward]
    )
    return MomentVector(indexer, vals)


def _double_factorial(m: int) -> float:
    out = 1.0
    while m > 1:
        out *= m
        m -= 2
    return out


@dataclass
class LocalizingVector:
    """Stacked localizing rows V_{k,p}: one row per basis monomial of degree
    <= k - deg p; row beta pairs a moment vector y with (p * x^beta), so
    rows @ y.values = 0 encodes the measure-theoretic constraint p = 0.
    """

    p: Polynomial
    k: int
    rows: np.ndarray

    def apply(self, y: MomentVector) -> np.ndarray:
        if y.indexer.k != self.k or y.indexer.n != self.p.nvars:
            raise ValueError("moment vector degree/arity mismatch")
        return self.rows @ y.values


def localizing_rows(p: Polynomial, k: int) -> LocalizingVector:
    """Build V_{k,p}; requires deg p <= k (degree violation otherwise)."""
    if p.is_zero():
        raise ValueError("localizing rows of the zero polynomial are trivial")
    d_p = k - p.degree()
    if d_p < 0:
        raise ValueError(f"deg p = {p.degree()} exceeds relaxation degree {k}")
    n = p.nvars
    indexer = build_indexer(n, k)
    basis = build_indexer(n, d_p)
    rows = np.zeros((len(basis), len(indexer)))
    for b, beta in enumerate(basis.forward):
        for gamma, coeff in p.terms.items():
            col = indexer.position(tuple(x + y for x, y in zip(beta, gamma)))
            rows[b, col] += coeff
    return LocalizingVector(p, k, rows)


def poly_coeff_vector(p: Polynomial, indexer: MonomialIndexer) -> np.ndarray:
    """Coefficients of p laid out on the basis, so <f, y> = vec @ y.values."""
    if p.nvars != indexer.n:
        raise ValueError(f"polynomial has {p.nvars} vars, basis has {indexer.n}")
    if p.degree() > indexer.k:
        raise ValueError(f"deg p = {p.degree()} exceeds basis degree {indexer.k}")
    vec = np.zeros(len(indexer))
    for expo, coeff in p.terms.items():
        vec[indexer.position(expo)] = coeff
    return vec
