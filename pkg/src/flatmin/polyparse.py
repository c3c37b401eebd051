"""Sparse multivariate polynomials over the reals, plus a small ASCII grammar.

A polynomial in variables x1..xn is stored as a dict mapping exponent tuples
of length nvars to nonzero float coefficients; the zero polynomial is the
empty dict.  The text grammar (whitespace ignored, no parentheses):

    poly  := [sign] term { sign term }
    term  := coeff [ '*' monos ] | monos
    monos := mono { '*' mono }
    mono  := 'x' INT [ '^' INT ]
    coeff := NUM [ '/' NUM ]          e.g. 3, 0.5, 1e-3, 1/60

Example: "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1".
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Dict, Iterator, Sequence, Tuple

Exponent = Tuple[int, ...]
TermMap = Dict[Exponent, float]


class PolyParseError(ValueError):
    """Raised on malformed polynomial text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class PolySpace:
    """Dimension bookkeeping for real polynomials of degree <= k in n variables.

    s is the dimension of the space (number of monomials of degree <= k),
    r the number of monomials of degree exactly k.
    """

    n: int
    k: int
    s: int
    r: int


def poly_space(n: int, k: int) -> PolySpace:
    """Return PolySpace(n, k) with s = C(n+k, n) and r = C(n+k-1, n-1)."""
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    return PolySpace(n, k, math.comb(n + k, n), math.comb(n + k - 1, n - 1))


class Polynomial:
    """Immutable-by-convention sparse polynomial in variables x1..xn."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: TermMap):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        clean: TermMap = {}
        for expo, coeff in terms.items():
            if len(expo) != nvars:
                raise ValueError(f"exponent {expo} does not have length {nvars}")
            if any(e < 0 for e in expo):
                raise ValueError(f"negative exponent in {expo}")
            c = float(coeff)
            if c != 0.0:
                clean[tuple(int(e) for e in expo)] = c
        self.nvars = nvars
        self.terms = clean

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, expo: Exponent) -> float:
        return self.terms.get(tuple(expo), 0.0)

    def evaluate(self, point: Sequence[float]) -> float:
        """Evaluate at a point, term by term with per-term power accumulation."""
        if len(point) != self.nvars:
            raise ValueError(
                f"point has {len(point)} coordinates, polynomial has {self.nvars}"
            )
        total = 0.0
        for expo, coeff in self.terms.items():
            val = coeff
            for x, e in zip(point, expo):
                if e:
                    val *= x**e
            total += val
        return total

    def partial(self, i: int) -> "Polynomial":
        """Partial derivative with respect to x_{i+1} (0-based index i)."""
        if not 0 <= i < self.nvars:
            raise ValueError(f"variable index {i} out of range for n={self.nvars}")
        out: TermMap = {}
        for expo, coeff in self.terms.items():
            if expo[i] == 0:
                continue
            new = list(expo)
            new[i] -= 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coeff * expo[i]
        return Polynomial(self.nvars, out)

    def gradient(self) -> Tuple["Polynomial", ...]:
        return tuple(self.partial(i) for i in range(self.nvars))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return add(self, other)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return multiply(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {format_polynomial(self)!r})"


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    """Sum of two polynomials; variable counts must agree."""
    if p.nvars != q.nvars:
        raise ValueError(f"variable count mismatch: {p.nvars} vs {q.nvars}")
    out = dict(p.terms)
    for expo, coeff in q.terms.items():
        out[expo] = out.get(expo, 0.0) + coeff
    return Polynomial(p.nvars, out)


def scale(p: Polynomial, c: float) -> Polynomial:
    return Polynomial(p.nvars, {e: c * v for e, v in p.terms.items()})


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    """Product of two polynomials; variable counts must agree."""
    if p.nvars != q.nvars:
        raise ValueError(f"variable count mismatch: {p.nvars} vs {q.nvars}")
    out: TermMap = {}
    for e1, c1 in p.terms.items():
        for e2, c2 in q.terms.items():
            key = tuple(a + b for a, b in zip(e1, e2))
            out[key] = out.get(key, 0.0) + c1 * c2
    return Polynomial(p.nvars, out)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<var>x(?P<idx>\d+))|(?P<op>[+\-*/^]))"
)


def _tokenize(text: str) -> Iterator[Tuple[str, object, int]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                return
            bad = len(text) - len(text[pos:].lstrip())
            raise PolyParseError(f"unexpected character {text[bad]!r}", bad)
        if m.group("num") is not None:
            yield ("num", m.group("num"), m.start("num"))
        elif m.group("var") is not None:
            yield ("var", int(m.group("idx")), m.start("var"))
        else:
            yield ("op", m.group("op"), m.start("op"))
        pos = m.end()


class _Parser:
    """Recursive-descent parser for the term grammar above."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is not None:
            self.i += 1
        return tok

    def fail(self, message: str):
        tok = self.peek()
        pos = tok[2] if tok is not None else len(self.text)
        raise PolyParseError(message, pos)

    def parse(self) -> Dict[Tuple[Tuple[int, int], ...], float]:
        if not self.tokens:
            raise PolyParseError("empty polynomial", 0)
        terms: Dict[Tuple[Tuple[int, int], ...], float] = {}
        sign = 1.0
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            sign = -1.0 if tok[1] == "-" else 1.0
            self.next()
        while True:
            coeff, varmap = self.term()
            key = tuple(sorted((i, e) for i, e in varmap.items() if e > 0))
            terms[key] = terms.get(key, 0.0) + sign * coeff
            tok = self.peek()
            if tok is None:
                return terms
            if tok[0] == "op" and tok[1] in "+-":
                sign = -1.0 if tok[1] == "-" else 1.0
                self.next()
                if self.peek() is None:
                    raise PolyParseError("trailing operator", tok[2])
            else:
                self.fail(f"expected '+' or '-', got {tok[1]!r}")

    def term(self):
        tok = self.peek()
        if tok is None:
            raise PolyParseError("expected a term", len(self.text))
        if tok[0] == "num":
            coeff = self.coeff()
            tok = self.peek()
            if tok is not None and tok[0] == "op" and tok[1] == "*":
                self.next()
                return coeff, self.monos()
            return coeff, {}
        if tok[0] == "var":
            return 1.0, self.monos()
        self.fail(f"expected a coefficient or variable, got {tok[1]!r}")

    def coeff(self) -> float:
        tok = self.next()
        value = float(tok[1])
        nxt = self.peek()
        if nxt is not None and nxt[0] == "op" and nxt[1] == "/":
            self.next()
            den_tok = self.peek()
            if den_tok is None or den_tok[0] != "num":
                self.fail("expected a denominator after '/'")
            self.next()
            den = float(den_tok[1])
            if den == 0.0:
                raise PolyParseError("zero denominator", den_tok[2])
            value /= den
        return value

    def monos(self) -> Dict[int, int]:
        expo = self.mono()
        while True:
            tok = self.peek()
            if tok is not None and tok[0] == "op" and tok[1] == "*":
                self.next()
                nxt = self.peek()
                if nxt is None or nxt[0] != "var":
                    self.fail("expected a variable after '*'")
                more = self.mono()
                for idx, e in more.items():
                    expo[idx] = expo.get(idx, 0) + e
            else:
                return expo

    def mono(self) -> Dict[int, int]:
        tok = self.next()
        if tok is None or tok[0] != "var":
            raise PolyParseError(
                "expected a variable", tok[2] if tok else len(self.text)
            )
        idx = tok[1]
        if idx == 0:
            raise PolyParseError("variable indices start at 1", tok[2])
        exp = 1
        nxt = self.peek()
        if nxt is not None and nxt[0] == "op" and nxt[1] == "^":
            self.next()
            etok = self.peek()
            if etok is None or etok[0] != "num":
                self.fail("expected an integer exponent after '^'")
            self.next()
            raw = str(etok[1])
            if not raw.isdigit():
                raise PolyParseError(f"exponent must be a nonnegative integer, got {raw}", etok[2])
            exp = int(raw)
        return {idx: exp}


def parse_polynomial(text: str, nvars: int | None = None) -> Polynomial:
    """Parse polynomial text into a Polynomial.

    Args:
        text: the polynomial in the module grammar.
        nvars: explicit variable count; inferred as the largest subscript
            mentioned when omitted.  An explicit count smaller than a
            mentioned subscript is an error.

    Returns:
        The parsed Polynomial with canonicalized (merged, zero-pruned) terms.
    """
    raw = _Parser(text).parse()
    max_idx = max((max((i for i, _ in key), default=0) for key in raw), default=0)
    if nvars is None:
        nvars = max_idx
    elif max_idx > nvars:
        raise PolyParseError(
            f"polynomial mentions x{max_idx} but nvars={nvars}", 0
        )
    terms: TermMap = {}
    for varmap, coeff in raw.items():
        expo = [0] * nvars
        for idx, e in varmap:
            expo[idx - 1] = e
        key = tuple(expo)
        terms[key] = terms.get(key, 0.0) + coeff
    return Polynomial(nvars, terms)


def _format_number(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def _format_monomial(expo: Exponent) -> str:
    parts = []
    for i, e in enumerate(expo):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e > 1:
            parts.append(f"x{i + 1}^{e}")
    return "*".join(parts)


def format_polynomial(p: Polynomial) -> str:
    """Canonical text form; parse(format(p)) recovers p exactly.

    Terms are emitted by ascending total degree, ties broken by descending
    lexicographic exponent (x1-major), matching the moment basis order.
    """
    if not p.terms:
        return "0"
    keys = sorted(p.terms, key=lambda e: (sum(e), tuple(-x for x in e)))
    pieces = []
    for expo in keys:
        coeff = p.terms[expo]
        mono = _format_monomial(expo)
        mag = abs(coeff)
        if not mono:
            body = _format_number(mag)
        elif mag == 1.0:
            body = mono
        else:
            body = f"{_format_number(mag)}*{mono}"
        pieces.append(("-" if coeff < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out
