"""Small binary linear component codes and their extrinsic erasure functions.

A node of a doubly-generalized protograph enforces a short binary linear
code.  Over the erasure channel the extrinsic MAP output at one position of
such a code is erased exactly when some codeword that is nonzero at that
position has its remaining support fully erased.  The probability of that
event, with independent erasures on the other positions, is a multilinear
polynomial with integer coefficients.  This module builds those polynomials
exactly (no floating point) so their coefficients can be inspected directly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

MAX_LENGTH = 16
MAX_DIMENSION = 12
EVAL_TOLERANCE = 1e-12


class CodeError(ValueError):
    """Raised for invalid or oversized component codes."""


def _rank_gf2(rows: Sequence[int]) -> int:
    """Rank over GF(2) of row vectors packed as integers."""
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


@dataclass(frozen=True)
class BinaryLinearCode:
    """Binary linear (n, k) code given by k generator rows.

    Parameters
    ----------
    n : int
        Code length.
    generators : tuple of tuple of int
        ``k`` linearly independent binary rows of length ``n``.
    name : str, optional
        Label used in protograph files and reports.
    """

    n: int
    generators: tuple[tuple[int, ...], ...]
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise CodeError("code length must be positive")
        if self.n > MAX_LENGTH:
            raise CodeError(f"code length {self.n} exceeds cap {MAX_LENGTH}")
        if len(self.generators) > MAX_DIMENSION:
            raise CodeError(f"code dimension {len(self.generators)} exceeds cap {MAX_DIMENSION}")
        for row in self.generators:
            if len(row) != self.n or any(b not in (0, 1) for b in row):
                raise CodeError(f"generator row {row} is not a binary vector of length {self.n}")
        if _rank_gf2(self._packed_rows()) != len(self.generators):
            raise CodeError("generator rows are linearly dependent")

    @classmethod
    def from_codewords(cls, n: int, words: Iterable[str], name: str = "") -> BinaryLinearCode:
        """Build a code from an explicit codeword list (must be a linear space)."""
        vecs = []
        for w in words:
            if len(w) != n or set(w) - {"0", "1"}:
                raise CodeError(f"codeword {w!r} is not a binary string of length {n}")
            vecs.append(int(w, 2))
        space = set(vecs)
        if 0 not in space or any((a ^ b) not in space for a in space for b in space):
            raise CodeError("codeword list is not closed under addition")
        size = len(space)
        if size & (size - 1):
            raise CodeError("codeword list size is not a power of two")
        # reduced row echelon basis, so [G | I] has a canonical channel labelling
        basis: list[int] = []
        for v in sorted(space, reverse=True):
            for b in basis:
                v = min(v, v ^ b)
            if v:
                basis = [min(b, b ^ v) for b in basis] + [v]
                basis.sort(reverse=True)
        gens = tuple(tuple(int(ch) for ch in format(v, f"0{n}b")) for v in basis)
        return cls(n, gens, name)

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.generators, dtype=np.uint8).reshape(self.k, self.n)

    def _packed_rows(self) -> list[int]:
        return [int("".join(map(str, row)), 2) if row else 0 for row in self.generators]

    def codeword_ints(self) -> list[int]:
        """Codewords packed as integers, position 1 is the most significant bit."""
        rows = self._packed_rows()
        words = []
        for u in range(1 << self.k):
            w = 0
            for b, r in enumerate(rows):
                if u >> b & 1:
                    w ^= r
            words.append(w)
        return sorted(words)

    def __str__(self) -> str:
        return self.name or f"({self.n},{self.k}) code"


def enumerate_codewords(code: BinaryLinearCode) -> list[str]:
    """All ``2**k`` codewords as binary strings, sorted lexicographically."""
    return [format(w, f"0{code.n}b") for w in code.codeword_ints()]


def min_distance(code: BinaryLinearCode) -> int:
    """Minimum Hamming weight over the nonzero codewords."""
    if code.k < 1:
        raise CodeError("minimum distance undefined for the zero code")
    return min(bin(w).count("1") for w in code.codeword_ints() if w)


def extend_for_variable(code: BinaryLinearCode) -> BinaryLinearCode:
    """Code with generator ``[G | I_k]``; the last k positions are channel slots."""
    k = code.k
    gens = tuple(tuple(row) + tuple(int(i == j) for j in range(k)) for i, row in enumerate(code.generators))
    return BinaryLinearCode(code.n + k, gens, f"ext({code})" if code.name else "")


# ---------------------------------------------------------------------------
# built-in codes


def repetition(d: int) -> BinaryLinearCode:
    return BinaryLinearCode(d, ((1,) * d,), f"rep{d}")


def single_parity_check(d: int) -> BinaryLinearCode:
    gens = tuple(tuple(int(j == i or j == d - 1) for j in range(d)) for i in range(d - 1))
    return BinaryLinearCode(d, gens, f"spc{d}")


def hamming74() -> BinaryLinearCode:
    gens = (
        (1, 0, 0, 0, 1, 1, 0),
        (0, 1, 0, 0, 1, 0, 1),
        (0, 0, 1, 0, 0, 1, 1),
        (0, 0, 0, 1, 1, 1, 1),
    )
    return BinaryLinearCode(7, gens, "hamming74")


def dual_hamming74() -> BinaryLinearCode:
    gens = (
        (1, 1, 0, 1, 1, 0, 0),
        (1, 0, 1, 1, 0, 1, 0),
        (0, 1, 1, 1, 0, 0, 1),
    )
    return BinaryLinearCode(7, gens, "dual_hamming74")


def builtin_code(name: str) -> BinaryLinearCode:
    """Resolve ``rep<d>``, ``spc<d>``, ``hamming74`` or ``dual_hamming74``."""
    m = re.fullmatch(r"(rep|spc)(\d+)", name)
    if m:
        d = int(m.group(2))
        if d < 1:
            raise CodeError(f"bad built-in code {name!r}")
        return repetition(d) if m.group(1) == "rep" else single_parity_check(d)
    if name == "hamming74":
        return hamming74()
    if name == "dual_hamming74":
        return dual_hamming74()
    raise CodeError(f"unknown code {name!r}")


BUILTIN_NAMES = ("rep<d>", "spc<d>", "hamming74", "dual_hamming74")


# ---------------------------------------------------------------------------
# multilinear polynomials


@dataclass(frozen=True)
class MultilinearPolynomial:
    """Integer-coefficient multilinear polynomial over named variables.

    ``terms`` maps a frozenset of variable names to its coefficient; the empty
    set is the constant term.  Zero coefficients are never stored.
    """

    variables: tuple[Hashable, ...]
    terms: Mapping[frozenset, int] = field(default_factory=dict)

    def __post_init__(self):
        known = set(self.variables)
        for mono, coef in self.terms.items():
            if not coef:
                raise ValueError("zero coefficient stored")
            if not mono <= known:
                raise ValueError(f"monomial {set(mono)} uses undeclared variables")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int | None:
        """Least total degree over the stored terms, ``None`` for the zero polynomial."""
        return min((len(m) for m in self.terms), default=None)

    def coefficient(self, *names: Hashable) -> int:
        return self.terms.get(frozenset(names), 0)

    def evaluate(self, assignment: Mapping[Hashable, float]) -> float:
        """Exact evaluation at a point of ``[0, 1]^vars``.

        Results outside [0, 1] by at most 1e-12 are clamped; anything larger
        indicates a construction bug and raises.
        """
        missing = [v for v in self.variables if v not in assignment]
        if missing:
            raise KeyError(f"unassigned variables: {missing}")
        total = 0.0
        for mono, coef in self.terms.items():
            t = float(coef)
            for v in mono:
                t *= assignment[v]
            total += t
        if total < 0.0 or total > 1.0:
            if total < -EVAL_TOLERANCE or total > 1.0 + EVAL_TOLERANCE:
                raise ArithmeticError(f"erasure polynomial evaluated to {total!r}")
            total = min(max(total, 0.0), 1.0)
        return total

    def substitute(self, values: Mapping[Hashable, int]) -> MultilinearPolynomial:
        """Replace some variables by integer constants (typically 0 or 1)."""
        out: dict[frozenset, int] = {}
        for mono, coef in self.terms.items():
            c = coef
            keep = []
            for v in mono:
                if v in values:
                    c *= values[v]
                else:
                    keep.append(v)
            if c:
                key = frozenset(keep)
                out[key] = out.get(key, 0) + c
        out = {m: c for m, c in out.items() if c}
        return MultilinearPolynomial(tuple(v for v in self.variables if v not in values), out)

    def rename(self, mapping: Mapping[Hashable, Hashable]) -> MultilinearPolynomial:
        terms = {frozenset(mapping[v] for v in m): c for m, c in self.terms.items()}
        return MultilinearPolynomial(tuple(mapping[v] for v in self.variables), terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"

        def key(item):
            mono = item[0]
            return (len(mono), sorted(map(str, mono)))

        parts = []
        for mono, coef in sorted(self.terms.items(), key=key):
            body = "*".join(f"x{v}" for v in sorted(mono, key=str)) or "1"
            mag = abs(coef)
            text = body if mag == 1 else (f"{mag}" if not mono else f"{mag}*{body}")
            parts.append(("- " if coef < 0 else "+ ") + text)
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]


def extrinsic_erasure_polynomial(code: BinaryLinearCode, pos: int) -> MultilinearPolynomial:
    """Erasure probability of the extrinsic MAP output at ``pos`` (1-based).

    Variables are the other positions' numbers.  Built by expanding the
    erasure-pattern indicator over all ``2**(n-1)`` patterns and applying a
    Moebius transform to reach the monomial basis.
    """
    n = code.n
    if not 1 <= pos <= n:
        raise CodeError(f"position {pos} outside 1..{n}")
    others = [p for p in range(1, n + 1) if p != pos]
    m = n - 1
    size = 1 << m
    indicator = np.zeros(size, dtype=np.int64)
    for w in code.codeword_ints():
        if not (w >> (n - pos)) & 1:
            continue
        mask = 0
        for b, p in enumerate(others):
            if (w >> (n - p)) & 1:
                mask |= 1 << b
        indicator[mask] = 1
    # upward closure: pattern S is bad iff it contains a minimal bad support
    for b in range(m):
        view = indicator.reshape(-1, 2, 1 << b)
        view[:, 1, :] |= view[:, 0, :]
    coef = indicator.copy()
    for b in range(m):
        view = coef.reshape(-1, 2, 1 << b)
        view[:, 1, :] -= view[:, 0, :]
    terms = {}
    for mask in np.flatnonzero(coef):
        mono = frozenset(others[b] for b in range(m) if mask >> b & 1)
        terms[mono] = int(coef[mask])
    return MultilinearPolynomial(tuple(others), terms)


def recoverable_by_rank(code: BinaryLinearCode, pos: int, erased: Iterable[int]) -> bool:
    """True if position ``pos`` is determined by the unerased other positions.

    Independent check used by tests: ``pos`` is recoverable iff adding its
    column to the known columns of the generator does not raise the rank.
    """
    erased = set(erased)
    known = [p for p in range(1, code.n + 1) if p != pos and p not in erased]
    g = code.matrix

    def rank(cols):
        rows = [int("".join(str(int(g[r, c - 1])) for c in cols), 2) if cols else 0 for r in range(code.k)]
        return _rank_gf2(rows)

    return rank(known + [pos]) == rank(known)


# ---------------------------------------------------------------------------
# least-degree profiles


@dataclass(frozen=True)
class PositionProfile:
    """Least total degree of one extrinsic function and its degree-1 terms.

    ``min_degree`` counts only non-constant variables; ``None`` means the
    function is identically zero (the position is never erased).
    ``linear_terms`` maps each variable of a degree-1 term to its coefficient,
    itself a polynomial in the channel erasure probability stored as a tuple
    of coefficients of increasing powers.
    """

    position: int
    min_degree: int | None
    linear_terms: Mapping[Hashable, tuple[int, ...]]


@dataclass(frozen=True)
class MinDegreeProfile:
    code: BinaryLinearCode
    variable_node: bool
    positions: tuple[PositionProfile, ...]

    def __getitem__(self, pos: int) -> PositionProfile:
        return self.positions[pos - 1]


def least_degree(
    poly: MultilinearPolynomial, constants: Iterable[Hashable] = ()
) -> tuple[int | None, dict[Hashable, tuple[int, ...]]]:
    """Least degree of ``poly`` in its non-constant variables.

    Variables listed in ``constants`` all stand for the same channel erasure
    probability; terms are grouped by their non-constant part and a group
    counts only if its coefficient polynomial in that probability is nonzero.
    """
    constants = set(constants)
    groups: dict[frozenset, dict[int, int]] = {}
    for mono, coef in poly.terms.items():
        edge = frozenset(v for v in mono if v not in constants)
        power = len(mono) - len(edge)
        g = groups.setdefault(edge, {})
        g[power] = g.get(power, 0) + coef
    live = {}
    for edge, g in groups.items():
        if any(g.values()):
            top = max(p for p, c in g.items() if c)
            live[edge] = tuple(g.get(p, 0) for p in range(top + 1))
    if not live:
        return None, {}
    deg = min(len(e) for e in live)
    linear = {next(iter(e)): c for e, c in live.items() if len(e) == 1} if deg == 1 else {}
    return deg, linear


def min_degree_profile(code: BinaryLinearCode, variable_node: bool = False) -> MinDegreeProfile:
    """Per-position least degree of the extrinsic erasure functions.

    With ``variable_node`` the code is first extended by its channel slots,
    which are treated as constants (the channel erasure probability).
    """
    target = extend_for_variable(code) if variable_node else code
    slots = range(code.n + 1, target.n + 1)
    out = []
    for pos in range(1, code.n + 1):
        deg, linear = least_degree(extrinsic_erasure_polynomial(target, pos), slots)
        out.append(PositionProfile(pos, deg, linear))
    return MinDegreeProfile(code, variable_node, tuple(out))


def punctured(code: BinaryLinearCode, positions: Iterable[int]) -> BinaryLinearCode:
    """Project the code onto the complement of ``positions`` (1-based).

    Puncturing a position is the structural counterpart of declaring its
    incoming message permanently erased.
    """
    drop = set(positions)
    keep = [p for p in range(1, code.n + 1) if p not in drop]
    if not keep:
        raise CodeError("cannot puncture every position")
    words = {format(w, f"0{code.n}b") for w in code.codeword_ints()}
    proj = sorted({"".join(w[p - 1] for p in keep) for w in words})
    return BinaryLinearCode.from_codewords(len(keep), proj, f"{code}-p" if code.name else "")


def low_weight_supports(code: BinaryLinearCode, pos: int, max_weight: int = 2) -> list[frozenset]:
    """Supports (minus ``pos``) of codewords through ``pos`` with weight <= ``max_weight``."""
    n = code.n
    found = []
    for w in code.codeword_ints():
        if (w >> (n - pos)) & 1 and 0 < bin(w).count("1") <= max_weight:
            found.append(frozenset(p for p in range(1, n + 1) if p != pos and (w >> (n - p)) & 1))
    return found
