"""Finitely generated multiplicative subgroups of the positive rationals.

A group is presented by a basis of positive rationals that must be pairwise
multiplicatively independent; elements are integer exponent vectors over the
basis.  Membership of an arbitrary rational is decided exactly by prime
factorization, so the group predicate on rational values never needs a
search box.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional


class GroupError(ValueError):
    pass


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of a positive integer by trial division."""
    if n <= 0:
        raise ValueError("positive integer required")
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def rational_valuation(q: Fraction) -> dict[int, int]:
    """Map prime -> exponent for a positive rational."""
    if q <= 0:
        raise ValueError("positive rational required")
    val = dict(factorize(q.numerator))
    for p, e in factorize(q.denominator).items():
        val[p] = val.get(p, 0) - e
    return {p: e for p, e in val.items() if e}


class GroupBasis:
    """Basis of positive rationals, pairwise multiplicatively independent."""

    def __init__(self, entries: Iterable[Fraction | int]):
        basis = tuple(Fraction(b) for b in entries)
        for b in basis:
            if b <= 0:
                raise GroupError(f"basis entry {b} is not positive")
            if b == 1:
                raise GroupError("1 is not allowed as a basis entry")
        self.entries = basis
        self._vals = [rational_valuation(b) for b in basis]
        self._primes = sorted({p for v in self._vals for p in v})
        if self._multiplicatively_dependent():
            raise GroupError(f"basis {basis} is multiplicatively dependent")

    def _multiplicatively_dependent(self) -> bool:
        # integer kernel test on the prime-exponent matrix, by fraction-free
        # Gaussian elimination over the rationals
        rows = [[Fraction(v.get(p, 0)) for p in self._primes] for v in self._vals]
        rank = 0
        ncols = len(self._primes)
        for col in range(ncols):
            piv = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
            if piv is None:
                continue
            rows[rank], rows[piv] = rows[piv], rows[rank]
            for r in range(len(rows)):
                if r != rank and rows[r][col]:
                    f = rows[r][col] / rows[rank][col]
                    rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
            rank += 1
        return rank < len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, GroupBasis) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"GroupBasis({', '.join(str(b) for b in self.entries)})"

    def decompose(self, q: Fraction | int) -> Optional[tuple[int, ...]]:
        """Exponent vector of q over the basis, or None if q is not a member."""
        q = Fraction(q)
        if q <= 0:
            return None
        target = rational_valuation(q)
        if any(p not in self._primes for p in target):
            return None
        # solve integer linear system basis-exponents * prime-matrix = target
        cols = {p: i for i, p in enumerate(self._primes)}
        mat = [[Fraction(v.get(p, 0)) for p in self._primes] for v in self._vals]
        rhs = [Fraction(target.get(p, 0)) for p in self._primes]
        sol = _solve_exact(mat, rhs, len(cols))
        if sol is None:
            return None
        if any(s.denominator != 1 for s in sol):
            return None
        vec = tuple(int(s) for s in sol)
        if self.element_value(vec) != q:
            return None
        return vec

    def contains(self, q: Fraction | int) -> bool:
        return self.decompose(q) is not None

    def element_value(self, exponents: tuple[int, ...]) -> Fraction:
        if len(exponents) != len(self.entries):
            raise GroupError("exponent arity mismatch")
        out = Fraction(1)
        for b, e in zip(self.entries, exponents):
            out *= b**e
        return out

    def const(self, q: Fraction | int) -> "GroupConst":
        vec = self.decompose(q)
        if vec is None:
            raise GroupError(f"{q} is not a member of {self!r}")
        return GroupConst(self, vec)

    def elements_in_box(self, box: int) -> list["GroupConst"]:
        """All elements with every exponent in [-box, box]."""
        out: list[GroupConst] = []

        def rec(prefix: tuple[int, ...]):
            if len(prefix) == len(self.entries):
                out.append(GroupConst(self, prefix))
                return
            for e in range(-box, box + 1):
                rec(prefix + (e,))

        rec(())
        return out


def _solve_exact(mat: list[list[Fraction]], rhs: list[Fraction], ncols: int):
    """Solve (rows are equations-transposed) sum_i x_i*mat[i][j] == rhs[j]."""
    nvars = len(mat)
    # build augmented system over equations j
    eqs = [[mat[i][j] for i in range(nvars)] + [rhs[j]] for j in range(ncols)]
    piv_cols: list[int] = []
    r = 0
    for c in range(nvars):
        piv = next((k for k in range(r, len(eqs)) if eqs[k][c]), None)
        if piv is None:
            continue
        eqs[r], eqs[piv] = eqs[piv], eqs[r]
        eqs[r] = [a / eqs[r][c] for a in eqs[r]]
        for k in range(len(eqs)):
            if k != r and eqs[k][c]:
                f = eqs[k][c]
                eqs[k] = [a - f * b for a, b in zip(eqs[k], eqs[r])]
        piv_cols.append(c)
        r += 1
    for k in range(r, len(eqs)):
        if eqs[k][nvars]:
            return None
    sol = [Fraction(0)] * nvars
    for row, c in enumerate(piv_cols):
        sol[c] = eqs[row][nvars]
    return sol


@dataclass(frozen=True)
class GroupConst:
    """A group element as an exponent vector; the zero vector is 1."""

    basis: GroupBasis
    exponents: tuple[int, ...]

    def __post_init__(self):
        if len(self.exponents) != len(self.basis):
            raise GroupError("exponent arity mismatch")

    def value(self) -> Fraction:
        return self.basis.element_value(self.exponents)

    def __mul__(self, other: "GroupConst") -> "GroupConst":
        if other.basis != self.basis:
            raise GroupError("basis mismatch")
        return GroupConst(self.basis, tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def inverse(self) -> "GroupConst":
        return GroupConst(self.basis, tuple(-e for e in self.exponents))

    def __pow__(self, k: int) -> "GroupConst":
        return GroupConst(self.basis, tuple(e * k for e in self.exponents))

    def is_one(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def height(self) -> int:
        return max((abs(e) for e in self.exponents), default=0)

    def __repr__(self):
        return f"GroupConst({self.value()})"
