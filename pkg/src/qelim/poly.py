"""Exact multivariate polynomial arithmetic over the rationals.

Monomials map variable names to positive integer exponents; polynomials map
monomials to nonzero Fraction coefficients.  Everything is kept in canonical
form so that equal values have equal representations, which the formula layer
relies on for syntactic atom equality.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd as _int_gcd
from typing import Iterable, Mapping, Sequence, Union

Rat = Union[int, Fraction]


class Monomial:
    """A product of variable powers; the empty monomial is the constant 1."""

    __slots__ = ("exps", "_hash")

    def __init__(self, exps: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = dict(exps)
        for v, e in list(items.items()):
            if e == 0:
                del items[v]
            elif e < 0:
                raise ValueError(f"negative exponent for {v}")
        self.exps: tuple[tuple[str, int], ...] = tuple(sorted(items.items()))
        self._hash = hash(self.exps)

    @classmethod
    def var(cls, name: str, exp: int = 1) -> "Monomial":
        return cls({name: exp})

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.exps == other.exps

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.exps)

    def is_one(self) -> bool:
        return not self.exps

    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.exps)

    def exponent(self, var: str) -> int:
        for v, e in self.exps:
            if v == var:
                return e
        return 0

    def __mul__(self, other: "Monomial") -> "Monomial":
        d = dict(self.exps)
        for v, e in other.exps:
            d[v] = d.get(v, 0) + e
        return Monomial(d)

    def __pow__(self, k: int) -> "Monomial":
        if k < 0:
            raise ValueError("negative power")
        return Monomial({v: e * k for v, e in self.exps})

    def divides(self, other: "Monomial") -> bool:
        return all(other.exponent(v) >= e for v, e in self.exps)

    def __truediv__(self, other: "Monomial") -> "Monomial":
        d = dict(self.exps)
        for v, e in other.exps:
            n = d.get(v, 0) - e
            if n < 0:
                raise ValueError("monomial division with remainder")
            d[v] = n
        return Monomial(d)

    def sort_key(self):
        # graded lexicographic over the fixed (alphabetical) variable order
        return (self.degree, tuple((v, -e) for v, e in self.exps))

    def __lt__(self, other: "Monomial") -> bool:
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        if not self.exps:
            return "1"
        return "*".join(v if e == 1 else f"{v}^{e}" for v, e in self.exps)


ONE_MONOMIAL = Monomial()


class Polynomial:
    """Canonical sparse polynomial: no zero coefficients, exact Fractions."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Rat] | Iterable[tuple[Monomial, Rat]] = ()):
        clean: dict[Monomial, Fraction] = {}
        for m, c in (terms.items() if isinstance(terms, Mapping) else terms):
            c = Fraction(c)
            if c:
                acc = clean.get(m)
                c = c if acc is None else acc + c
                if c:
                    clean[m] = c
                elif acc is not None:
                    del clean[m]
        self.terms: dict[Monomial, Fraction] = clean
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, c: Rat) -> "Polynomial":
        return cls({ONE_MONOMIAL: Fraction(c)})

    @classmethod
    def var(cls, name: str, exp: int = 1) -> "Polynomial":
        return cls({Monomial.var(name, exp): Fraction(1)})

    @classmethod
    def from_monomial(cls, m: Monomial, c: Rat = 1) -> "Polynomial":
        return cls({m: Fraction(c)})

    # -- basic queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m.is_one() for m in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant polynomial")
        return self.terms.get(ONE_MONOMIAL, Fraction(0))

    def is_term(self) -> bool:
        """Single monomial with coefficient (or zero)."""
        return len(self.terms) <= 1

    def single_term(self) -> tuple[Fraction, Monomial]:
        if len(self.terms) != 1:
            raise ValueError("not a single-term polynomial")
        ((m, c),) = self.terms.items()
        return c, m

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for m in self.terms:
            out.update(m.variables())
        return frozenset(out)

    def total_degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def degree_in(self, var: str) -> int:
        return max((m.exponent(var) for m in self.terms), default=0)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: t[0].sort_key())

    def leading_monomial(self) -> Monomial:
        if not self.terms:
            raise ValueError("zero polynomial")
        return self.sorted_terms()[-1][0]

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        d = dict(self.terms)
        for m, c in other.terms.items():
            n = d.get(m, Fraction(0)) + c
            if n:
                d[m] = n
            elif m in d:
                del d[m]
        p = Polynomial.__new__(Polynomial)
        p.terms = d
        p._hash = None
        return p

    def __neg__(self) -> "Polynomial":
        p = Polynomial.__new__(Polynomial)
        p.terms = {m: -c for m, c in self.terms.items()}
        p._hash = None
        return p

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        d: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                n = d.get(m, Fraction(0)) + c1 * c2
                if n:
                    d[m] = n
                elif m in d:
                    del d[m]
        p = Polynomial.__new__(Polynomial)
        p.terms = d
        p._hash = None
        return p

    def scale(self, c: Rat) -> "Polynomial":
        c = Fraction(c)
        if not c:
            return Polynomial()
        p = Polynomial.__new__(Polynomial)
        p.terms = {m: k * c for m, k in self.terms.items()}
        p._hash = None
        return p

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(sorted(((m, c) for m, c in self.terms.items()),
                                           key=lambda t: t[0].sort_key())))
        return self._hash

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in reversed(self.sorted_terms()):
            if m.is_one():
                parts.append(str(c))
            elif c == 1:
                parts.append(repr(m))
            elif c == -1:
                parts.append(f"-{m!r}")
            else:
                parts.append(f"{c}*{m!r}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- substitution / evaluation -------------------------------------------

    def subst(self, mapping: Mapping[str, "Polynomial"]) -> "Polynomial":
        out = Polynomial()
        for m, c in self.terms.items():
            term = Polynomial.const(c)
            for v, e in m.exps:
                repl = mapping.get(v)
                term = term * (repl**e if repl is not None else Polynomial.var(v, e))
            out = out + term
        return out

    def evaluate(self, assignment: Mapping[str, Rat]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            val = Fraction(c)
            for v, e in m.exps:
                if v not in assignment:
                    raise KeyError(f"unassigned variable {v}")
                val *= Fraction(assignment[v]) ** e
            total += val
        return total

    def rename(self, mapping: Mapping[str, str]) -> "Polynomial":
        d: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            nm = Monomial({mapping.get(v, v): e for v, e in m.exps})
            d[nm] = d.get(nm, Fraction(0)) + c
        return Polynomial(d)

    # -- normalization --------------------------------------------------------

    def content(self) -> Fraction:
        """Positive rational content (gcd of numerators / lcm of denominators)."""
        if not self.terms:
            return Fraction(0)
        num = 0
        den = 1
        for c in self.terms.values():
            num = _int_gcd(num, abs(c.numerator))
            den = den * c.denominator // _int_gcd(den, c.denominator)
        return Fraction(num, den)

    def primitive(self) -> "Polynomial":
        """Scale to integer coefficients with content 1 and positive leading sign."""
        if not self.terms:
            return self
        c = self.content()
        p = self.scale(1 / c)
        if p.terms[p.leading_monomial()] < 0:
            p = -p
        return p

    def sign_normalized(self) -> tuple["Polynomial", int]:
        """primitive() together with the sign that was factored out."""
        if not self.terms:
            return self, 1
        c = self.content()
        p = self.scale(1 / c)
        if p.terms[p.leading_monomial()] < 0:
            return -p, -1
        return p, 1


ZERO = Polynomial()
ONE = Polynomial.const(1)


def poly_sum(ps: Iterable[Polynomial]) -> Polynomial:
    return reduce(lambda a, b: a + b, ps, Polynomial())


def poly_prod(ps: Iterable[Polynomial]) -> Polynomial:
    return reduce(lambda a, b: a * b, ps, Polynomial.const(1))


# ---------------------------------------------------------------------------
# Univariate views
# ---------------------------------------------------------------------------


class UnivariateView:
    """A polynomial read as sum(coeffs[i] * pivot**i) with polynomial coeffs."""

    __slots__ = ("pivot", "coeffs")

    def __init__(self, pivot: str, coeffs: Sequence[Polynomial]):
        cs = list(coeffs)
        while cs and cs[-1].is_zero():
            cs.pop()
        self.pivot = pivot
        self.coeffs: tuple[Polynomial, ...] = tuple(cs)

    @property
    def degree(self) -> int:
        """Degree in the pivot; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, i: int) -> Polynomial:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else ZERO

    def leading(self) -> Polynomial:
        if not self.coeffs:
            raise ValueError("zero polynomial")
        return self.coeffs[-1]

    def to_polynomial(self) -> Polynomial:
        z = Polynomial.var(self.pivot)
        out = Polynomial()
        for i, c in enumerate(self.coeffs):
            out = out + c * z**i
        return out

    def truncated(self) -> "UnivariateView":
        """Drop the leading coefficient."""
        return UnivariateView(self.pivot, self.coeffs[:-1])

    def derivative(self) -> "UnivariateView":
        return UnivariateView(self.pivot, [self.coeff(i).scale(i) for i in range(1, len(self.coeffs))])

    def scale(self, p: Polynomial) -> "UnivariateView":
        return UnivariateView(self.pivot, [c * p for c in self.coeffs])

    def __add__(self, other: "UnivariateView") -> "UnivariateView":
        n = max(len(self.coeffs), len(other.coeffs))
        return UnivariateView(self.pivot, [self.coeff(i) + other.coeff(i) for i in range(n)])

    def __sub__(self, other: "UnivariateView") -> "UnivariateView":
        n = max(len(self.coeffs), len(other.coeffs))
        return UnivariateView(self.pivot, [self.coeff(i) - other.coeff(i) for i in range(n)])

    def __mul__(self, other: "UnivariateView") -> "UnivariateView":
        out = [ZERO] * (len(self.coeffs) + len(other.coeffs))
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return UnivariateView(self.pivot, out)

    def shift(self, k: int) -> "UnivariateView":
        """Multiply by pivot**k."""
        return UnivariateView(self.pivot, [ZERO] * k + list(self.coeffs))

    def __repr__(self):
        return f"UnivariateView({self.pivot}, {list(self.coeffs)!r})"


def as_univariate(p: Polynomial, z: str) -> UnivariateView:
    buckets: dict[int, dict[Monomial, Fraction]] = {}
    for m, c in p.terms.items():
        e = m.exponent(z)
        rest = Monomial({v: k for v, k in m.exps if v != z})
        buckets.setdefault(e, {})[rest] = buckets.setdefault(e, {}).get(rest, Fraction(0)) + c
    deg = max(buckets, default=-1)
    coeffs = [Polynomial(buckets.get(i, {})) for i in range(deg + 1)]
    return UnivariateView(z, coeffs)


def pseudo_div(p: UnivariateView, q: UnivariateView) -> tuple[UnivariateView, UnivariateView, int]:
    """Pseudo-division: lc(q)**k * p == quot*q + rem with deg(rem) < deg(q)."""
    if q.is_zero():
        raise ZeroDivisionError("pseudo-division by the zero polynomial")
    if p.pivot != q.pivot:
        raise ValueError("pivot mismatch")
    lc = q.leading()
    dq = q.degree
    quot = UnivariateView(p.pivot, [])
    rem = p
    k = 0
    while not rem.is_zero() and rem.degree >= dq:
        shift = rem.degree - dq
        lead = rem.leading()
        quot = quot.scale(lc) + UnivariateView(p.pivot, [ZERO] * shift + [lead])
        rem = rem.scale(lc) - q.scale(lead).shift(shift)
        k += 1
    return quot, rem, k


def pseudo_rem(p: UnivariateView, q: UnivariateView) -> UnivariateView:
    return pseudo_div(p, q)[1]


def _prem_strict(p: UnivariateView, q: UnivariateView) -> UnivariateView:
    """Pseudo-remainder with multiplier exactly lc(q)**(deg p - deg q + 1)."""
    d = p.degree - q.degree + 1
    _, rem, k = pseudo_div(p, q)
    if k < d:
        rem = rem.scale(q.leading() ** (d - k))
    return rem


def resultant(p: UnivariateView, q: UnivariateView) -> Polynomial:
    """Resultant via the subresultant pseudo-remainder sequence."""
    if p.pivot != q.pivot:
        raise ValueError("pivot mismatch")
    if p.is_zero() or q.is_zero():
        return ZERO
    sign = 1
    a, b = p, q
    if a.degree < b.degree:
        if (a.degree % 2) and (b.degree % 2):
            sign = -sign
        a, b = b, a
    if b.degree == 0:
        return (b.leading() ** a.degree).scale(sign)
    g = ONE
    h = ONE
    while True:
        d = a.degree - b.degree
        if (a.degree % 2) and (b.degree % 2):
            sign = -sign
        r = _prem_strict(a, b)
        if r.is_zero():
            return ZERO
        divisor = g * h**d
        a, b = b, UnivariateView(r.pivot, [_exact_div(c, divisor) for c in r.coeffs])
        g = a.leading()
        if d == 1:
            h = g
        elif d > 1:
            h = _exact_div(g**d, h ** (d - 1))
        if b.degree == 0:
            da = a.degree
            num = b.leading() ** da
            out = num if da <= 1 else _exact_div(num, h ** (da - 1))
            return out.scale(sign)


def _exact_div(p: Polynomial, q: Polynomial) -> Polynomial:
    """Exact multivariate division; raises if not exact."""
    res, rem = _poly_divmod(p, q)
    if not rem.is_zero():
        raise ArithmeticError("inexact polynomial division")
    return res


def _poly_divmod(p: Polynomial, q: Polynomial) -> tuple[Polynomial, Polynomial]:
    if q.is_zero():
        raise ZeroDivisionError
    quot = Polynomial()
    rem = p
    qlm = q.leading_monomial()
    qlc = q.terms[qlm]
    while not rem.is_zero():
        rlm = rem.leading_monomial()
        if not qlm.divides(rlm):
            break
        t = Polynomial.from_monomial(rlm / qlm, rem.terms[rlm] / qlc)
        quot = quot + t
        rem = rem - t * q
    return quot, rem


# ---------------------------------------------------------------------------
# GCDs
# ---------------------------------------------------------------------------


def gcd_univariate(p: UnivariateView, q: UnivariateView) -> UnivariateView:
    """Monic gcd of univariate polynomials with rational-constant coefficients."""
    a, b = p, q
    while not b.is_zero():
        _, r, _ = pseudo_div(a, b)
        a, b = b, r
    if a.is_zero():
        return a
    lc = a.leading().constant_value()
    return a.scale(Polynomial.const(1 / lc))


def poly_gcd(p: Polynomial, q: Polynomial) -> Polynomial:
    """Multivariate gcd by the primitive pseudo-remainder sequence."""
    if p.is_zero():
        return q.primitive() if not q.is_zero() else ZERO
    if q.is_zero():
        return p.primitive()
    vs = sorted(p.variables() | q.variables())
    if not vs:
        return ONE
    return _gcd_rec(p, q, vs).primitive()


def _gcd_rec(p: Polynomial, q: Polynomial, vs: list[str]) -> Polynomial:
    if p.is_zero():
        return q
    if q.is_zero():
        return p
    if not vs:
        return ONE
    x, rest = vs[0], vs[1:]
    pu, qu = as_univariate(p, x), as_univariate(q, x)
    if pu.degree <= 0 and qu.degree <= 0:
        return _gcd_rec(pu.coeff(0), qu.coeff(0), rest) if rest else ONE
    pc = _content_in(pu, rest)
    qc = _content_in(qu, rest)
    pp = UnivariateView(x, [_exact_div(c, pc) for c in pu.coeffs])
    qp = UnivariateView(x, [_exact_div(c, qc) for c in qu.coeffs])
    if pp.degree < qp.degree:
        pp, qp = qp, pp
    while not qp.is_zero() and qp.degree >= 0:
        if qp.degree == 0:
            pp = qp
            qp = UnivariateView(x, [])
            break
        r = pseudo_rem(pp, qp)
        rc = _content_in(r, rest)
        r = UnivariateView(x, [_exact_div(c, rc) for c in r.coeffs]) if not r.is_zero() else r
        pp, qp = qp, r
    cont = _gcd_rec(pc, qc, rest)
    if pp.degree == 0:
        return cont
    return pp.to_polynomial() * cont


def _content_in(p: UnivariateView, rest: list[str]) -> Polynomial:
    cont = ZERO
    for c in p.coeffs:
        if c.is_zero():
            continue
        cont = _gcd_rec(cont, c, rest) if not cont.is_zero() else c
    if cont.is_zero():
        return ONE
    return cont.primitive() if cont.variables() else Polynomial.const(cont.content())


class RatFunc:
    """Quotient of polynomials, gcd-reduced, denominator sign-normalized."""

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial = ONE, reduce_: bool = True):
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            num, den = ZERO, ONE
        elif reduce_:
            g = poly_gcd(num, den)
            if not g.is_zero() and g != ONE:
                num = _exact_div(num, g)
                den = _exact_div(den, g)
            dprim, s = den.sign_normalized()
            c = den.content()
            num = num.scale(Fraction(s) / c)
            den = dprim
        self.num = num
        self.den = den

    @classmethod
    def const(cls, c: Rat) -> "RatFunc":
        return cls(Polynomial.const(c), ONE, reduce_=False)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __add__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self) -> "RatFunc":
        r = RatFunc.__new__(RatFunc)
        r.num = -self.num
        r.den = self.den
        return r

    def __sub__(self, other: "RatFunc") -> "RatFunc":
        return self + (-other)

    def __mul__(self, other: "RatFunc") -> "RatFunc":
        return RatFunc(self.num * other.num, self.den * other.den)

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other: "RatFunc") -> "RatFunc":
        return self * other.inverse()

    def __eq__(self, other):
        return isinstance(other, RatFunc) and self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"({self.num!r})/({self.den!r})" if self.den != ONE else repr(self.num)
