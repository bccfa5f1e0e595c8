"""Slow, independent evaluators used for differential and falsification
testing of every other module.

The univariate real-arithmetic decisions here use Sturm sequences over plain
coefficient lists, deliberately sharing nothing with the sign-matrix
elimination back-end.  Truncated evaluation over a concrete structure
(exact rationals, a finitely generated subgroup, a bounded search box) is
three-valued: True and False are definite, None means the box was too small
or the shape is unsupported.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .formula import (
    And, AtomF, Bot, Eq, Exists, ExistsU, Forall, ForallU, Formula, InputError,
    Lt, Not, Or, Quant, SigmaAtom, UAtom, conj, free_vars,
)
from .group import GroupBasis
from .poly import Polynomial
from .transform import eval_boolean

# ---------------------------------------------------------------------------
# Univariate polynomials as little-endian Fraction lists
# ---------------------------------------------------------------------------

UPoly = list  # list[Fraction]


def utrim(p: UPoly) -> UPoly:
    while p and p[-1] == 0:
        p.pop()
    return p


def udeg(p: UPoly) -> int:
    return len(p) - 1


def ueval(p: UPoly, x: Fraction) -> Fraction:
    out = Fraction(0)
    for c in reversed(p):
        out = out * x + c
    return out


def uderiv(p: UPoly) -> UPoly:
    return utrim([c * i for i, c in enumerate(p)][1:])


def umul(a: UPoly, b: UPoly) -> UPoly:
    out = [Fraction(0)] * (len(a) + len(b) + 1)
    for i, c in enumerate(a):
        if c:
            for j, d in enumerate(b):
                out[i + j] += c * d
    return utrim(out)


def urem(a: UPoly, b: UPoly) -> UPoly:
    a = list(a)
    lb = b[-1]
    db = udeg(b)
    while utrim(a) and udeg(a) >= db:
        k = a[-1] / lb
        shift = udeg(a) - db
        for i, c in enumerate(b):
            a[i + shift] -= k * c
        utrim(a)
    return a


def udiv_exact(a: UPoly, b: UPoly) -> UPoly:
    out: UPoly = [Fraction(0)] * max(udeg(a) - udeg(b) + 1, 1)
    rem = list(a)
    while utrim(rem) and udeg(rem) >= udeg(b):
        k = rem[-1] / b[-1]
        shift = udeg(rem) - udeg(b)
        out[shift] += k
        for i, c in enumerate(b):
            rem[i + shift] -= k * c
        utrim(rem)
    if utrim(rem):
        raise ArithmeticError("inexact univariate division")
    return utrim(out)


def ugcd(a: UPoly, b: UPoly) -> UPoly:
    a, b = utrim(list(a)), utrim(list(b))
    while b:
        a, b = b, utrim(urem(a, b))
    if a:
        lc = a[-1]
        a = [c / lc for c in a]
    return a


def usquarefree(p: UPoly) -> UPoly:
    g = ugcd(p, uderiv(p))
    if udeg(g) < 1:
        return utrim(list(p))
    return udiv_exact(p, g)


def sturm_chain(p: UPoly) -> list[UPoly]:
    chain = [utrim(list(p)), uderiv(p)]
    while chain[-1]:
        nxt = utrim([-c for c in urem(chain[-2], chain[-1])])
        if not nxt:
            break
        chain.append(nxt)
    return [c for c in chain if c]


def sign_changes(chain: Sequence[UPoly], x: Fraction) -> int:
    signs = []
    for p in chain:
        v = ueval(p, x)
        if v:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count(p: UPoly, a: Fraction, b: Fraction) -> int:
    """Distinct real roots in (a, b]; requires p(a) != 0."""
    p = utrim(list(p))
    if not p or udeg(p) == 0:
        return 0
    chain = sturm_chain(p)
    return sign_changes(chain, a) - sign_changes(chain, b)


def cauchy_bound(p: UPoly) -> Fraction:
    lc = abs(p[-1])
    return Fraction(1) + max((abs(c) / lc for c in p[:-1]), default=Fraction(0))


def isolate_roots(p: UPoly) -> list[tuple[Fraction, Fraction]]:
    """Disjoint isolating intervals for the distinct real roots, sorted.
    Exact rational roots come back as degenerate pairs (r, r); proper
    intervals have non-root endpoints."""
    p = utrim(list(p))
    if not p or udeg(p) == 0:
        return []
    sf = usquarefree(p)
    if udeg(sf) == 0:
        return []
    M = cauchy_bound(sf)
    lo, hi = -M - 1, M + 1
    out: list[tuple[Fraction, Fraction]] = []

    def go(a: Fraction, b: Fraction, n: int):
        if n == 0:
            return
        if n == 1:
            out.append((a, b))
            return
        mid = (a + b) / 2
        if ueval(sf, mid) == 0:
            out.append((mid, mid))
            delta = (b - a) / 4
            while (ueval(sf, mid - delta) == 0 or ueval(sf, mid + delta) == 0
                   or sturm_count(sf, mid - delta, mid + delta) != 1):
                delta /= 2
            go(a, mid - delta, sturm_count(sf, a, mid - delta))
            go(mid + delta, b, sturm_count(sf, mid + delta, b))
        else:
            go(a, mid, sturm_count(sf, a, mid))
            go(mid, b, sturm_count(sf, mid, b))

    go(lo, hi, sturm_count(sf, lo, hi))
    return sorted(out)


def refine(p: UPoly, iv: tuple[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
    """Halve an isolating interval of p once, keeping the root inside."""
    a, b = iv
    if a == b:
        return iv
    mid = (a + b) / 2
    if ueval(p, mid) == 0:
        return (mid, mid)
    if sturm_count(p, a, mid) == 1:
        return (a, mid)
    return (mid, b)


# ---------------------------------------------------------------------------
# Deciding univariate matrices over the reals
# ---------------------------------------------------------------------------


def _atom_upoly(p: Polynomial, x: str, assignment: Mapping[str, Fraction]) -> UPoly:
    coeffs: dict[int, Fraction] = {}
    for m, c in p.terms.items():
        val = Fraction(c)
        for v, e in m.exps:
            if v == x:
                continue
            if v not in assignment:
                raise InputError(f"unassigned variable {v}")
            val *= Fraction(assignment[v]) ** e
        d = m.exponent(x)
        coeffs[d] = coeffs.get(d, Fraction(0)) + val
    out = [Fraction(0)] * (max(coeffs, default=0) + 1)
    for d, c in coeffs.items():
        out[d] = c
    return utrim(out)


def _matrix_polys(f: Formula, x: str, assignment: Mapping[str, Fraction]) -> Optional[dict]:
    out: dict[int, UPoly] = {}

    def walk(g: Formula) -> bool:
        if isinstance(g, Bot):
            return True
        if isinstance(g, AtomF):
            if isinstance(g.atom, (Eq, Lt)):
                out[id(g.atom)] = _atom_upoly(g.atom.poly, x, assignment)
                return True
            return False
        if isinstance(g, Not):
            return walk(g.arg)
        if isinstance(g, (And, Or)):
            return all(walk(a) for a in g.args)
        return False

    return out if walk(f) else None


def decide_real_exists(matrix: Formula, x: str,
                       assignment: Mapping[str, Fraction]) -> Optional[bool]:
    """Decide `exists x in R: matrix` for quantifier-free ordered-field
    matrices by cell sampling; None if the matrix is unsupported."""
    polys = _matrix_polys(matrix, x, assignment)
    if polys is None:
        return None

    nonconst = [p for p in polys.values() if udeg(p) >= 1]
    sample_rats: list[Fraction] = []
    root_samples: list[tuple[Fraction, Fraction]] = []
    if not nonconst:
        sample_rats.append(Fraction(0))
    else:
        prod: UPoly = [Fraction(1)]
        for p in nonconst:
            prod = umul(prod, usquarefree(p))
        prod = usquarefree(prod)
        ivs = isolate_roots(prod)
        refined = []
        for iv in ivs:
            while iv[0] != iv[1] and any(
                    ueval(q, iv[0]) == 0 or ueval(q, iv[1]) == 0 for q in nonconst):
                iv = refine(prod, iv)
            refined.append(iv)
        root_samples = refined
        M = cauchy_bound(prod)
        lo, hi = -M - 1, M + 1
        sep = lo
        for i, (a, b) in enumerate(refined):
            sample_rats.append(sep)
            nxt_a = refined[i + 1][0] if i + 1 < len(refined) else hi
            sep = b if a != b else (b + nxt_a) / 2
            if a != b and sep == nxt_a:
                sep = (b + nxt_a) / 2 if b != nxt_a else b
        sample_rats.append(sep)
        sample_rats.append(hi)

    def val_at_rat(xv: Fraction):
        def val(g: Formula) -> bool:
            atom = g.atom  # type: ignore[attr-defined]
            if id(atom) not in polys:
                raise InputError("unsupported literal")
            v = ueval(polys[id(atom)], xv)
            return (v == 0) if isinstance(atom, Eq) else (v > 0)
        return val

    def val_at_root(iv: tuple[Fraction, Fraction]):
        a, b = iv

        def val(g: Formula) -> bool:
            atom = g.atom  # type: ignore[attr-defined]
            q = polys[id(atom)]
            if a == b:
                v = ueval(q, a)
            elif udeg(q) >= 1 and sturm_count(q, a, b) >= 1:
                v = Fraction(0)
            else:
                v = ueval(q, a)
            return (v == 0) if isinstance(atom, Eq) else (v > 0)
        return val

    for xv in sample_rats:
        if eval_boolean(matrix, val_at_rat(xv)):
            return True
    for iv in root_samples:
        if eval_boolean(matrix, val_at_root(iv)):
            return True
    return False


def sturm_decide(sentence: Formula, assignment: Optional[Mapping[str, Fraction]] = None) -> bool:
    """Decide a sentence whose quantified matrices are univariate
    ordered-field formulas after instantiating parameters.  Rejects
    anything outside that fragment."""
    env = dict(assignment or {})

    def ev(f: Formula) -> bool:
        if isinstance(f, Bot):
            return False
        if isinstance(f, AtomF):
            if not isinstance(f.atom, (Eq, Lt)):
                raise InputError("subgroup atoms are outside the Sturm fragment")
            v = f.atom.poly.evaluate(env)
            return (v == 0) if isinstance(f.atom, Eq) else (v > 0)
        if isinstance(f, Not):
            return not ev(f.arg)
        if isinstance(f, And):
            return all(ev(a) for a in f.args)
        if isinstance(f, Or):
            return any(ev(a) for a in f.args)
        if isinstance(f, (Exists, Forall)):
            matrix = f.body if isinstance(f, Exists) else Not(f.body)
            res = decide_real_exists(matrix, f.var, env)
            if res is None:
                raise InputError("matrix is not univariate ordered-field")
            return res if isinstance(f, Exists) else not res
        raise InputError("bounded quantifiers are outside the Sturm fragment")

    return ev(sentence)


# ---------------------------------------------------------------------------
# Truncated evaluation over (R, U) with U a concrete rational group
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedStructure:
    """Exact desk-scale stand-in for the intended models: carrier R with
    exact rational points, U a finitely generated rational group whose
    bounded quantifiers are searched within an exponent box."""

    basis: GroupBasis
    box: int = 6

    def group_elements(self) -> list[Fraction]:
        return sorted({g.value() for g in self.basis.elements_in_box(self.box)})

    def in_group(self, q: Fraction) -> bool:
        return q > 0 and self.basis.contains(q)

    def with_box(self, box: int) -> "TruncatedStructure":
        return TruncatedStructure(self.basis, box)


def eval_truncated(f: Formula, assignment: Mapping[str, Fraction],
                   structure: TruncatedStructure) -> Optional[bool]:
    """Three-valued truth over the structure.  Definite verdicts never flip
    when the box grows; unsupported shapes yield None, never a wrong
    answer."""
    return _evt(f, dict(assignment), structure)


def _evt(f: Formula, env: dict, st: TruncatedStructure) -> Optional[bool]:
    if isinstance(f, Bot):
        return False
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return a.poly.evaluate(env) == 0
        if isinstance(a, Lt):
            return a.poly.evaluate(env) > 0
        if isinstance(a, UAtom):
            return st.in_group(a.term.evaluate(env))
        if isinstance(a, SigmaAtom):
            vals = [t.evaluate(env) for t in a.args]
            if not all(st.in_group(v) for v in vals):
                return False
            return sum(Fraction(k) * v for k, v in zip(a.coeffs, vals)) == 0
        raise InputError(f"unknown atom {a!r}")
    if isinstance(f, Not):
        v = _evt(f.arg, env, st)
        return None if v is None else (not v)
    if isinstance(f, (And, Or)):
        want_all = isinstance(f, And)
        out: Optional[bool] = want_all
        for g in f.args:
            v = _evt(g, env, st)
            if v is (not want_all):
                return not want_all
            if v is None:
                out = None
        return out
    if isinstance(f, (ExistsU, ForallU)):
        want = isinstance(f, ExistsU)
        for gval in st.group_elements():
            env2 = dict(env)
            env2[f.var] = gval
            v = _evt(f.body, env2, st)
            if v == want:
                return want
        # box exhausted; a decision over all positive reals is still sound
        dec = _decide_positive_exists(f.body if want else Not(f.body), f.var, env, st)
        if dec is False and want:
            return False
        if dec is False and not want:
            return True
        return None
    if isinstance(f, (Exists, Forall)):
        want = isinstance(f, Exists)
        matrix = f.body if want else Not(f.body)
        folded = _prefold(matrix, env, st)
        if folded is None:
            return None
        res = decide_real_exists(folded, f.var, env)
        if res is None:
            return None
        return res if want else (not res)
    raise InputError(f"unknown node {f!r}")


def _decide_positive_exists(body: Formula, var: str, env: Mapping[str, Fraction],
                            st: TruncatedStructure) -> Optional[bool]:
    """exists x in R (0 < x and body), or None if unsupported."""
    folded = _prefold(body, env, st)
    if folded is None:
        return None
    pos = AtomF(Lt(Polynomial.var(var)))
    return decide_real_exists(conj([pos, folded]), var, env)


def _prefold(f: Formula, env: Mapping[str, Fraction], st: TruncatedStructure) -> Optional[Formula]:
    """Fold subgroup atoms and nested quantifiers to constants when decidable
    without the pivot variable; None when stuck."""
    from .formula import BOT, TOP

    def fold(g: Formula) -> Optional[Formula]:
        if isinstance(g, Bot):
            return g
        if isinstance(g, AtomF) and isinstance(g.atom, (Eq, Lt)):
            return g
        if isinstance(g, Not):
            inner = fold(g.arg)
            return None if inner is None else Not(inner)
        if isinstance(g, (And, Or)):
            parts = [fold(a) for a in g.args]
            if any(p is None for p in parts):
                return None
            return And(parts) if isinstance(g, And) else Or(parts)  # type: ignore[arg-type]
        # subgroup atom or quantifier: decidable only when closed under env
        if free_vars(g) <= set(env):
            v = _evt(g, dict(env), st)
            if v is None:
                return None
            return TOP if v else BOT
        return None

    return fold(f)


# ---------------------------------------------------------------------------
# Brute-force search for solutions of linear equations in the group
# ---------------------------------------------------------------------------


def brute_mann(coeffs: Sequence, rhs, basis: GroupBasis, box: int = 12) -> set:
    """All non-degenerate solutions of sum_i coeffs[i]*x_i == rhs with every
    x_i a group element whose exponent vector lies in [-box, box].
    Degeneracy: some non-empty sub-sum of coeffs[i]*x_i vanishes."""
    coeffs = [Fraction(c) for c in coeffs]
    rhs = Fraction(rhs)
    n = len(coeffs)
    if n == 0 or any(c == 0 for c in coeffs):
        raise InputError("group equation needs nonzero coefficients")
    values = sorted({g.value() for g in basis.elements_in_box(box)})
    out: set[tuple] = set()

    def rec(i: int, acc: list):
        if i == n:
            if sum(c * v for c, v in zip(coeffs, acc)) == rhs and not _degenerate(coeffs, acc):
                out.add(tuple(acc))
            return
        for v in values:
            acc.append(v)
            rec(i + 1, acc)
            acc.pop()

    rec(0, [])
    return out


def _degenerate(coeffs: Sequence[Fraction], sol: Sequence[Fraction]) -> bool:
    n = len(coeffs)
    for mask in range(1, 1 << n):
        if sum(coeffs[i] * sol[i] for i in range(n) if mask >> i & 1) == 0:
            return True
    return False
