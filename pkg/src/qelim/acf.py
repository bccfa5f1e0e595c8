"""Quantifier elimination for algebraically closed fields of characteristic
zero, by degree case analysis and pseudo-remainder reduction.

Works innermost-quantifier-first on formulas whose atoms are polynomial
equations; each existential over a conjunction of literals is resolved by
case-splitting on leading coefficients, reducing sibling equations modulo a
pivot, and discharging inequations through the divisibility test
p | q**deg(p) (all roots of p are roots of q iff the pseudo-remainder of
q**deg(p) by p vanishes identically).
"""

from __future__ import annotations

from typing import Optional

from .classify import TheoryMode, is_l_formula
from .formula import (
    And, AtomF, BOT, Bot, Eq, Exists, Forall, Formula, InputError, Not, Or,
    Quant, TOP, conj, disj, eq0, free_vars, neq0,
)
from .poly import Polynomial, UnivariateView, as_univariate, poly_prod, pseudo_rem
from .transform import dnf, nnf, simplify


_CACHE: dict = {}


def _alpha_canon(f: Formula) -> tuple[Formula, dict]:
    """Rename free variables positionally and bound variables in traversal
    order, so formulas equal up to naming share a cache entry.  Returns the
    canonical formula and the map back to the original free names."""
    from .formula import free_vars
    fv = sorted(free_vars(f))
    env0 = {v: f"v%{i}" for i, v in enumerate(fv)}
    back = {f"v%{i}": v for i, v in enumerate(fv)}
    counter = [0]

    def go(g: Formula, env: dict) -> Formula:
        if isinstance(g, Bot):
            return g
        if isinstance(g, AtomF):
            atom = g.atom
            if isinstance(atom, Eq):
                return AtomF(Eq(atom.poly.rename(env)))
            raise InputError(f"atom outside the ring language: {atom!r}")
        if isinstance(g, Not):
            return Not(go(g.arg, env))
        if isinstance(g, And):
            return And(tuple(go(a, env) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(go(a, env) for a in g.args))
        if isinstance(g, Quant):
            fresh = f"b%{counter[0]}"
            counter[0] += 1
            env2 = dict(env)
            env2[g.var] = fresh
            return type(g)(fresh, go(g.body, env2))
        raise InputError(f"unknown node {g!r}")

    return go(f, env0), back


def acf_eliminate(f: Formula, simplify_output: bool = True) -> Formula:
    """Equivalent quantifier-free formula over algebraically closed fields.

    Results are cached up to renaming, which makes the heavily repetitive
    root-counting eliminations cheap."""
    if not is_l_formula(f, TheoryMode.ACF):
        raise InputError("input is not in the pure ring language")
    from .formula import rename_vars
    canon, back = _alpha_canon(f)
    key = (canon, simplify_output)
    hit = _CACHE.get(key)
    if hit is None:
        hit = _elim(canon)
        if simplify_output:
            hit = simplify(hit)
        if len(_CACHE) > 50_000:
            _CACHE.clear()
        _CACHE[key] = hit
    return rename_vars(hit, back) if back else hit


def _elim(f: Formula) -> Formula:
    if isinstance(f, (Bot, AtomF)):
        return f
    if isinstance(f, Not):
        return Not(_elim(f.arg))
    if isinstance(f, And):
        return conj(_elim(a) for a in f.args)
    if isinstance(f, Or):
        return disj(_elim(a) for a in f.args)
    if isinstance(f, Exists):
        return _elim_exists(f.var, _elim(f.body))
    if isinstance(f, Forall):
        return Not(_elim_exists(f.var, nnf(Not(_elim(f.body)))))
    raise InputError(f"unsupported node in ring language: {f!r}")


def _elim_exists(x: str, qf: Formula) -> Formula:
    if x not in free_vars(qf):
        return simplify(qf)
    matrix = dnf(simplify(qf))
    out = []
    for clause in (matrix.args if isinstance(matrix, Or) else (matrix,)):
        lits = clause.args if isinstance(clause, And) else (clause,)
        eqs: list[Polynomial] = []
        neqs: list[Polynomial] = []
        passthrough: list[Formula] = []
        for lit in lits:
            pos, atom = _literal(lit)
            if atom is None:
                passthrough.append(lit)
            elif x not in atom.poly.variables():
                passthrough.append(lit)
            elif pos:
                eqs.append(atom.poly)
            else:
                neqs.append(atom.poly)
        core = _exists_clause(x, eqs, neqs)
        out.append(simplify(conj(passthrough + [core])))
    return simplify(disj(out))


def _literal(lit: Formula) -> tuple[bool, Optional[Eq]]:
    if isinstance(lit, AtomF) and isinstance(lit.atom, Eq):
        return True, lit.atom
    if isinstance(lit, Not) and isinstance(lit.arg, AtomF) and isinstance(lit.arg.atom, Eq):
        return False, lit.arg.atom
    return True, None


def _exists_clause(x: str, eqs: list[Polynomial], neqs: list[Polynomial]) -> Formula:
    return _rec(x, [as_univariate(p, x) for p in eqs], [as_univariate(q, x) for q in neqs])


def _rec(x: str, eqs: list[UnivariateView], neqs: list[UnivariateView]) -> Formula:
    """exists x: all eqs vanish and no neq vanishes; views may degenerate."""
    side: list[Formula] = []
    es: list[UnivariateView] = []
    for v in eqs:
        if v.is_zero():
            continue
        if v.degree == 0:
            side.append(eq0(v.coeff(0)))
        else:
            es.append(v)
    ns: list[UnivariateView] = []
    for v in neqs:
        if v.is_zero():
            return BOT
        if v.degree == 0:
            side.append(neq0(v.coeff(0)))
        else:
            ns.append(v)
    if not es:
        if not ns:
            core: Formula = TOP
        else:
            q = ns[0]
            for other in ns[1:]:
                q = q * other
            # an infinite field avoids finitely many roots iff the product
            # is not identically zero
            core = disj(neq0(c) for c in q.coeffs)
    else:
        p = min(es, key=lambda v: v.degree)
        rest = list(es)
        rest.remove(p)
        a = p.leading()
        low = p.truncated()
        branch0 = conj([eq0(a), _rec(x, [low] + rest, ns)])
        branch1 = conj([neq0(a), _pivot(x, p, rest, ns)])
        core = disj([branch0, branch1])
    return simplify(conj(side + [core]))


def _pivot(x: str, p: UnivariateView, rest: list[UnivariateView],
           neqs: list[UnivariateView]) -> Formula:
    """Case lc(p) != 0, deg p >= 1."""
    if rest:
        q = rest[0]
        r = pseudo_rem(q, p)
        return _rec(x, [p, r] + rest[1:], neqs)
    if not neqs:
        return TOP
    q = neqs[0]
    for other in neqs[1:]:
        q = q * other
    d = p.degree
    qd = q
    for _ in range(d - 1):
        qd = qd * q
    r = pseudo_rem(qd, p)
    if r.is_zero():
        return BOT
    return disj(neq0(c) for c in r.coeffs)
