"""Elimination pipeline for algebraically closed fields with a small
multiplicative subgroup: every formula in the ring+subgroup language is
rewritten to a case-split family whose guards mention only field-side
variables and whose bodies mention only subgroup-side variables, and from
there to a Boolean combination of the target existential shape.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace as _case_replace
from typing import Iterable, Optional, Sequence

from .acf import acf_eliminate
from .classify import TheoryMode, is_split_formula, is_u_formula, kg_boolean_offender
from .controlled import (
    BodyTag, Case, ControlledFormula, compose_first_case, conjoin, conjoin_many,
    disjoin, disjoin_many, expand, map_bodies, negate, prune, trivial,
)
from .formula import (
    And, AtomF, BOT, Bot, Eq, Exists, ExistsU, Forall, ForallU, Formula,
    InputError, InternalError, NameSupply, Not, Or, Quant, SigmaAtom, TOP,
    UAtom, conj, disj, eq0, exists_u_many, free_vars, map_atoms,
    negate_nnf_step, neq0, rename_vars, subatoms, substitute,
)
from .poly import ONE, Polynomial, RatFunc, UnivariateView, ZERO, as_univariate, poly_prod
from .transform import dnf, nnf, simplify

MODE = TheoryMode.ACF


# ---------------------------------------------------------------------------
# Branch-and-restart over vanishing patterns of pivot-free polynomials
# ---------------------------------------------------------------------------


class _NeedFact(Exception):
    def __init__(self, prim: Polynomial):
        self.prim = prim


class _DeadBranch(Exception):
    """The branch hypotheses contradict the case hypotheses."""


def _fact_is_zero(facts: dict, p: Polynomial) -> bool:
    if p.is_zero():
        return True
    if p.is_constant():
        return False
    prim, _ = p.sign_normalized()
    known = facts.get(prim)
    if known is None:
        raise _NeedFact(prim)
    return known


def _branchy(compute, seed_nonzero: Sequence[Polynomial] = ()) -> Formula:
    """Disjunction over all vanishing patterns `compute` asks about of
    (pattern conditions and compute's result)."""
    seed: dict = {}
    for p in seed_nonzero:
        if not p.is_zero() and not p.is_constant():
            prim, _ = p.sign_normalized()
            seed[prim] = False
    work = [(seed, [])]
    out: list[Formula] = []
    while work:
        facts, conds = work.pop()
        try:
            res = simplify(compute(dict(facts)))
        except _NeedFact as nf:
            q = nf.prim
            work.append(({**facts, q: True}, conds + [eq0(q)]))
            work.append(({**facts, q: False}, conds + [neq0(q)]))
            continue
        except _DeadBranch:
            continue
        if res != BOT:
            out.append(simplify(conj(conds + [res])))
    return simplify(disj(out))


# ---------------------------------------------------------------------------
# split_equality: one field-side variable out of a polynomial equation
# ---------------------------------------------------------------------------


@dataclass
class SpanningState:
    """State of the dependency search among powers of the last subgroup
    variable: the spanning monomials (pivot-power, relation-power), the
    normal forms of the processed powers over them, and the step counter,
    hard-capped at t*t' (the spanning set's size bounds the dimension)."""

    members: list
    table: dict = field(default_factory=dict)
    step: int = 0
    cap: int = 1


_SPLIT_CACHE: dict = {}


def split_equality(p: Polynomial, z: str, u_vars: Sequence[str],
                   supply: Optional[NameSupply] = None) -> ControlledFormula:
    """Case family equivalent to p(xs, z, us) == 0 for us ranging over the
    subgroup: guards mention (xs, z) plus witnesses, bodies mention
    (xs, us) plus witnesses, never z.  Results are cached up to renaming
    and returned with fresh witness names."""
    supply = supply or NameSupply()
    uv = tuple(v for v in u_vars if v in p.variables())
    others = sorted(p.variables() - set(uv) - {z})
    canon = {z: "z%p"}
    canon.update({v: f"u%{i}" for i, v in enumerate(uv)})
    canon.update({v: f"x%{i}" for i, v in enumerate(others)})
    key = (p.rename(canon), len(uv))
    hit = _SPLIT_CACHE.get(key)
    if hit is None:
        hit = _split_equality_raw(key[0], "z%p", tuple(f"u%{i}" for i in range(len(uv))),
                                  NameSupply(seed=10_000_000))
        if len(_SPLIT_CACHE) > 20_000:
            _SPLIT_CACHE.clear()
        _SPLIT_CACHE[key] = hit
    back = {w: v for v, w in canon.items()}
    cases = []
    for k in hit.cases:
        k2 = k.rename_witnesses(supply)
        cases.append(_case_replace(
            k2,
            eplus=rename_vars(k2.eplus, back, supply),
            eminus=rename_vars(k2.eminus, back, supply),
            body=rename_vars(k2.body, back, supply)))
    return ControlledFormula(tuple(cases), MODE)


def _split_equality_raw(p: Polynomial, z: str, u_vars: Sequence[str],
                        supply: NameSupply) -> ControlledFormula:
    u_vars = tuple(v for v in u_vars if v in p.variables())
    if z in u_vars:
        raise InputError("pivot variable cannot be on the subgroup side")
    if not u_vars:
        # the two printed base cases: p == 0 holds or it does not
        return prune(ControlledFormula((
            Case(0, (), eq0(p), (), TOP, TOP, BodyTag.SPLIT, "split_eq/base"),
            Case(1, (), neq0(p), (), TOP, BOT, BodyTag.SPLIT, "split_eq/base"),
        ), MODE))
    if p.is_zero():
        return trivial(TOP, MODE, BodyTag.SPLIT, "split_eq/zero")
    if z not in p.variables():
        return trivial(eq0(p), MODE, BodyTag.SPLIT, "split_eq/zfree")

    view = as_univariate(p, z)
    i0 = min(i for i in range(view.degree + 1) if not view.coeff(i).is_zero())
    p_i0 = view.coeff(i0)
    zvar = Polynomial.var(z)
    p_tilde = p - p_i0 * zvar**i0

    cases: list[Case] = []
    n = 0

    # cases where every subgroup root of p also kills the lowest coefficient
    c_side = split_equality(p_tilde, z, u_vars, supply)
    for k in c_side.cases:
        yprime = supply.fresh_tuple("y", len(u_vars))
        ren = dict(zip(u_vars, yprime))
        clause = disj([neq0(p.rename(ren)), eq0(p_i0.rename(ren))])
        cases.append(Case(
            n, k.eplus_vars, k.eplus,
            k.eminus_vars + yprime, simplify(conj([k.eminus, clause])),
            simplify(conj([k.body, eq0(p_i0)])),
            BodyTag.SPLIT, "split_eq/side"))
        n += 1

    # cases witnessing a subgroup root with nonzero lowest coefficient
    u0, v = u_vars[:-1], u_vars[-1]
    pv = as_univariate(p, v)
    t_z, t_v = view.degree, pv.degree
    subs = [split_equality(pv.coeff(s), z, u0, supply) for s in range(t_v + 1)]
    for choice in itertools.product(*(range(len(c.cases)) for c in subs)):
        picked = [subs[s].cases[choice[s]].rename_witnesses(supply) for s in range(t_v + 1)]
        y = supply.fresh_tuple("y", len(u_vars))
        ren = dict(zip(u_vars, y))
        eplus_vars: tuple[str, ...] = y
        eplus_parts: list[Formula] = [eq0(p.rename(ren)), neq0(p_i0.rename(ren))]
        eminus_vars: tuple[str, ...] = ()
        eminus_parts: list[Formula] = []
        for k in picked:
            eplus_vars += k.eplus_vars
            eplus_parts.append(k.eplus)
            eminus_vars += k.eminus_vars
            eminus_parts.append(k.eminus)
        eplus = simplify(conj(eplus_parts))
        if eplus == BOT:
            continue
        g_coeffs = [view.coeff(i).rename(ren) for i in range(i0, t_z + 1)]
        body = _root_case_body(pv, g_coeffs, z, v, t_z, t_v, picked)
        cases.append(Case(n, eplus_vars, eplus, eminus_vars,
                          simplify(conj(eminus_parts)), body,
                          BodyTag.SPLIT, "split_eq/root"))
        n += 1
    return prune(ControlledFormula(tuple(cases), MODE))


def _root_case_body(pv: UnivariateView, g_coeffs: list[Polynomial], z: str,
                    v: str, t_z: int, t_v: int, picked: list[Case]) -> Formula:
    """Disjunction over vanishing patterns of the coefficients of p in the
    last subgroup variable; each pattern concludes with a pivot-free
    equivalent of p == 0."""
    out: list[Formula] = []
    for S in _subsets(range(t_v + 1)):
        pattern = [picked[s].body if s in S else simplify(negate_nnf_step(picked[s].body))
                   for s in range(t_v + 1)]
        pat = simplify(conj(pattern))
        if pat == BOT:
            continue
        live = [s for s in range(t_v + 1) if s not in S]
        psi = _spanning_formula(pv, live, g_coeffs, z, v, t_z, t_v)
        part = simplify(conj([pat, psi]))
        if part != BOT:
            out.append(part)
    return simplify(disj(out))


def _subsets(items) -> Iterable[frozenset]:
    items = list(items)
    for mask in range(1 << len(items)):
        yield frozenset(items[i] for i in range(len(items)) if mask >> i & 1)


def _spanning_formula(pv: UnivariateView, live: list[int],
                      g_coeffs: list[Polynomial], z: str, v: str,
                      t_z: int, t_v: int) -> Formula:
    """Pivot-free equivalent of sum_{s in live} c_s(z) v**s == 0 given the
    witnessed pivot relation g(z) == 0 with nonzero constant coefficient."""
    if not live:
        return TOP
    if max(live) == 0:
        return BOT  # the surviving constant coefficient is nonzero by case
    live_views = {s: as_univariate(pv.coeff(s), z) for s in live}
    if all(view.degree <= 0 for view in live_views.values()):
        poly = ZERO
        for s in live:
            poly = poly + pv.coeff(s) * Polynomial.var(v) ** s
        return eq0(poly)
    cap = max(t_z * t_v, 1)

    def compute(facts: dict) -> Formula:
        g_cur: Optional[list] = None
        for _ in range(len(g_coeffs) + 3):
            try:
                if g_cur is None:
                    return _dependency_branch(facts, live, live_views, g_coeffs, v, cap)
                return _dependency_with_relation(facts, live, live_views, g_cur, v, cap)
            except _ShrunkRelation as sr:
                if len(sr.new_relation) <= 1:
                    raise _DeadBranch()
                g_cur = sr.new_relation
        raise InternalError("relation shrinking did not settle")

    return _branchy(compute, seed_nonzero=[g_coeffs[0]])


class _ShrunkRelation(Exception):
    def __init__(self, new_relation: list):
        self.new_relation = new_relation


def _dependency_branch(facts: dict, live: list[int], live_views: dict,
                       g_coeffs: list[Polynomial], v: str, cap: int) -> Formula:
    g = [RatFunc(c) for c in g_coeffs]
    while len(g) > 1 and _coeff_zero(facts, g[-1]):
        g.pop()
    if len(g) <= 1:
        raise _DeadBranch()
    return _dependency_with_relation(facts, live, live_views, g, v, cap)


def _dependency_with_relation(facts: dict, live: list[int], live_views: dict,
                              g: list, v: str, cap: int) -> Formula:
    red = _ZReducer(g, facts)
    D = max(live)
    inv_lead = red.invert(red.to_list(live_views[D]))
    # v**D == sum_{s<D} step_coeffs[s] * v**s modulo the two relations
    step: dict[int, list] = {}
    for s in live:
        if s == D:
            continue
        cs = red.mul_list(red.to_list(live_views[s]), inv_lead)
        step[s] = [-c for c in cs]
    e = len(g) - 1
    dim = D * e
    state = SpanningState(members=[(i, j) for i in range(D) for j in range(e)],
                          cap=max(cap, dim))
    # normal forms of v**n as vectors over the members
    vec = {(0, 0): RatFunc(ONE)}  # v**0
    rows: list[tuple[dict, dict]] = []  # (reduced vector, combination)
    for n in range(0, state.cap + 2):
        state.step = n
        state.table[n] = vec
        reduced, comb_adj = _echelon_reduce(rows, vec, facts)
        if not reduced:
            lam = dict(comb_adj)
            lam[n] = RatFunc(ONE)
            return _relation_formula(lam, v)
        rows.append((reduced, {**comb_adj, n: RatFunc(ONE)}))
        vec = _advance(vec, step, D, red)
    raise InternalError("dependency search exceeded the t*t' bound")


def _advance(vec: dict, step: dict, D: int, red: "_ZReducer") -> dict:
    """Normal form of v * (the element with normal form `vec`)."""
    out: dict = {}

    def add(key, c: RatFunc):
        if c.is_zero():
            return
        cur = out.get(key, RatFunc(ZERO))
        s = cur + c
        if s.is_zero():
            out.pop(key, None)
        else:
            out[key] = s

    for (i, j), c in vec.items():
        if i + 1 < D:
            add((i + 1, j), c)
        else:
            # reduce v**D via the step relation, tensored with z**j
            for s, coeffs in step.items():
                for j2, c2 in enumerate(coeffs):
                    prod = c * c2
                    if prod.is_zero():
                        continue
                    for (jj, c3) in red.z_power(j + j2):
                        add((s, jj), prod * c3)
    return out


def _echelon_reduce(rows: list, vec: dict, facts: dict):
    """Reduce vec against the echelon rows; returns (residual, combination)
    where combination expresses the eliminated part over past powers."""
    comb: dict = {}
    cur = dict(vec)
    for reduced, rcomb in rows:
        key = _first_nonzero_key(reduced, facts)
        if key is None:
            continue
        c = cur.get(key)
        if c is None or _coeff_zero(facts, c):
            continue
        factor = c / reduced[key]
        for k2, c2 in reduced.items():
            cur[k2] = cur.get(k2, RatFunc(ZERO)) - factor * c2
        for pw, c2 in rcomb.items():
            comb[pw] = comb.get(pw, RatFunc(ZERO)) - factor * c2
    cur = {k: c for k, c in cur.items() if not _coeff_zero(facts, c)}
    return cur, comb


def _first_nonzero_key(vec: dict, facts: dict):
    for key in sorted(vec.keys()):
        if not _coeff_zero(facts, vec[key]):
            return key
    return None


def _relation_formula(lam: dict, v: str) -> Formula:
    """Clear denominators in sum_n lam[n] * v**n == 0."""
    items = [(n, c) for n, c in sorted(lam.items()) if not c.is_zero()]
    dens = [c.den for _, c in items]
    poly = ZERO
    for idx, (n, c) in enumerate(items):
        others = poly_prod([d for j, d in enumerate(dens) if j != idx])
        poly = poly + c.num * others * Polynomial.var(v) ** n
    return eq0(poly)


def _coeff_zero(facts: dict, c: RatFunc) -> bool:
    if c.is_zero():
        return True
    return _fact_is_zero(facts, c.num)


class _ZReducer:
    """Arithmetic on pivot-coefficient lists modulo g, with branch-aware
    inversion of values known nonzero at the pivot."""

    def __init__(self, g: list, facts: dict):
        self.g = g
        self.facts = facts
        self._zpow: dict[int, list] = {}

    def trim(self, xs: list) -> list:
        while xs and _coeff_zero(self.facts, xs[-1]):
            xs.pop()
        return xs

    def reduce(self, coeffs: list) -> list:
        g = self.g
        e = len(g) - 1
        inv = g[-1].inverse()
        out = list(coeffs)
        while len(out) > e:
            top = out.pop()
            if _coeff_zero(self.facts, top):
                continue
            factor = top * inv
            for j in range(e):
                out[len(out) - e + j] = out[len(out) - e + j] - factor * g[j]
        return self.trim(out)

    def to_list(self, view: UnivariateView) -> list:
        return self.reduce([RatFunc(c) for c in view.coeffs])

    def z_power(self, j: int) -> list:
        """z**j reduced: list of (index, coefficient) pairs."""
        if j < len(self.g) - 1:
            return [(j, RatFunc(ONE))]
        cached = self._zpow.get(j)
        if cached is None:
            coeffs = [RatFunc(ZERO)] * j + [RatFunc(ONE)]
            red = self.reduce(coeffs)
            cached = [(idx, c) for idx, c in enumerate(red) if not c.is_zero()]
            self._zpow[j] = cached
        return cached

    def mul_list(self, a: list, b: list) -> list:
        out = [RatFunc(ZERO)] * max(len(a) + len(b), 1)
        for i, c in enumerate(a):
            for j, d in enumerate(b):
                out[i + j] = out[i + j] + c * d
        return self.reduce(out)

    def invert(self, a: list) -> list:
        """Coefficient list h with value(a)*value(h) == 1 at the pivot; the
        value of a is nonzero by case hypothesis."""
        a = self.trim(list(a))
        if not a:
            raise _DeadBranch()  # the hypothesized-nonzero value reduced to 0
        if len(a) == 1:
            return [a[0].inverse()]
        r0, s0 = list(self.g), [RatFunc(ZERO)]
        r1, s1 = list(a), [RatFunc(ONE)]
        for _ in range(4 * (len(self.g) + len(a)) + 8):
            r1 = self.trim(r1)
            if not r1:
                # gcd r0 divides a, whose value is nonzero, so value(r0) != 0
                # and the relation factors through g / r0
                quot, rem = self._divmod(self.g, r0)
                if self.trim(list(rem)):
                    raise InternalError("gcd does not divide the relation")
                raise _ShrunkRelation(self.trim(quot))
            if len(r1) == 1:
                inv = r1[0].inverse()
                return self.reduce([c * inv for c in s1])
            q, r2 = self._divmod(r0, r1)
            s2 = self._sub(s0, self._mul_raw(q, s1))
            r0, s0, r1, s1 = r1, s1, r2, s2
        raise InternalError("inversion did not terminate")

    def _divmod(self, a: list, b: list):
        b = self.trim(list(b))
        if not b:
            raise InternalError("division by zero relation")
        inv = b[-1].inverse()
        rem = list(a)
        quot = [RatFunc(ZERO)] * max(len(a) - len(b) + 1, 1)
        while True:
            rem = self.trim(rem)
            if len(rem) < len(b):
                return quot, rem
            k = rem[-1] * inv
            shift = len(rem) - len(b)
            quot[shift] = quot[shift] + k
            for i, c in enumerate(b):
                rem[i + shift] = rem[i + shift] - k * c
            rem.pop()

    @staticmethod
    def _sub(a: list, b: list) -> list:
        n = max(len(a), len(b))
        out = []
        for i in range(n):
            x = a[i] if i < len(a) else RatFunc(ZERO)
            yv = b[i] if i < len(b) else RatFunc(ZERO)
            out.append(x - yv)
        return out

    @staticmethod
    def _mul_raw(a: list, b: list) -> list:
        out = [RatFunc(ZERO)] * max(len(a) + len(b), 1)
        for i, c in enumerate(a):
            for j, d in enumerate(b):
                out[i + j] = out[i + j] + c * d
        return out


# ---------------------------------------------------------------------------
# Split-formula re-normalization: moving field-side variables into guards
# ---------------------------------------------------------------------------


def replace_one(phi: Formula, z: str, u_side: frozenset[str] | set[str],
                supply: NameSupply) -> ControlledFormula:
    """Controlled equivalent of a split formula with z moved out of bodies:
    field-language components go through classical elimination and the
    per-equation split, subgroup components pass through untouched."""
    u_side = frozenset(u_side)

    def walk(g: Formula) -> ControlledFormula:
        if isinstance(g, Bot):
            return trivial(BOT, MODE, BodyTag.SPLIT, "replace/bot")
        if g == TOP:
            return trivial(TOP, MODE, BodyTag.SPLIT, "replace/top")
        if z not in free_vars(g):
            # components without the pivot ride along in bodies; later
            # pivots move their remaining field-side variables out
            return trivial(g, MODE, BodyTag.SPLIT, "replace/ride")
        if is_u_formula(g, MODE) and free_vars(g) <= u_side:
            return trivial(g, MODE, BodyTag.SPLIT, "replace/u")
        if isinstance(g, Not):
            return negate(walk(g.arg))
        if isinstance(g, And):
            return conjoin_many([walk(a) for a in g.args], supply)
        if isinstance(g, Or):
            return disjoin_many([walk(a) for a in g.args], supply)
        if isinstance(g, AtomF):
            if not isinstance(g.atom, Eq):
                raise InputError(f"atom outside the split grammar: {g!r}")
            p = g.atom.poly
            us = sorted(p.variables() & u_side)
            return split_equality(p, z, us, supply)
        if isinstance(g, (Exists, Forall)):
            return walk(simplify(acf_eliminate(g)))
        raise InputError(f"node outside the split grammar: {g!r}")

    return walk(simplify(phi))


def replace_vars(phi: Formula, z_vars: Sequence[str],
                 u_side: frozenset[str] | set[str],
                 supply: NameSupply) -> ControlledFormula:
    """Iterated single-variable replacement with first-possible-case
    composition: guards end up over the field-side variables, bodies over
    the subgroup side."""
    u_side = frozenset(u_side)
    if not is_split_formula(phi, u_side, MODE):
        raise InputError("input is not split for the declared partition")
    if not z_vars:
        return trivial(phi, MODE, BodyTag.SPLIT, "replace/none")
    z0, zlast = tuple(z_vars[:-1]), z_vars[-1]
    c = replace_one(phi, zlast, u_side, supply)
    if not z0:
        return c
    from dataclasses import replace as _mk
    refinements = {}
    for k in c.cases:
        u2 = u_side | set(k.eplus_vars) | set(k.eminus_vars)
        refinements[k.id] = replace_vars(k.body, z0, u2, supply)
    hollow = ControlledFormula(tuple(_mk(k, body=TOP) for k in c.cases), MODE)
    return compose_first_case(hollow, refinements, supply)


# ---------------------------------------------------------------------------
# Subgroup-formula rewriting and bounded-quantifier elimination
# ---------------------------------------------------------------------------


def u_formula_rewrite(phi: Formula) -> Formula:
    """Rewrite a formula whose free variables all range over the subgroup
    into the multiplicative language: additive equations become
    additive-relation atoms, memberships fold away."""

    def fn(atom) -> Formula:
        if isinstance(atom, SigmaAtom):
            return AtomF(atom)
        if isinstance(atom, UAtom):
            return TOP  # a product of subgroup elements is in the subgroup
        if isinstance(atom, Eq):
            p = atom.poly
            if p.is_zero():
                return TOP
            denom_lcm = 1
            for c in p.terms.values():
                denom_lcm = denom_lcm * c.denominator // _gcd_int(denom_lcm, c.denominator)
            ks = []
            args = []
            for m, c in p.sorted_terms():
                ks.append(int(c * denom_lcm))
                args.append(Polynomial.from_monomial(m))
            return AtomF(SigmaAtom(tuple(ks), tuple(args)))
        raise InternalError(f"atom not expressible over the subgroup: {atom!r}")

    return map_atoms(phi, fn)


def _gcd_int(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a) or 1


def u_block_eliminate(phi: Formula, uvars: Sequence[str],
                      u_side: frozenset[str] | set[str],
                      supply: NameSupply) -> ControlledFormula:
    """Controlled equivalent of existsU uvars . phi for a split formula phi:
    all field-side variables move into guards, then the bounded block is
    absorbed into the subgroup-language bodies."""
    u_side = frozenset(u_side) | set(uvars)
    guard_vars = sorted(free_vars(phi) - u_side)
    c = replace_vars(phi, guard_vars, u_side, supply)
    return map_bodies(
        c, lambda k: u_formula_rewrite(exists_u_many(list(uvars), k.body)),
        tag=BodyTag.SPLIT)


def exists_U(c: ControlledFormula, u: str,
             u_side: frozenset[str] | set[str],
             supply: NameSupply) -> ControlledFormula:
    """Eliminate a subgroup-bounded quantifier from a case family.  The
    bounded variable may occur in guards as well as bodies: guard
    dependence is re-normalized through the split machinery first."""
    u_side = frozenset(u_side)
    parts: list[ControlledFormula] = []
    for k in c.cases:
        k = k.rename_witnesses(supply)
        m = simplify(conj([k.eplus, k.body]))
        if u not in free_vars(k.eminus):
            pos = u_block_eliminate(m, list(k.eplus_vars) + [u], u_side, supply)
            out = ControlledFormula(tuple(
                _case_replace(kk,
                              eminus_vars=kk.eminus_vars + k.eminus_vars,
                              eminus=simplify(conj([kk.eminus, k.eminus])))
                for kk in pos.cases), MODE)
        else:
            pos = u_block_eliminate(m, list(k.eplus_vars), u_side | {u}, supply)
            neg_block = u_block_eliminate(simplify(nnf(Not(k.eminus))),
                                          list(k.eminus_vars), u_side | {u}, supply)
            both = conjoin(pos, negate(neg_block), supply)
            out = map_bodies(
                both, lambda kk: u_formula_rewrite(exists_u_many([u], kk.body)),
                tag=BodyTag.SPLIT)
        parts.append(prune(out))
    return disjoin_many(parts, supply)


# ---------------------------------------------------------------------------
# Root-bounded existentials
# ---------------------------------------------------------------------------


def _close_exists_fields(zs: Sequence[str], matrix: Formula,
                         supply: NameSupply) -> Formula:
    """Eliminate an unbounded existential block from a split matrix whose
    quantified variables occur only in field-language literals."""
    if not zs:
        return simplify(matrix)
    from .transform import disjuncts as _dis, conjuncts as _con
    m = dnf(simplify(matrix))
    out = []
    zset = set(zs)
    for clause in _dis(m):
        lits = _con(clause)
        zlits = [l for l in lits if free_vars(l) & zset]
        rest = [l for l in lits if not (free_vars(l) & zset)]
        if zlits:
            body = conj(zlits)
            for zv in reversed(zs):
                body = Exists(zv, body)
            core = simplify(acf_eliminate(body))
        else:
            core = TOP
        out.append(simplify(conj(rest + [core])))
    return simplify(disj(out))


def _instantiate(formula: Formula, z: str, z_new: str, wit_vars: Sequence[str],
                 supply: NameSupply) -> tuple[Formula, tuple[str, ...]]:
    """Substitute the root variable and refresh the witness tuple."""
    ren = {w: supply.fresh(w) for w in wit_vars}
    ren[z] = z_new
    out = substitute(formula, {a: Polynomial.var(b) for a, b in ren.items()}, supply)
    return out, tuple(ren[w] for w in wit_vars)


def _fg_pairs(ids: Sequence[int], d: int):
    """All (f, g) with sum(f) <= d and f(j) <= g(j) <= min(sum(f), d): a
    root weakly in case j is one of the sum(f) roots, so larger counts can
    never fire."""
    def f_maps(rest, budget):
        if not rest:
            yield {}
            return
        j, tail = rest[0], rest[1:]
        for v in range(budget + 1):
            for sub in f_maps(tail, budget - v):
                yield {j: v, **sub}

    for f in f_maps(list(ids), d):
        cap = min(sum(f.values()), d)
        ranges = [range(f[j], cap + 1) for j in ids]
        for gs in itertools.product(*ranges):
            yield f, dict(zip(ids, gs))


def exists_root(c: ControlledFormula, p_view: UnivariateView,
                supply: NameSupply) -> ControlledFormula:
    """Controlled equivalent of
    exists z (some coefficient of p is nonzero, p(z) == 0, and phi(z))
    where c is the controlled equivalent of phi.  Cases are indexed by how
    many roots fall in each case of c (counted positively and negatively)."""
    z = p_view.pivot
    d = p_view.degree
    coeffs = [p_view.coeff(i) for i in range(d + 1)]
    p_poly = p_view.to_polynomial()
    nontrivial = simplify(disj([neq0(ci) for ci in coeffs]))
    cases: list[Case] = [
        Case(0, (), simplify(conj([eq0(ci) for ci in coeffs])), (), TOP, BOT,
             BodyTag.SPLIT, "root/trivial")]
    n = 1
    ids = [k.id for k in c.cases]
    by_id = {k.id: k for k in c.cases}
    if (d + 1) ** max(len(ids), 1) > 50_000:
        raise InternalError("root-counting case budget exceeded")

    def roots_block(count: int, conds_for):
        """exists z_1..z_count: distinct roots with conds_for(i, z_i)."""
        zs = [supply.fresh("z") for _ in range(count)]
        parts: list[Formula] = []
        wit_acc: list[str] = []
        for i, zv in enumerate(zs):
            parts.append(eq0(p_poly.subst({z: Polynomial.var(zv)})))
            for z2 in zs[i + 1:]:
                parts.append(neq0(Polynomial.var(zv) - Polynomial.var(z2)))
            extra, wits = conds_for(i, zv)
            parts.append(extra)
            wit_acc.extend(wits)
        return _close_exists_fields(zs, conj(parts), supply), tuple(wit_acc)

    for f, g in _fg_pairs(ids, d):
        if sum(f.values()) > d:
            continue
        eplus_vars: list[str] = []
        eplus_parts: list[Formula] = [nontrivial]
        dead = False
        for j in ids:
            kj = by_id[j]
            if g[j] == 0:
                continue

            def conds(i, zv, kj=kj, fj=f[j]):
                ep, w1 = _instantiate(kj.eplus, z, zv, kj.eplus_vars, supply)
                parts = [ep]
                wits = list(w1)
                if i >= fj:
                    em, w2 = _instantiate(kj.eminus, z, zv, kj.eminus_vars, supply)
                    parts.append(simplify(negate_nnf_step(em)))
                    wits.extend(w2)
                return conj(parts), wits

            blk, wits = roots_block(g[j], conds)
            blk = simplify(blk)
            if blk == BOT:
                dead = True
                break
            eplus_parts.append(blk)
            eplus_vars.extend(wits)
        if dead:
            continue
        eplus = simplify(conj(eplus_parts))
        if eplus == BOT:
            continue

        total = sum(f.values())
        eminus_vars: list[str] = []
        eminus_parts: list[Formula] = []
        at_most, _ = roots_block(total + 1, lambda i, zv: (TOP, ()))
        eminus_parts.append(simplify(negate_nnf_step(simplify(at_most))))
        for j in ids:
            kj = by_id[j]
            miss = total - g[j]
            if miss > 0:
                def c_fail(i, zv, kj=kj):
                    ep, w = _instantiate(kj.eplus, z, zv, kj.eplus_vars, supply)
                    return simplify(negate_nnf_step(ep)), w

                blk, wits = roots_block(miss, c_fail)
                eminus_parts.append(simplify(blk))
                eminus_vars.extend(wits)
            hold = total - g[j] + f[j]
            if hold > 0:
                def c_hold(i, zv, kj=kj):
                    em, w1 = _instantiate(kj.eminus, z, zv, kj.eminus_vars, supply)
                    ep, w2 = _instantiate(kj.eplus, z, zv, kj.eplus_vars, supply)
                    return disj([em, simplify(negate_nnf_step(ep))]), tuple(w1) + tuple(w2)

                blk, wits = roots_block(hold, c_hold)
                eminus_parts.append(simplify(blk))
                eminus_vars.extend(wits)
        eminus = simplify(conj(eminus_parts))

        # body: the roots listed in case order, one of them satisfying the
        # matching case body
        blocks: list[int] = []
        for j in ids:
            blocks.extend([j] * f[j])

        if total == 0:
            body: Formula = BOT
        else:
            zs = [supply.fresh("z") for _ in range(total)]
            parts = []
            wit_acc: list[str] = []
            picks = []
            for i, zv in enumerate(zs):
                parts.append(eq0(p_poly.subst({z: Polynomial.var(zv)})))
                for z2 in zs[i + 1:]:
                    parts.append(neq0(Polynomial.var(zv) - Polynomial.var(z2)))
                kj = by_id[blocks[i]]
                ep, w1 = _instantiate(kj.eplus, z, zv, kj.eplus_vars, supply)
                parts.append(ep)
                wit_acc.extend(w1)
                bd = substitute(kj.body, {z: Polynomial.var(zv)}, supply)
                bd = substitute(bd, {a: Polynomial.var(b) for a, b in zip(kj.eplus_vars, w1)}, supply)
                picks.append(bd)
            parts.append(disj(picks))
            body = _close_exists_fields(zs, conj(parts), supply)
            eplus_vars.extend(wit_acc)
        cases.append(Case(n, tuple(eplus_vars), eplus, tuple(eminus_vars),
                          eminus, simplify(body), BodyTag.SPLIT, f"root/{f}/{g}"))
        n += 1
    return prune(ControlledFormula(tuple(cases), MODE))


# ---------------------------------------------------------------------------
# Full elimination
# ---------------------------------------------------------------------------


def _u_atom_cases(t: Polynomial, supply: NameSupply) -> ControlledFormula:
    """Membership of a term value in the subgroup, as a two-case family:
    either a subgroup element equals the term, or none does."""
    y = supply.fresh("y")
    y2 = supply.fresh("y")
    return ControlledFormula((
        Case(0, (y,), eq0(Polynomial.var(y) - t), (), TOP, TOP,
             BodyTag.SPLIT, "atom/U"),
        Case(1, (), TOP, (y2,), neq0(Polynomial.var(y2) - t), BOT,
             BodyTag.SPLIT, "atom/U"),
    ), MODE)


def _sigma_atom_cases(atom: SigmaAtom, supply: NameSupply) -> ControlledFormula:
    """An additive-relation atom over arbitrary terms: witnesses equal to
    each argument satisfying the relation, or no such witnesses."""
    ys = supply.fresh_tuple("y", len(atom.args))
    ys2 = supply.fresh_tuple("y", len(atom.args))

    def matches(names):
        eqs = [eq0(Polynomial.var(nm) - t) for nm, t in zip(names, atom.args)]
        rel = AtomF(SigmaAtom(atom.coeffs, tuple(Polynomial.var(nm) for nm in names)))
        return simplify(conj(eqs + [rel]))

    return ControlledFormula((
        Case(0, ys, matches(ys), (), TOP, TOP, BodyTag.SPLIT, "atom/sigma"),
        Case(1, (), TOP, ys2, simplify(negate_nnf_step(matches(ys2))), BOT,
             BodyTag.SPLIT, "atom/sigma"),
    ), MODE)


def _witness_vars(c: ControlledFormula) -> set[str]:
    out: set[str] = set()
    for k in c.cases:
        out.update(k.eplus_vars)
        out.update(k.eminus_vars)
    return out


def _z_polynomials(c: ControlledFormula, z: str) -> list[tuple[Polynomial, list[str]]]:
    """Distinct equation polynomials containing z, with their witness
    variables renamed canonically so copies differing only in witness names
    collapse; returns (polynomial, canonical witness list) pairs."""
    wits = _witness_vars(c)
    seen: dict[Polynomial, list[str]] = {}
    for k in c.cases:
        for part in (k.eplus, k.eminus, k.body):
            for atom in subatoms(part):
                if isinstance(atom, Eq) and z in atom.poly.variables():
                    prim = atom.poly.primitive()
                    pw = sorted(prim.variables() & wits)
                    canon = {w: f"w%{i}" for i, w in enumerate(pw)}
                    key = prim.rename(canon).primitive()
                    if key not in seen:
                        seen[key] = [canon[w] for w in pw]
                elif not isinstance(atom, Eq):
                    for t in _atom_terms(atom):
                        if z in t.variables():
                            raise InternalError(
                                "field variable leaked into a subgroup atom")
    return [(p, ws) for p, ws in seen.items()]


def _atom_terms(atom) -> list[Polynomial]:
    if isinstance(atom, UAtom):
        return [atom.term]
    if isinstance(atom, SigmaAtom):
        return list(atom.args)
    return []


def eliminate(phi: Formula, supply: Optional[NameSupply] = None,
              max_depth: int = 400) -> ControlledFormula:
    """Controlled equivalent of an arbitrary formula in the ring+subgroup
    language over an algebraically closed field with a small subgroup."""
    supply = supply or NameSupply()
    return _eliminate(simplify(phi), supply, max_depth)


def _eliminate(phi: Formula, supply: NameSupply, fuel: int) -> ControlledFormula:
    if fuel <= 0:
        raise InternalError("elimination recursion exceeded its depth guard")
    fuel -= 1
    if isinstance(phi, Bot):
        return trivial(BOT, MODE, BodyTag.SPLIT, "atom/bot")
    if phi == TOP:
        return trivial(TOP, MODE, BodyTag.SPLIT, "atom/top")
    if isinstance(phi, AtomF):
        atom = phi.atom
        if isinstance(atom, Eq):
            return trivial(simplify(phi), MODE, BodyTag.SPLIT, "atom/eq")
        if isinstance(atom, UAtom):
            return _u_atom_cases(atom.term, supply)
        if isinstance(atom, SigmaAtom):
            return _sigma_atom_cases(atom, supply)
        raise InputError(f"atom outside the field+subgroup language: {atom!r}")
    if isinstance(phi, Not):
        return negate(_eliminate(phi.arg, supply, fuel))
    if isinstance(phi, And):
        return conjoin_many([_eliminate(a, supply, fuel) for a in phi.args], supply)
    if isinstance(phi, Or):
        return disjoin_many([_eliminate(a, supply, fuel) for a in phi.args], supply)
    if isinstance(phi, Quant) and phi.var not in free_vars(phi.body):
        # the subgroup is nonempty and the field infinite: vacuous binding
        return _eliminate(phi.body, supply, fuel)
    if isinstance(phi, ExistsU):
        inner = conj([AtomF(UAtom(Polynomial.var(phi.var))), phi.body])
        return _eliminate(Exists(phi.var, inner), supply, fuel)
    if isinstance(phi, ForallU):
        inner = ExistsU(phi.var, negate_nnf_step(phi.body))
        return negate(_eliminate(inner, supply, fuel))
    if isinstance(phi, Forall):
        return negate(_eliminate(Exists(phi.var, negate_nnf_step(phi.body)), supply, fuel))
    if isinstance(phi, Exists):
        z = phi.var
        c = _eliminate(phi.body, supply, fuel)
        if z not in _free_vars_controlled(c):
            return c
        polys = _z_polynomials(c, z)
        disjuncts: list[ControlledFormula] = []
        for p, pw in polys:
            ren = {w: supply.fresh("y") for w in pw}
            p_free = p.rename(ren)
            uvars = [ren[w] for w in pw]
            view = as_univariate(p_free, z)
            coeffs = [view.coeff(i) for i in range(view.degree + 1)]
            guard = trivial(simplify(disj([neq0(ci) for ci in coeffs])), MODE,
                            BodyTag.SPLIT, "theorem/nontrivial")
            conjd = conjoin(guard, c, supply)
            rooted = exists_root(conjd, view, supply)
            for i, u in enumerate(uvars):
                rooted = exists_U(rooted, u, set(uvars[i + 1:]), supply)
            disjuncts.append(rooted)
        # transcendental disjunct: replace every equation containing z by
        # the simultaneous vanishing of its coefficients; the remaining
        # existential is discharged because the subgroup is small
        star = _coefficientwise(c, z)
        disjuncts.append(star)
        return disjoin_many(disjuncts, supply)
    raise InputError(f"unknown node {phi!r}")


def _free_vars_controlled(c: ControlledFormula) -> set[str]:
    out: set[str] = set()
    for k in c.cases:
        bound = set(k.eplus_vars) | set(k.eminus_vars)
        out |= (free_vars(k.eplus) | free_vars(k.eminus) | free_vars(k.body)) - bound
    return out


def _coefficientwise(c: ControlledFormula, z: str) -> ControlledFormula:
    def fn(atom) -> Formula:
        if isinstance(atom, Eq) and z in atom.poly.variables():
            view = as_univariate(atom.poly, z)
            return simplify(conj([eq0(view.coeff(i)) for i in range(view.degree + 1)]))
        return AtomF(atom)

    cases = []
    for k in c.cases:
        cases.append(_case_replace(
            k,
            eplus=simplify(map_atoms(k.eplus, fn)),
            eminus=simplify(map_atoms(k.eminus, fn)),
            body=simplify(map_atoms(k.body, fn)),
            provenance=f"transcendental({k.provenance})"))
    return prune(ControlledFormula(tuple(cases), MODE))


# ---------------------------------------------------------------------------
# The target Boolean combination
# ---------------------------------------------------------------------------


def _kg_block(uvars: Sequence[str], matrix: Formula) -> Formula:
    """existsU uvars (split matrix) as a disjunction of target-shaped
    existentials: per clause the subgroup part and the field part split."""
    m = dnf(simplify(matrix))
    from .transform import disjuncts as _dis, conjuncts as _con
    out = []
    for clause in _dis(m):
        u_parts = []
        l_parts = []
        for lit in _con(clause):
            if is_u_formula(lit, MODE):
                u_parts.append(lit)
            else:
                l_parts.append(lit)
        out.append(exists_u_many(list(uvars), conj(u_parts + l_parts)))
    return simplify(disj(out))


def to_kg_boolean(c: ControlledFormula) -> Formula:
    """Expand a controlled formula into a Boolean combination of
    subgroup-guarded existentials over field matrices."""
    parts = []
    for k in c.cases:
        pos = _kg_block(k.eplus_vars, conj([k.eplus, k.body]))
        neg_inner = _kg_block(k.eminus_vars, simplify(nnf(Not(k.eminus))))
        neg = simplify(negate_nnf_step(neg_inner))
        parts.append(simplify(conj([pos, neg])))
    out = simplify(disj(parts))
    offender = kg_boolean_offender(out, MODE)
    if offender is not None:
        raise InternalError(f"output escapes the target grammar: {offender!r}")
    return out
