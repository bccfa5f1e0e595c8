"""Quantifier elimination for real closed ordered fields by sign matrices.

The engine tabulates the signs of a family of univariate polynomials (in the
variable being eliminated) over the point and interval cells of the real
line.  The matrix for a family containing a maximal-degree pivot p is read
off the matrix for {p'} + others + pseudo-remainders: remainder rows give
p's sign at roots of the other rows, and monotonicity between consecutive
cells (the derivative is a row, so its sign is constant on interval cells)
locates p's own roots.

Parameter coefficients are handled by branch-and-restart: whenever a sign
is needed that the current context does not determine, the computation
aborts, the driver splits the context three ways, and each branch
contributes (sign conditions and verdict) to the output disjunction.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from .classify import TheoryMode, is_l_formula
from .formula import (
    AtomF, BOT, Bot, Eq, Exists, Forall, Formula, InputError, InternalError,
    Lt, NameSupply, Not, And, Or, TOP, conj, disj, eq0, exists_many, free_vars,
    lt0, neq0, subatoms,
)
from .poly import Polynomial, UnivariateView, as_univariate, pseudo_div
from .transform import eval_boolean, nnf, simplify

Ctx = dict  # Polynomial (primitive, nonconstant) -> sign in {-1, 0, 1}
INTERVAL = "int"
POINT = "pt"


class _NeedSign(Exception):
    def __init__(self, prim: Polynomial):
        self.prim = prim


class _Infeasible(Exception):
    """The sign context is unsatisfiable over the reals: the matrix walk
    derived a sign pattern no real polynomial can realize."""


def _sign(ctx: Ctx, p: Polynomial) -> int:
    if p.is_constant():
        v = p.constant_value()
        return 0 if v == 0 else (1 if v > 0 else -1)
    prim, s = p.sign_normalized()
    known = ctx.get(prim)
    if known is None:
        raise _NeedSign(prim)
    return known * s


def _resolve_view(ctx: Ctx, view: UnivariateView) -> UnivariateView:
    """Trim until the leading coefficient has nonzero sign in ctx."""
    coeffs = list(view.coeffs)
    while coeffs and _sign(ctx, coeffs[-1]) == 0:
        coeffs.pop()
    return UnivariateView(view.pivot, coeffs)


def _signed_rem(p: UnivariateView, q: UnivariateView) -> UnivariateView:
    """Remainder r with lc(q)**even * p = s*q + r, so at any root of q the
    sign of p equals the sign of r."""
    _, rem, k = pseudo_div(p, q)
    if k % 2:
        rem = rem.scale(q.leading())
    return rem


def _const_coeffs(view: UnivariateView):
    out = []
    for c in view.coeffs:
        if c.is_zero():
            out.append(_F0)
        elif c.is_constant():
            out.append(c.constant_value())
        else:
            return None
    return out


def sign_matrix(ctx: Ctx, views: list[UnivariateView]) -> tuple[list[str], list[list[int]]]:
    """Cells (alternating interval/point, unbounded intervals at both ends)
    with per-cell sign vectors aligned to `views`.  Raises _NeedSign when a
    parameter sign is missing from the context and _Infeasible when the
    context admits no real assignment."""
    consts = [_const_coeffs(v) for v in views]
    if all(c is not None for c in consts):
        return _sign_matrix_const(consts)  # type: ignore[arg-type]
    frames: list[dict] = []
    current = list(views)
    while True:
        res = [_resolve_view(ctx, v) for v in current]
        flat: dict[int, int] = {}
        live_idx: list[int] = []
        for i, v in enumerate(res):
            if v.degree >= 1:
                live_idx.append(i)
            elif v.is_zero():
                flat[i] = 0
            else:
                flat[i] = _sign(ctx, v.coeff(0))
        if not live_idx:
            kinds = [INTERVAL]
            cells = [[flat[i] for i in range(len(res))]]
            break
        canon: dict[tuple, int] = {}
        ulive: list[UnivariateView] = []
        alias: dict[int, int] = {}
        for i in live_idx:
            ck = tuple(res[i].coeffs)
            if ck not in canon:
                canon[ck] = len(ulive)
                ulive.append(res[i])
            alias[i] = canon[ck]
        ip = max(range(len(ulive)), key=lambda i: ulive[i].degree)
        p = ulive[ip]
        deriv = p.derivative()
        qs = [deriv] + [ulive[i] for i in range(len(ulive)) if i != ip]
        rems = [_signed_rem(p, q) for q in qs]
        frames.append({
            "alias": alias, "flat": flat, "n_in": len(res),
            "ip": ip, "d": p.degree, "lc_sign": _sign(ctx, p.leading()),
            "n_ulive": len(ulive), "nq": len(qs),
        })
        current = qs + rems

    while frames:
        kinds, cells = _rebuild(frames.pop(), kinds, cells)
    return kinds, cells


from fractions import Fraction as _Fr
from math import gcd as _gcd

_F0 = _Fr(0)


def _ctrim(p: list) -> list:
    while p and p[-1] == 0:
        p.pop()
    return p


def _cnorm(v: list) -> list[int]:
    """Scale by a positive rational to a primitive integer vector (signs are
    all the matrix ever reads, so this is free)."""
    v = _ctrim(list(v))
    if not v:
        return []
    den = 1
    for c in v:
        if isinstance(c, _Fr):
            den = den * c.denominator // _gcd(den, c.denominator)
    ints = [int(c * den) if isinstance(c, _Fr) else c * den for c in v]
    g = 0
    for c in ints:
        g = _gcd(g, abs(c))
    if g > 1:
        ints = [c // g for c in ints]
    return ints


def _cderiv(p: list) -> list[int]:
    return _cnorm([c * i for i, c in enumerate(p)][1:])


def _csigned_rem(p: list, q: list) -> list[int]:
    """Remainder with an even power of lc(q) as multiplier, renormalized by
    a positive factor."""
    lc = q[-1]
    dq = len(q) - 1
    rem = list(p)
    k = 0
    while rem and len(rem) - 1 >= dq:
        lead = rem[-1]
        shift = len(rem) - 1 - dq
        rem = [c * lc for c in rem]
        for i, c in enumerate(q):
            rem[i + shift] -= c * lead
        _ctrim(rem)
        k += 1
    if k % 2 and lc < 0:
        rem = [-c for c in rem]
    return _cnorm(rem)


_CONST_CACHE: dict = {}


def _sign_matrix_const(cviews: list[list]) -> tuple[list[str], list[list[int]]]:
    """Sign matrix over rational-constant coefficient lists; no branching."""
    key = tuple(tuple(_cnorm(v)) for v in cviews)
    hit = _CONST_CACHE.get(key)
    if hit is not None:
        return hit
    frames: list[dict] = []
    current: list[list] = [list(k) for k in key]
    while True:
        res = current
        flat: dict[int, int] = {}
        live_idx: list[int] = []
        for i, v in enumerate(res):
            if len(v) >= 2:
                live_idx.append(i)
            elif not v:
                flat[i] = 0
            else:
                flat[i] = 1 if v[0] > 0 else -1
        if not live_idx:
            kinds = [INTERVAL]
            cells = [[flat[i] for i in range(len(res))]]
            break
        canon: dict[tuple, int] = {}
        ulive: list[list] = []
        alias: dict[int, int] = {}
        for i in live_idx:
            ck = tuple(res[i])
            if ck not in canon:
                canon[ck] = len(ulive)
                ulive.append(res[i])
            alias[i] = canon[ck]
        ip = max(range(len(ulive)), key=lambda i: len(ulive[i]))
        p = ulive[ip]
        deriv = _cderiv(p)
        qs = [deriv] + [ulive[i] for i in range(len(ulive)) if i != ip]
        rems = [_csigned_rem(p, q) for q in qs]
        frames.append({
            "alias": alias, "flat": flat, "n_in": len(res),
            "ip": ip, "d": len(p) - 1,
            "lc_sign": 1 if p[-1] > 0 else -1,
            "n_ulive": len(ulive), "nq": len(qs),
        })
        current = qs + rems

    while frames:
        kinds, cells = _rebuild(frames.pop(), kinds, cells)
    if len(_CONST_CACHE) > 100_000:
        _CONST_CACHE.clear()
    _CONST_CACHE[key] = (kinds, cells)
    return kinds, cells


def _rebuild(fr: dict, kinds: list[str], cells: list[list[int]]) -> tuple[list[str], list[list[int]]]:
    """Reconstruct one level: (kinds, cells) describe the helper family
    qs + rems; produce the matrix for the level's input views."""
    nq = fr["nq"]
    d = fr["d"]
    lc_sign = fr["lc_sign"]

    # p's sign at point cells comes from the remainder row of a vanishing q
    # (each q has nonzero leading sign in ctx, so zero entries are roots);
    # point cells where no q vanishes are dropped, merging their neighbours
    kinds2: list[str] = []
    qcells2: list[list[int]] = []
    p_at2: list[Optional[int]] = []
    last_int = False
    for ci, kind in enumerate(kinds):
        row = cells[ci]
        qrow = row[:nq]
        if kind == POINT:
            try:
                qi = qrow.index(0)
            except ValueError:
                continue
            kinds2.append(POINT)
            qcells2.append(qrow)
            p_at2.append(row[nq + qi])
            last_int = False
        else:
            if last_int:
                continue
            kinds2.append(INTERVAL)
            qcells2.append(qrow)
            p_at2.append(None)
            last_int = True

    # walk cells, filling p's interval signs and inserting p's roots; row 0
    # of qcells2 is the derivative: constant nonzero sign on interval cells
    s_minus = lc_sign * (1 if d % 2 == 0 else -1)
    s_plus = lc_sign
    out_kinds: list[str] = []
    out_cells: list[list[int]] = []  # rows: [p] + others

    def emit(kind: str, psign: int, qrow: list[int]):
        out_kinds.append(kind)
        out_cells.append([psign] + qrow[1:])

    n2 = len(kinds2)
    for ci in range(n2):
        qrow = qcells2[ci]
        if kinds2[ci] == POINT:
            emit(POINT, p_at2[ci], qrow)  # type: ignore[arg-type]
            continue
        sL = s_minus if ci == 0 else p_at2[ci - 1]
        sR = s_plus if ci == n2 - 1 else p_at2[ci + 1]
        ds = qrow[0]
        if sL == 0 and sR == 0:
            # a strictly monotone segment cannot vanish at both ends: the
            # sign assumptions are contradictory over the reals
            raise _Infeasible
        if sL == 0:
            emit(INTERVAL, ds, qrow)
        elif sR == 0:
            emit(INTERVAL, -ds, qrow)
        elif sL == sR:
            emit(INTERVAL, sL, qrow)
        else:
            emit(INTERVAL, sL, qrow)
            emit(POINT, 0, qrow)
            emit(INTERVAL, sR, qrow)

    # condense away points where neither p nor the others vanish (roots of
    # the dropped derivative row only)
    f_kinds: list[str] = []
    f_cells: list[list[int]] = []
    last_int = False
    for ci, kind in enumerate(out_kinds):
        row = out_cells[ci]
        if kind == POINT:
            if 0 not in row:
                continue
            last_int = False
        else:
            if last_int:
                continue
            last_int = True
        f_kinds.append(kind)
        f_cells.append(row)

    # rows are [p] + others; restore ulive order, then widen to all inputs
    n_ulive = fr["n_ulive"]
    ip = fr["ip"]
    order = [ip] + [i for i in range(n_ulive) if i != ip]
    inv = [order.index(i) for i in range(n_ulive)]
    alias = fr["alias"]
    flat = fr["flat"]
    sel = [inv[alias[i]] if i in alias else -1 for i in range(fr["n_in"])]
    fv = [flat.get(i, 0) for i in range(fr["n_in"])]
    full = [[row[s] if s >= 0 else f for s, f in zip(sel, fv)] for row in f_cells]
    return f_kinds, full


# ---------------------------------------------------------------------------
# Elimination driver
# ---------------------------------------------------------------------------


def _check_atoms(f: Formula):
    for a in subatoms(f):
        if not isinstance(a, (Eq, Lt)):
            raise InputError("subgroup atoms are not part of the ordered-field fragment")


def rcf0_eliminate(f: Formula, simplify_output: bool = True) -> Formula:
    """Equivalent quantifier-free formula over real closed fields."""
    _check_atoms(f)
    if not is_l_formula(f, TheoryMode.RCF):
        raise InputError("input is not in the ordered-field language")
    out = _elim(f)
    return simplify(out) if simplify_output else out


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
        return _elim_exists(f.var, simplify(_elim(f.body)))
    if isinstance(f, Forall):
        return Not(_elim_exists(f.var, simplify(nnf(Not(_elim(f.body))))))
    raise InputError(f"unsupported node: {f!r}")


def _elim_exists(x: str, qf: Formula) -> Formula:
    if x not in free_vars(qf):
        return qf
    from .transform import dnf
    matrix = dnf(qf)
    if isinstance(matrix, Or):
        # the existential distributes over disjuncts, and smaller atom
        # families keep the sign matrices small
        return simplify(disj(_elim_exists_clause(x, cl) for cl in matrix.args))
    return _elim_exists_clause(x, matrix)


def _elim_exists_clause(x: str, qf: Formula) -> Formula:
    if x not in free_vars(qf):
        return qf
    atoms: list = []
    seen: set[int] = set()
    for a in subatoms(qf):
        if id(a) not in seen:
            seen.add(id(a))
            atoms.append(a)
    views = [as_univariate(a.poly, x) for a in atoms]
    row_of = {id(a): i for i, a in enumerate(atoms)}

    work: deque[tuple[Ctx, tuple[Formula, ...]]] = deque([({}, ())])
    branches: list[Formula] = []
    while work:
        ctx, conds = work.popleft()
        try:
            kinds, cells = sign_matrix(ctx, views)
        except _NeedSign as ns:
            q = ns.prim
            for s, cond in ((0, eq0(q)), (1, lt0(q)), (-1, lt0(-q))):
                sub = dict(ctx)
                sub[q] = s
                work.append((sub, conds + (cond,)))
            continue
        except _Infeasible:
            continue
        sat = False
        for ci in range(len(kinds)):
            def val(g: Formula, ci=ci) -> bool:
                a = g.atom  # type: ignore[attr-defined]
                s = cells[ci][row_of[id(a)]]
                return (s == 0) if isinstance(a, Eq) else (s > 0)

            if eval_boolean(qf, val):
                sat = True
                break
        if sat:
            branches.append(simplify(conj(list(conds))))
    return simplify(disj(branches))


def rcf0_decide(sentence: Formula) -> bool:
    """Truth value of a closed ordered-field sentence."""
    out = rcf0_eliminate(sentence)
    if out == TOP:
        return True
    if out == BOT:
        return False
    raise InternalError(f"sentence did not close: {out!r}")


# ---------------------------------------------------------------------------
# Root-order formulas
# ---------------------------------------------------------------------------


def root_order_formula(p: UnivariateView, m: int, u: str = "u",
                       supply: Optional[NameSupply] = None) -> Formula:
    """Quantifier-free ordered-field formula true of u exactly when u is the
    m-th largest real root of p (distinct roots, counted from above)."""
    if m < 1:
        raise InputError("root index must be positive")
    if p.is_zero():
        raise InputError("zero polynomial has no ordered roots")
    supply = supply or NameSupply()
    pu = p.to_polynomial().subst({p.pivot: Polynomial.var(u)})
    if m > p.degree:
        return BOT

    def bigger_roots(count: int) -> Formula:
        if count == 0:
            return TOP
        zs = [supply.fresh("z") for _ in range(count)]
        parts: list[Formula] = []
        for i, z in enumerate(zs):
            parts.append(eq0(p.to_polynomial().subst({p.pivot: Polynomial.var(z)})))
            parts.append(lt0(Polynomial.var(z) - Polynomial.var(u)))
            for z2 in zs[i + 1:]:
                parts.append(neq0(Polynomial.var(z) - Polynomial.var(z2)))
        return exists_many(zs, conj(parts))

    formula = conj([eq0(pu), bigger_roots(m - 1), Not(bigger_roots(m))])
    return rcf0_eliminate(formula)
