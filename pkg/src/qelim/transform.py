"""Normal-form transforms: negation normal form, DNF, CNF, and a best-effort
propositional simplifier.

DNF and CNF treat quantified subformulas as opaque literals; bounded and
unbounded quantifiers are dual under negation.
"""

from __future__ import annotations

from typing import Iterable

from .formula import (
    And, AtomF, BOT, Bot, Exists, ExistsU, Forall, ForallU, Formula, InputError,
    Not, Or, Quant, TOP, conj, disj, negate_nnf_step,
)

_DUAL = {Exists: Forall, Forall: Exists, ExistsU: ForallU, ForallU: ExistsU}


def nnf(f: Formula) -> Formula:
    """Push negations to literals; quantifiers dualize."""
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Bot):
        return TOP if neg else BOT
    if isinstance(f, AtomF):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        parts = [_nnf(a, neg) for a in f.args]
        return disj(parts) if neg else conj(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, neg) for a in f.args]
        return conj(parts) if neg else disj(parts)
    if isinstance(f, Quant):
        cls = _DUAL[type(f)] if neg else type(f)
        body = _nnf(f.body, neg)
        if body == TOP:
            return TOP
        if body == BOT:
            return BOT
        return cls(f.var, body)
    raise InputError(f"unknown node {f!r}")


def _is_literal(f: Formula) -> bool:
    if isinstance(f, (AtomF, Bot, Quant)):
        return True
    if isinstance(f, Not):
        return _is_literal(f.arg)
    return False


def dnf(f: Formula) -> Formula:
    """Disjunction of conjunctions of literals; quantified nodes are literals."""
    f = nnf(f)
    clauses = _dnf_clauses(f)
    return disj(conj(c) for c in clauses)


def _dnf_clauses(f: Formula) -> list[list[Formula]]:
    if f == TOP:
        return [[]]
    if f == BOT:
        return []
    if _is_literal(f):
        return [[f]]
    if isinstance(f, Or):
        out: list[list[Formula]] = []
        for a in f.args:
            out.extend(_dnf_clauses(a))
        return out
    if isinstance(f, And):
        prod: list[list[Formula]] = [[]]
        for a in f.args:
            branch = _dnf_clauses(a)
            prod = [c + d for c in prod for d in branch]
            if not prod:
                return []
        return _prune_clauses(prod)
    raise InputError(f"not in NNF: {f!r}")


def cnf(f: Formula) -> Formula:
    f = nnf(f)
    neg = dnf(nnf(Not(f)))
    # de Morgan back
    return nnf(Not(neg))


def _prune_clauses(clauses: list[list[Formula]]) -> list[list[Formula]]:
    out = []
    for c in clauses:
        dedup: list[Formula] = []
        dead = False
        for lit in c:
            if lit in dedup:
                continue
            if negate_nnf_step(lit) in dedup:
                dead = True
                break
            dedup.append(lit)
        if not dead:
            out.append(dedup)
    return out


def conjuncts(f: Formula) -> list[Formula]:
    if f == TOP:
        return []
    if isinstance(f, And):
        return list(f.args)
    return [f]


def disjuncts(f: Formula) -> list[Formula]:
    if f == BOT:
        return []
    if isinstance(f, Or):
        return list(f.args)
    return [f]


def _fold_atom(f: AtomF) -> Formula:
    from .formula import Eq, Lt, UAtom
    a = f.atom
    if isinstance(a, (Eq, Lt)) and a.poly.is_constant():
        v = a.poly.constant_value()
        ok = (v == 0) if isinstance(a, Eq) else (v > 0)
        return TOP if ok else BOT
    if isinstance(a, UAtom) and a.term.is_constant() and a.term.constant_value() == 1:
        return TOP  # 1 belongs to every group
    return f


def simplify(f: Formula) -> Formula:
    """Constant folding, flattening, duplicate and complementary-literal
    removal, vacuous-quantifier dropping.  Equivalence-preserving and
    idempotent; results are flagged so repeated calls are free."""
    if getattr(f, "_simplified", False):
        return f
    out = _simplify(f)
    object.__setattr__(out, "_simplified", True)
    return out


def _simplify(f: Formula) -> Formula:
    if isinstance(f, Bot):
        return f
    if isinstance(f, AtomF):
        return _fold_atom(f)
    if isinstance(f, Not):
        inner = simplify(f.arg)
        if inner == BOT:
            return TOP
        if isinstance(inner, Not):
            return inner.arg
        return Not(inner)
    if isinstance(f, And):
        parts = [simplify(a) for a in f.args]
        flat: list[Formula] = []
        for p in parts:
            if p == BOT:
                return BOT
            if p == TOP:
                continue
            flat.extend(p.args if isinstance(p, And) else [p])
        seen: set = set()
        out: list[Formula] = []
        for p in flat:
            if negate_nnf_step(p) in seen:
                return BOT
            if p not in seen:
                seen.add(p)
                out.append(p)
        return conj(out)
    if isinstance(f, Or):
        parts = [simplify(a) for a in f.args]
        flat = []
        for p in parts:
            if p == TOP:
                return TOP
            if p == BOT:
                continue
            flat.extend(p.args if isinstance(p, Or) else [p])
        seen = set()
        out = []
        for p in flat:
            if negate_nnf_step(p) in seen:
                return TOP
            if p not in seen:
                seen.add(p)
                out.append(p)
        return disj(out)
    if isinstance(f, Quant):
        body = simplify(f.body)
        if body == TOP:
            return TOP
        if body == BOT:
            return BOT
        from .formula import free_vars
        if f.var not in free_vars(body):
            return body
        return type(f)(f.var, body)
    raise InputError(f"unknown node {f!r}")


def normal_form(f: Formula, mode: str) -> Formula:
    """mode is one of NNF, DNF, CNF."""
    mode = mode.upper()
    if mode == "NNF":
        return nnf(f)
    if mode == "DNF":
        return dnf(f)
    if mode == "CNF":
        return cnf(f)
    raise InputError(f"unknown normal form {mode!r}")


def boolean_atoms(f: Formula) -> list[Formula]:
    """Maximal non-boolean subformulas, in first-seen order."""
    out: list[Formula] = []

    def walk(g: Formula):
        if isinstance(g, (AtomF, Quant)):
            if g not in out:
                out.append(g)
        elif isinstance(g, Not):
            walk(g.arg)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)

    walk(f)
    return out


def eval_boolean(f: Formula, valuation) -> bool:
    """Evaluate treating non-boolean nodes via `valuation` (a callable)."""
    if isinstance(f, Bot):
        return False
    if isinstance(f, Not):
        return not eval_boolean(f.arg, valuation)
    if isinstance(f, And):
        return all(eval_boolean(a, valuation) for a in f.args)
    if isinstance(f, Or):
        return any(eval_boolean(a, valuation) for a in f.args)
    return valuation(f)
