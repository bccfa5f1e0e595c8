"""Formula AST for the ring language, its ordered extension, and the group
extensions with the U predicate, additive-relation atoms, and quantifiers
bounded to U.

Truth is the derived constant not(false); the 0-ary connective false is the
only primitive constant.  Bounded quantifiers are primitive nodes so the
formula-class recognizers can stay purely syntactic.
"""

from __future__ import annotations

import itertools
import os
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .poly import Monomial, Polynomial, poly_sum


class InputError(ValueError):
    """Rejected input: malformed formula, partition, or configuration."""


class InternalError(RuntimeError):
    """A structural guarantee of the pipeline was violated."""


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    pass


@dataclass(frozen=True)
class Eq(Atom):
    """poly == 0, with the polynomial sign/content-normalized."""

    poly: Polynomial

    @staticmethod
    def of(p: Polynomial) -> "Eq":
        return Eq(p.primitive())


@dataclass(frozen=True)
class Lt(Atom):
    """0 < poly (ordered fields only); normalized by positive scaling."""

    poly: Polynomial

    @staticmethod
    def of(p: Polynomial) -> "Lt":
        if p.is_zero():
            return Lt(p)
        c = p.content()
        return Lt(p.scale(1 / c))


@dataclass(frozen=True)
class UAtom(Atom):
    """Membership of a term value in the distinguished subgroup."""

    term: Polynomial


@dataclass(frozen=True)
class SigmaAtom(Atom):
    """k1*t1 + ... + kn*tn == 0 with every ti in the subgroup."""

    coeffs: tuple[int, ...]
    args: tuple[Polynomial, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.args):
            raise InputError("sigma arity mismatch")


# ---------------------------------------------------------------------------
# Formula nodes
# ---------------------------------------------------------------------------


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class AtomF(Formula):
    atom: Atom


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __init__(self, args: Iterable[Formula]):
        object.__setattr__(self, "args", tuple(args))


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __init__(self, args: Iterable[Formula]):
        object.__setattr__(self, "args", tuple(args))


@dataclass(frozen=True)
class Quant(Formula):
    var: str
    body: Formula


class Exists(Quant):
    pass


class Forall(Quant):
    pass


class ExistsU(Quant):
    pass


class ForallU(Quant):
    pass


def _install_cached_hash(*classes):
    for cls in classes:
        gen = cls.__hash__

        def h(self, _gen=gen):
            v = self.__dict__.get("_h")
            if v is None:
                v = _gen(self)
                object.__setattr__(self, "_h", v)
            return v

        cls.__hash__ = h


_install_cached_hash(Eq, Lt, UAtom, SigmaAtom, Bot, AtomF, Not, And, Or, Quant)

BOT = Bot()
TOP = Not(BOT)


def eq0(p: Polynomial) -> Formula:
    if p.is_zero():
        return TOP
    if p.is_constant():
        return BOT
    return AtomF(Eq.of(p))


def lt0(p: Polynomial) -> Formula:
    """0 < p as a formula, folding constants."""
    if p.is_constant():
        return TOP if p.constant_value() > 0 else BOT
    return AtomF(Lt.of(p))


def neq0(p: Polynomial) -> Formula:
    f = eq0(p)
    return negate_nnf_step(f)


def u_atom(t: Polynomial) -> Formula:
    return AtomF(UAtom(t))


def sigma_atom(coeffs: Sequence[int], args: Sequence[Polynomial]) -> Formula:
    return AtomF(SigmaAtom(tuple(coeffs), tuple(args)))


def conj(args: Iterable[Formula]) -> Formula:
    out = []
    for a in args:
        if a == TOP:
            continue
        if a == BOT:
            return BOT
        if isinstance(a, And):
            out.extend(a.args)
        else:
            out.append(a)
    seen = []
    for a in out:
        if a not in seen:
            seen.append(a)
    if not seen:
        return TOP
    if len(seen) == 1:
        return seen[0]
    return And(seen)


def disj(args: Iterable[Formula]) -> Formula:
    out = []
    for a in args:
        if a == BOT:
            continue
        if a == TOP:
            return TOP
        if isinstance(a, Or):
            out.extend(a.args)
        else:
            out.append(a)
    seen = []
    for a in out:
        if a not in seen:
            seen.append(a)
    if not seen:
        return BOT
    if len(seen) == 1:
        return seen[0]
    return Or(seen)


def negate_nnf_step(f: Formula) -> Formula:
    """not(f) with double negations folded (single step, not full NNF)."""
    if f == TOP:
        return BOT
    if f == BOT:
        return TOP
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj([negate_nnf_step(a), b])


def exists_many(vars_: Sequence[str], body: Formula, cls: type = Exists) -> Formula:
    for v in reversed(vars_):
        body = cls(v, body)
    return body


def exists_u_many(vars_: Sequence[str], body: Formula) -> Formula:
    return exists_many(vars_, body, ExistsU)


def forall_u_many(vars_: Sequence[str], body: Formula) -> Formula:
    return exists_many(vars_, body, ForallU)


# ---------------------------------------------------------------------------
# Traversals
# ---------------------------------------------------------------------------


def atom_polynomials(a: Atom) -> list[Polynomial]:
    if isinstance(a, (Eq, Lt)):
        return [a.poly]
    if isinstance(a, UAtom):
        return [a.term]
    if isinstance(a, SigmaAtom):
        return list(a.args)
    raise InternalError(f"unknown atom {a!r}")


def free_vars(f: Formula) -> frozenset[str]:
    cached = getattr(f, "_fv", None)
    if cached is not None:
        return cached
    if isinstance(f, Bot):
        out = frozenset()
    elif isinstance(f, AtomF):
        acc: set[str] = set()
        for p in atom_polynomials(f.atom):
            acc.update(p.variables())
        out = frozenset(acc)
    elif isinstance(f, Not):
        out = free_vars(f.arg)
    elif isinstance(f, (And, Or)):
        acc = set()
        for a in f.args:
            acc.update(free_vars(a))
        out = frozenset(acc)
    elif isinstance(f, Quant):
        out = free_vars(f.body) - {f.var}
    else:
        raise InternalError(f"unknown node {f!r}")
    object.__setattr__(f, "_fv", out)
    return out


def bound_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, (Bot, AtomF)):
        return frozenset()
    if isinstance(f, Not):
        return bound_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out.update(bound_vars(a))
        return frozenset(out)
    if isinstance(f, Quant):
        return bound_vars(f.body) | {f.var}
    raise InternalError(f"unknown node {f!r}")


def map_atoms(f: Formula, fn: Callable[[Atom], Formula]) -> Formula:
    if isinstance(f, Bot):
        return f
    if isinstance(f, AtomF):
        return fn(f.atom)
    if isinstance(f, Not):
        return negate_nnf_step(map_atoms(f.arg, fn))
    if isinstance(f, And):
        return conj(map_atoms(a, fn) for a in f.args)
    if isinstance(f, Or):
        return disj(map_atoms(a, fn) for a in f.args)
    if isinstance(f, Quant):
        body = map_atoms(f.body, fn)
        return simplify_quant(type(f), f.var, body)
    raise InternalError(f"unknown node {f!r}")


def simplify_quant(cls: type, var: str, body: Formula) -> Formula:
    if var not in free_vars(body):
        # the subgroup is nonempty and the field is infinite, so the
        # quantifier is vacuous either way
        return body
    return cls(var, body)


def subatoms(f: Formula) -> Iterable[Atom]:
    if isinstance(f, AtomF):
        yield f.atom
    elif isinstance(f, Not):
        yield from subatoms(f.arg)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from subatoms(a)
    elif isinstance(f, Quant):
        yield from subatoms(f.body)


def substitute(f: Formula, sigma: Mapping[str, Polynomial],
               supply: Optional["NameSupply"] = None) -> Formula:
    """Capture-avoiding substitution; polynomial atoms are re-normalized."""
    sigma = {v: p for v, p in sigma.items() if p != Polynomial.var(v)}
    if not sigma:
        return f
    return _subst(f, sigma, supply or NameSupply())


def _subst(f: Formula, sigma: Mapping[str, Polynomial], supply: "NameSupply") -> Formula:
    if isinstance(f, Bot):
        return f
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return eq0(a.poly.subst(sigma))
        if isinstance(a, Lt):
            return lt0(a.poly.subst(sigma))
        if isinstance(a, UAtom):
            return AtomF(UAtom(a.term.subst(sigma)))
        if isinstance(a, SigmaAtom):
            return AtomF(SigmaAtom(a.coeffs, tuple(p.subst(sigma) for p in a.args)))
        raise InternalError(f"unknown atom {a!r}")
    if isinstance(f, Not):
        return negate_nnf_step(_subst(f.arg, sigma, supply))
    if isinstance(f, And):
        return conj(_subst(a, sigma, supply) for a in f.args)
    if isinstance(f, Or):
        return disj(_subst(a, sigma, supply) for a in f.args)
    if isinstance(f, Quant):
        inner = {v: p for v, p in sigma.items() if v != f.var}
        if not inner:
            return f
        used = set().union(*(p.variables() for p in inner.values()))
        var, body = f.var, f.body
        if var in used:
            fresh = supply.fresh(var)
            body = _subst(body, {var: Polynomial.var(fresh)}, supply)
            var = fresh
        return simplify_quant(type(f), var, _subst(body, inner, supply))
    raise InternalError(f"unknown node {f!r}")


def rename_vars(f: Formula, mapping: Mapping[str, str], supply: Optional["NameSupply"] = None) -> Formula:
    """Variable-to-variable renaming.  When every target is a fresh name
    that occurs nowhere in f, a direct structural rename avoids the general
    capture-avoiding machinery."""
    mapping = {v: w for v, w in mapping.items() if v != w}
    if not mapping:
        return f
    targets = set(mapping.values())
    if len(targets) == len(mapping) and not (targets & (free_vars(f) | bound_vars(f))):
        return _rename_fast(f, dict(mapping))
    return substitute(f, {v: Polynomial.var(w) for v, w in mapping.items()}, supply)


def _rename_fast(f: Formula, mapping: dict) -> Formula:
    if isinstance(f, Bot):
        return f
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return AtomF(Eq(a.poly.rename(mapping)))
        if isinstance(a, Lt):
            return AtomF(Lt(a.poly.rename(mapping)))
        if isinstance(a, UAtom):
            return AtomF(UAtom(a.term.rename(mapping)))
        if isinstance(a, SigmaAtom):
            return AtomF(SigmaAtom(a.coeffs, tuple(p.rename(mapping) for p in a.args)))
        raise InternalError(f"unknown atom {a!r}")
    if isinstance(f, Not):
        return Not(_rename_fast(f.arg, mapping))
    if isinstance(f, And):
        return And(tuple(_rename_fast(a, mapping) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(_rename_fast(a, mapping) for a in f.args))
    if isinstance(f, Quant):
        inner = {v: w for v, w in mapping.items() if v != f.var}
        return type(f)(f.var, _rename_fast(f.body, inner) if inner else f.body)
    raise InternalError(f"unknown node {f!r}")


# ---------------------------------------------------------------------------
# Fresh-name supply
# ---------------------------------------------------------------------------


class NameSupply:
    """Monotone fresh-name source; deterministic for a fixed starting seed."""

    SEP = "%"

    def __init__(self, seed: Optional[int] = None):
        if seed is None:
            seed = int(os.environ.get("QELIM_SEED", "0"))
        self._counter = itertools.count(seed)
        self._lock = threading.Lock()

    def fresh(self, base: str = "y") -> str:
        base = base.split(self.SEP, 1)[0]
        with self._lock:
            n = next(self._counter)
        return f"{base}{self.SEP}{n}"

    def fresh_tuple(self, base: str, n: int) -> tuple[str, ...]:
        return tuple(self.fresh(base) for _ in range(n))


# ---------------------------------------------------------------------------
# Convenience term builders used across the pipeline and tests
# ---------------------------------------------------------------------------


def var(name: str) -> Polynomial:
    return Polynomial.var(name)


def const(c) -> Polynomial:
    return Polynomial.const(Fraction(c))


def linear_combination(coeffs: Sequence[int], terms: Sequence[Polynomial]) -> Polynomial:
    return poly_sum(t.scale(k) for k, t in zip(coeffs, terms))


def monomial_of(p: Polynomial) -> Optional[tuple[Fraction, Monomial]]:
    """The (coefficient, monomial) pair if p is a single term, else None."""
    if len(p.terms) != 1:
        return None
    return p.single_term()
