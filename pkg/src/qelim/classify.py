"""Syntactic recognizers for the formula classes the elimination pipelines
produce and consume: field-language formulas, subgroup-language formulas,
split formulas, the target existential shape, and the ordered-field layers
(guarded, root, permitted).

Every recognizer is a single AST traversal.  Recognizers are parameterized
by the theory mode and, for the ordered theory, by the subgroup basis that
decides which rational coefficients count as group constants.
"""

from __future__ import annotations

import enum
from fractions import Fraction
from typing import Optional, Sequence

from .formula import (
    And, AtomF, Bot, Eq, Exists, ExistsU, Forall, ForallU, Formula, InputError,
    Lt, Not, Or, Quant, SigmaAtom, UAtom, free_vars,
)
from .group import GroupBasis
from .poly import Polynomial


class TheoryMode(enum.Enum):
    ACF = "acf"
    RCF = "rcf"


class FormulaClass(enum.Enum):
    L_FORMULA = "LFormula"
    U_FORMULA = "UFormula"
    SPLIT_FORMULA = "SplitFormula"
    KG_FORMULA = "KGFormula"
    GUARDED_FORMULA = "GuardedFormula"
    ROOT_FORMULA = "RootFormula"
    PERMITTED_FORMULA = "PermittedFormula"


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, Quant):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    return True


def _group_coeff(c: Fraction, basis: Optional[GroupBasis]) -> bool:
    c = abs(c)
    if basis is None:
        return c == 1
    return c == 1 or basis.contains(c)


def is_group_monomial_poly(p: Polynomial, basis: Optional[GroupBasis]) -> bool:
    """p is s - t for multiplicative-language terms s, t (one may be absent
    only when both coincide, i.e. p == 0)."""
    if p.is_zero():
        return True
    terms = list(p.terms.items())
    if len(terms) != 2:
        return False
    (m1, c1), (m2, c2) = terms
    if (c1 > 0) == (c2 > 0):
        return False
    return _group_coeff(c1, basis) and _group_coeff(c2, basis)


def is_monomial_term(p: Polynomial, basis: Optional[GroupBasis]) -> bool:
    """Single product of variables and group constants, positive sign."""
    if len(p.terms) != 1:
        return False
    ((_, c),) = p.terms.items()
    return c > 0 and _group_coeff(c, basis)


# ---------------------------------------------------------------------------
# Field-language formulas
# ---------------------------------------------------------------------------


def is_l_formula(f: Formula, mode: TheoryMode, quantifier_free: bool = False) -> bool:
    if isinstance(f, Bot):
        return True
    if isinstance(f, AtomF):
        if isinstance(f.atom, Eq):
            return True
        if isinstance(f.atom, Lt):
            return mode is TheoryMode.RCF
        return False
    if isinstance(f, Not):
        return is_l_formula(f.arg, mode, quantifier_free)
    if isinstance(f, (And, Or)):
        return all(is_l_formula(a, mode, quantifier_free) for a in f.args)
    if isinstance(f, (Exists, Forall)):
        return not quantifier_free and is_l_formula(f.body, mode, quantifier_free)
    return False


# ---------------------------------------------------------------------------
# Subgroup-language formulas
# ---------------------------------------------------------------------------


def is_u_formula(f: Formula, mode: TheoryMode, basis: Optional[GroupBasis] = None) -> bool:
    if isinstance(f, Bot):
        return True
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, SigmaAtom):
            return all(is_monomial_term(t, basis) for t in a.args)
        if isinstance(a, Eq):
            return is_group_monomial_poly(a.poly, basis)
        if isinstance(a, Lt):
            return mode is TheoryMode.RCF and is_group_monomial_poly(a.poly, basis)
        return False
    if isinstance(f, Not):
        return is_u_formula(f.arg, mode, basis)
    if isinstance(f, (And, Or)):
        return all(is_u_formula(a, mode, basis) for a in f.args)
    if isinstance(f, (ExistsU, ForallU)):
        return is_u_formula(f.body, mode, basis)
    return False


# ---------------------------------------------------------------------------
# Split formulas
# ---------------------------------------------------------------------------


def is_split_formula(f: Formula, y_side: frozenset[str] | set[str],
                     mode: TheoryMode, basis: Optional[GroupBasis] = None) -> bool:
    """Boolean combination of U-formulas over y_side and field-language
    formulas over arbitrary variables."""
    y_side = frozenset(y_side)
    if isinstance(f, Not):
        return is_split_formula(f.arg, y_side, mode, basis)
    if isinstance(f, (And, Or)):
        return all(is_split_formula(a, y_side, mode, basis) for a in f.args)
    if is_l_formula(f, mode):
        return True
    return is_u_formula(f, mode, basis) and free_vars(f) <= y_side


# ---------------------------------------------------------------------------
# The existential target shape
# ---------------------------------------------------------------------------


def _strip_exists_u(f: Formula) -> tuple[list[str], Formula]:
    vs: list[str] = []
    while isinstance(f, ExistsU):
        vs.append(f.var)
        f = f.body
    return vs, f


def is_kg_formula(f: Formula, mode: TheoryMode, basis: Optional[GroupBasis] = None) -> bool:
    """exists^U y1..yk (theta(y) and psi(x, y)) with theta a U-formula over
    the bound variables and psi a quantifier-free field-language formula."""
    ys, matrix = _strip_exists_u(f)
    yset = frozenset(ys)
    parts = matrix.args if isinstance(matrix, And) else (matrix,)
    for part in parts:
        if is_l_formula(part, mode, quantifier_free=True):
            continue
        if is_u_formula(part, mode, basis) and free_vars(part) <= yset:
            continue
        return False
    return True


def is_kg_boolean(f: Formula, mode: TheoryMode, basis: Optional[GroupBasis] = None) -> bool:
    if isinstance(f, Not):
        return is_kg_boolean(f.arg, mode, basis)
    if isinstance(f, (And, Or)):
        return all(is_kg_boolean(a, mode, basis) for a in f.args)
    return is_kg_formula(f, mode, basis)


def kg_boolean_offender(f: Formula, mode: TheoryMode,
                        basis: Optional[GroupBasis] = None) -> Optional[Formula]:
    """The first leaf failing the Boolean-combination-of-KG grammar, if any."""
    if isinstance(f, Not):
        return kg_boolean_offender(f.arg, mode, basis)
    if isinstance(f, (And, Or)):
        for a in f.args:
            off = kg_boolean_offender(a, mode, basis)
            if off is not None:
                return off
        return None
    return None if is_kg_formula(f, mode, basis) else f


# ---------------------------------------------------------------------------
# Ordered-theory layers: guarded / root / permitted
# ---------------------------------------------------------------------------


def is_guarded_formula(f: Formula) -> bool:
    """exists^U u phi' with phi' a Boolean combination of (in)equalities."""
    if not isinstance(f, ExistsU):
        return False
    return is_l_formula(f.body, TheoryMode.RCF, quantifier_free=True)


def root_formula_parts(f: Formula, basis: Optional[GroupBasis] = None):
    """(u, n, lead, tail) if f is exists^U u (t_n*u^n + t_0 == 0) with
    monomial-term coefficients, else None."""
    if not isinstance(f, ExistsU) or not isinstance(f.body, AtomF):
        return None
    atom = f.body.atom
    if not isinstance(atom, Eq):
        return None
    u = f.var
    from .poly import as_univariate
    view = as_univariate(atom.poly, u)
    if view.degree < 1:
        return None
    support = [i for i in range(view.degree + 1) if not view.coeff(i).is_zero()]
    if support != [0, view.degree]:
        return None
    lead, tail = view.coeff(view.degree), view.coeff(0)
    for c in (lead, tail):
        if len(c.terms) != 1:
            return None
        ((_, k),) = c.terms.items()
        if not _group_coeff(k, basis):
            return None
    return u, view.degree, lead, tail


def is_root_formula(f: Formula, basis: Optional[GroupBasis] = None) -> bool:
    return root_formula_parts(f, basis) is not None


def is_neg_root_formula(f: Formula, basis: Optional[GroupBasis] = None) -> bool:
    if isinstance(f, Not):
        return is_root_formula(f.arg, basis)
    if isinstance(f, ForallU):
        body = f.body
        if isinstance(body, Not) and isinstance(body.arg, AtomF):
            return is_root_formula(ExistsU(f.var, body.arg), basis)
    return False


def is_permitted_formula(f: Formula, basis: Optional[GroupBasis] = None) -> bool:
    """Boolean combination of ordered-field atoms and root formulas."""
    if isinstance(f, Bot):
        return True
    if isinstance(f, AtomF):
        return isinstance(f.atom, (Eq, Lt))
    if isinstance(f, Not):
        return is_permitted_formula(f.arg, basis)
    if isinstance(f, (And, Or)):
        return all(is_permitted_formula(a, basis) for a in f.args)
    if is_root_formula(f, basis):
        return True
    if is_neg_root_formula(f, basis):
        return True
    return False


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def classify(f: Formula, mode: TheoryMode, basis: Optional[GroupBasis] = None,
             partition: Optional[Sequence[str]] = None) -> set[FormulaClass]:
    """All classes whose grammar f satisfies.  `partition` names the
    subgroup-side variables for the split-formula check and must consist of
    variables free in f."""
    out: set[FormulaClass] = set()
    if is_l_formula(f, mode):
        out.add(FormulaClass.L_FORMULA)
    if is_u_formula(f, mode, basis):
        out.add(FormulaClass.U_FORMULA)
    if partition is not None:
        fv = free_vars(f)
        bad = [v for v in partition if v not in fv]
        if bad:
            raise InputError(f"partition variables not free in formula: {bad}")
        if is_split_formula(f, frozenset(partition), mode, basis):
            out.add(FormulaClass.SPLIT_FORMULA)
    if is_kg_formula(f, mode, basis):
        out.add(FormulaClass.KG_FORMULA)
    if mode is TheoryMode.RCF:
        if is_guarded_formula(f):
            out.add(FormulaClass.GUARDED_FORMULA)
        if is_root_formula(f, basis):
            out.add(FormulaClass.ROOT_FORMULA)
        if is_permitted_formula(f, basis):
            out.add(FormulaClass.PERMITTED_FORMULA)
    return out
