"""Case-split calculus: controlled formulas.

A controlled formula is a finite family of cases.  Each case j carries a
positive guard eta+ with an existentially U-bound witness tuple, a negative
guard eta- with a universally U-bound tuple, and a body psi.  The family
denotes

    OR_j [ existsU y_j (eta+_j and psi_j) ] and [ forallU y'_j eta-_j ]

under the contract that the guards form a partition of cases (exactly one j
fires for each parameter tuple) and each body is rigid (its truth does not
depend on the witness choice).  Rigidity is trusted, recorded as provenance,
and spot-checked semantically by the test oracles.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .classify import TheoryMode
from .formula import (
    And, BOT, Formula, InternalError, NameSupply, Not, TOP, conj, disj,
    exists_u_many, forall_u_many, free_vars, negate_nnf_step, rename_vars,
)
from .transform import simplify


class BodyTag(enum.Enum):
    SPLIT = "split"
    PERMITTED = "permitted"
    UNRESTRICTED = "unrestricted"


@dataclass(frozen=True)
class Case:
    id: int
    eplus_vars: tuple[str, ...]
    eplus: Formula
    eminus_vars: tuple[str, ...]
    eminus: Formula
    body: Formula
    tag: BodyTag = BodyTag.UNRESTRICTED
    provenance: str = ""

    def condition(self) -> Formula:
        """The firing condition: existsU y+ eta+  and  forallU y- eta-."""
        return conj([exists_u_many(self.eplus_vars, self.eplus),
                     forall_u_many(self.eminus_vars, self.eminus)])

    def rename_witnesses(self, supply: NameSupply) -> "Case":
        mapping = {v: supply.fresh(v) for v in self.eplus_vars + self.eminus_vars}
        if not mapping:
            return self
        return replace(
            self,
            eplus_vars=tuple(mapping[v] for v in self.eplus_vars),
            eplus=rename_vars(self.eplus, mapping, supply),
            eminus_vars=tuple(mapping[v] for v in self.eminus_vars),
            eminus=rename_vars(self.eminus, mapping, supply),
            body=rename_vars(self.body, mapping, supply),
        )


@dataclass(frozen=True)
class ControlledFormula:
    cases: tuple[Case, ...]
    mode: TheoryMode

    def __post_init__(self):
        if not self.cases:
            raise InternalError("controlled formula with no cases")
        ids = [c.id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise InternalError("duplicate case ids")

    def __len__(self):
        return len(self.cases)


def trivial(body: Formula, mode: TheoryMode, tag: BodyTag = BodyTag.UNRESTRICTED,
            provenance: str = "trivial") -> ControlledFormula:
    """Single always-on case with the given body."""
    return ControlledFormula(
        (Case(0, (), TOP, (), TOP, body, tag, provenance),), mode)


def expand(c: ControlledFormula) -> Formula:
    return disj(_expand_case(case) for case in c.cases)


def _expand_case(case: Case) -> Formula:
    pos = exists_u_many(case.eplus_vars, conj([case.eplus, case.body]))
    neg = forall_u_many(case.eminus_vars, case.eminus)
    return conj([pos, neg])


def negate(c: ControlledFormula) -> ControlledFormula:
    """Same partition, bodies negated; sound because exactly one case fires."""
    return ControlledFormula(
        tuple(replace(k, body=simplify(negate_nnf_step(k.body)),
                      provenance=f"not({k.provenance})" if k.provenance else "not")
              for k in c.cases),
        c.mode)


def conjoin(a: ControlledFormula, b: ControlledFormula,
            supply: Optional[NameSupply] = None,
            combine_bodies: Callable[[Formula, Formula], Formula] | None = None,
            ) -> ControlledFormula:
    """Product family over pairs of cases, guards and bodies conjoined."""
    if a.mode is not b.mode:
        raise InternalError("theory mode mismatch in conjunction")
    supply = supply or NameSupply()
    plain = combine_bodies is None
    combine = combine_bodies or (lambda x, y: conj([x, y]))
    out: list[Case] = []
    n = 0
    renamed_b = [kb.rename_witnesses(supply) for kb in b.cases]
    for ka in a.cases:
        if plain and simplify(ka.body) == BOT:
            # the conjunction is false on this whole region, and the other
            # family's conditions are exhaustive, so the region needs no
            # sub-split: sum over the partner cases gives back ka itself
            out.append(replace(ka, id=n))
            n += 1
            continue
        for kb2 in renamed_b:
            clash = set(ka.eplus_vars + ka.eminus_vars) & set(kb2.eplus_vars + kb2.eminus_vars)
            if clash:
                raise InternalError(f"witness clash after renaming: {clash}")
            out.append(Case(
                n,
                ka.eplus_vars + kb2.eplus_vars,
                simplify(conj([ka.eplus, kb2.eplus])),
                ka.eminus_vars + kb2.eminus_vars,
                simplify(conj([ka.eminus, kb2.eminus])),
                simplify(combine(ka.body, kb2.body)),
                ka.tag if ka.tag is kb2.tag else BodyTag.UNRESTRICTED,
                f"({ka.provenance})*({kb2.provenance})",
            ))
            n += 1
    return prune(ControlledFormula(tuple(out), a.mode))


def conjoin_many(cs: Sequence[ControlledFormula], supply: Optional[NameSupply] = None) -> ControlledFormula:
    if not cs:
        raise InternalError("empty conjunction of controlled formulas")
    work = list(cs)
    while len(work) > 1:  # balanced fold keeps intermediate guards small
        nxt = [conjoin(work[i], work[i + 1], supply) if i + 1 < len(work) else work[i]
               for i in range(0, len(work), 2)]
        work = nxt
    return work[0]


def disjoin(a: ControlledFormula, b: ControlledFormula,
            supply: Optional[NameSupply] = None) -> ControlledFormula:
    """not(not a and not b): product cases with disjoined bodies."""
    return negate(conjoin(negate(a), negate(b), supply))


def disjoin_many(cs: Sequence[ControlledFormula], supply: Optional[NameSupply] = None) -> ControlledFormula:
    if not cs:
        raise InternalError("empty disjunction of controlled formulas")
    work = sorted(cs, key=len)
    while len(work) > 1:
        nxt = [disjoin(work[i], work[i + 1], supply) if i + 1 < len(work) else work[i]
               for i in range(0, len(work), 2)]
        work = sorted(nxt, key=len)
    return work[0]


def map_bodies(c: ControlledFormula, fn: Callable[[Case], Formula],
               tag: Optional[BodyTag] = None) -> ControlledFormula:
    return ControlledFormula(
        tuple(replace(k, body=simplify(fn(k)), tag=tag or k.tag) for k in c.cases),
        c.mode)


def _canon_key(vars_: tuple[str, ...], f: Formula) -> tuple:
    """Rename the witness tuple to positional placeholders so syntactically
    identical guards that differ only in witness names compare equal."""
    mapping = {v: f"c%{i}" for i, v in enumerate(vars_)}
    return (len(vars_), rename_vars(f, mapping))


def prune(c: ControlledFormula) -> ControlledFormula:
    """Drop cases whose positive guard is propositionally absurd (a bottom
    guard never fires), and merge cases that share a body and a negative
    guard: the union of such cases is again expressible in case shape,
    since exists y (e1 or e2) and forall y' em  <=>  the disjunction of the
    two original firing conditions.  Keeps at least one case."""
    groups: dict = {}
    order: list = []
    seen_alpha: set = set()
    for k in c.cases:
        if simplify(k.eplus) == BOT:
            continue
        tup = k.eplus_vars + k.eminus_vars
        mapping = {v: f"c%{i}" for i, v in enumerate(tup)}
        alpha = (len(k.eplus_vars), len(k.eminus_vars),
                 rename_vars(simplify(k.eplus), mapping),
                 rename_vars(simplify(k.eminus), mapping),
                 rename_vars(simplify(k.body), mapping), k.tag)
        if alpha in seen_alpha:
            # an alpha-equivalent case fires on exactly the same region; in
            # a partition such twins are only possible on an empty region
            continue
        seen_alpha.add(alpha)
        key = (simplify(k.body), _canon_key(k.eminus_vars, simplify(k.eminus)), k.tag)
        if key not in groups:
            groups[key] = [k]
            order.append(key)
        else:
            groups[key].append(k)
    kept: list[Case] = []
    for key in order:
        members = groups[key]
        if len(members) == 1:
            kept.append(members[0])
            continue
        rep = members[0]
        eplus_vars: tuple[str, ...] = ()
        parts = []
        seen_parts: set = set()
        leftovers: list[Case] = []
        for m in members:
            sig = _canon_key(m.eplus_vars, simplify(m.eplus))
            if sig in seen_parts:
                continue
            if set(m.eplus_vars) & set(eplus_vars):
                leftovers.append(m)  # shared witness names; keep separate
                continue
            seen_parts.add(sig)
            eplus_vars += m.eplus_vars
            parts.append(m.eplus)
        kept.append(Case(0, eplus_vars, simplify(disj(parts)),
                         rep.eminus_vars, rep.eminus, rep.body, rep.tag,
                         f"merge[{len(members)}]({rep.provenance})"))
        kept.extend(leftovers)
    if not kept:
        # every guard was absurd: the formula is vacuously never-firing;
        # keep a canonical dead case so downstream structure survives
        kept = [Case(0, (), BOT, (), TOP, BOT, c.cases[0].tag, "pruned")]
    renum = [replace(k, id=i) for i, k in enumerate(kept)]
    return ControlledFormula(tuple(renum), c.mode)


# ---------------------------------------------------------------------------
# First-possible-case composition
# ---------------------------------------------------------------------------


def compose_first_case(outer: ControlledFormula,
                       refinements: Mapping[int, ControlledFormula],
                       supply: Optional[NameSupply] = None) -> ControlledFormula:
    """Refine every outer case j by a controlled family over J_j.

    Witness choices for the outer guard may select different refinement
    cases, so the product guard alone is not a partition.  Cases are indexed
    by (j, m, j') where m counts, among the other refinement cases, how many
    are NOT ruled out by a witnessed refutation of their negative guard; the
    pair (m, j') is chosen lexicographically least, i.e. refutation-richest
    first.  The positive guard asserts the witnessed case j' plus the
    |J_j|-1-m witnessed refutations; the negative guard asserts that every
    lexicographically earlier pair fails.
    """
    supply = supply or NameSupply()
    if set(refinements) != {k.id for k in outer.cases}:
        raise InternalError("refinement family does not match outer case ids")
    for r in refinements.values():
        if not r.cases:
            raise InternalError("empty refinement family")
    out: list[Case] = []
    n = 0
    for kj in outer.cases:
        ref = refinements[kj.id]
        inner = [k.rename_witnesses(supply) for k in ref.cases]
        size = len(inner)
        outer_wits = set(kj.eplus_vars) | set(kj.eminus_vars)
        independent = size == 1 or all(
            not ((free_vars(k.eplus) | free_vars(k.eminus)) & outer_wits)
            for k in inner)
        if independent:
            # refinement selection cannot vary with the outer witnesses, so
            # the plain product of guards is already a partition
            for kjp in inner:
                out.append(Case(
                    n, kj.eplus_vars + kjp.eplus_vars,
                    simplify(conj([kj.eplus, kjp.eplus])),
                    kj.eminus_vars + kjp.eminus_vars,
                    simplify(conj([kj.eminus, kjp.eminus])),
                    simplify(conj([kj.body, kjp.body])),
                    kjp.tag, f"compose({kj.provenance};{kjp.provenance})"))
                n += 1
            continue
        # positive-guard payloads for each (m, j'), built once; theta- of a
        # later pair quotes the earlier theta+ over fresh variables
        payloads: list[tuple[tuple[str, ...], Formula, Case]] = []
        for m in range(size):
            refuted = size - 1 - m
            for kjp in inner:
                others = [k for k in inner if k.id != kjp.id]
                refl: list[Formula] = []
                ref_vars: list[str] = []
                if refuted > 0:
                    options = []
                    for combo in itertools.combinations(others, refuted):
                        parts = []
                        for k2 in combo:
                            k2r = k2.rename_witnesses(supply)
                            ref_vars.extend(k2r.eminus_vars)
                            parts.append(negate_nnf_step(k2r.eminus))
                        options.append(conj(parts))
                    refl.append(disj(options))
                theta_plus = simplify(conj([kj.eplus, kjp.eplus] + refl))
                vars_plus = kj.eplus_vars + kjp.eplus_vars + tuple(ref_vars)
                payloads.append((vars_plus, theta_plus, kjp))
        for idx, (vars_plus, theta_plus, kjp) in enumerate(payloads):
            minus_vars: list[str] = list(kj.eminus_vars) + list(kjp.eminus_vars)
            minus_parts: list[Formula] = [kj.eminus, kjp.eminus]
            for pvars, ptheta, _ in payloads[:idx]:
                mapping = {v: supply.fresh(v) for v in pvars}
                minus_vars.extend(mapping[v] for v in pvars)
                minus_parts.append(negate_nnf_step(rename_vars(ptheta, mapping, supply)))
            theta_minus = simplify(conj(minus_parts))
            body = simplify(conj([kj.body, kjp.body]))
            out.append(Case(n, tuple(vars_plus), theta_plus, tuple(minus_vars),
                            theta_minus, body,
                            kjp.tag, f"compose({kj.provenance};{kjp.provenance})"))
            n += 1
    return prune(ControlledFormula(tuple(out), outer.mode))


def check_variable_discipline(c: ControlledFormula, guard_only: Iterable[str],
                              body_only: Iterable[str]) -> list[str]:
    """Return violation descriptions: guard variables leaking into bodies or
    body-side variables leaking into guards."""
    guard_only = set(guard_only)
    body_only = set(body_only)
    problems = []
    for k in c.cases:
        witness = set(k.eplus_vars) | set(k.eminus_vars)
        bv = free_vars(k.body)
        gv = free_vars(k.eplus) | free_vars(k.eminus)
        leak_b = (bv & guard_only) - witness
        leak_g = (gv & body_only) - witness
        if leak_b:
            problems.append(f"case {k.id}: guard-side vars {sorted(leak_b)} in body")
        if leak_g:
            problems.append(f"case {k.id}: body-side vars {sorted(leak_g)} in guard")
    return problems
