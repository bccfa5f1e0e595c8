"""S-expression parser and printers (s-expression, JSON, TeX) for formulas
and case-split families.

Grammar (everything case-sensitive):

    formula := true | false
             | (not F) | (and F ...) | (or F ...)
             | (implies F G) | (iff F G)
             | (exists VARS F) | (forall VARS F)
             | (existsU VARS F) | (forallU VARS F)
             | (eq TERM) | (lt TERM) | (neq TERM)
             | (U TERM) | (sigma (INT ...) (TERM ...))
    VARS    := name | (name ...)
    term    := name | (var name) | RATIONAL
             | (poly TERM) | (+ TERM ...) | (* TERM ...)
             | (- TERM TERM ...) | (- TERM) | (^ TERM NAT)
             | (mono ((name NAT) ...))

(eq t) means t == 0 and (lt t) means 0 < t.  Printing is canonical and
parse(print(f)) == f holds for every formula.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

from .classify import TheoryMode
from .controlled import BodyTag, Case, ControlledFormula
from .formula import (
    And, AtomF, BOT, Bot, Eq, Exists, ExistsU, Forall, ForallU, Formula,
    InputError, Lt, Not, Or, Quant, SigmaAtom, TOP, UAtom, conj, disj,
    negate_nnf_step,
)
from .poly import Monomial, Polynomial

SCHEMA = "qelim/1"


class ParseError(InputError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Tokenizer / reader
# ---------------------------------------------------------------------------


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokens(text: str) -> Iterator[_Tok]:
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield _Tok(ch, line, col)
            col += 1
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield _Tok(text[i:j], line, col)
            col += j - i
            i = j


SExpr = Union[str, list]


def read_sexprs(text: str) -> list[SExpr]:
    toks = list(_tokens(text))
    out: list[SExpr] = []
    pos = 0

    def parse() -> SExpr:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input", 0, 0)
        t = toks[pos]
        pos += 1
        if t.text == "(":
            items: list[SExpr] = []
            while True:
                if pos >= len(toks):
                    raise ParseError("unclosed parenthesis", t.line, t.col)
                if toks[pos].text == ")":
                    pos += 1
                    return items
                items.append(parse())
        if t.text == ")":
            raise ParseError("unexpected ')'", t.line, t.col)
        return t.text

    while pos < len(toks):
        tok0 = toks[pos]
        expr = parse()
        if isinstance(expr, str) and expr in ("(", ")"):
            raise ParseError("stray token", tok0.line, tok0.col)
        out.append(expr)
    return out


def _rational(tok: str) -> Optional[Fraction]:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


def term_of_sexpr(e: SExpr) -> Polynomial:
    if isinstance(e, str):
        q = _rational(e)
        if q is not None:
            return Polynomial.const(q)
        _check_name(e)
        return Polynomial.var(e)
    if not e:
        raise InputError("empty term")
    head = e[0]
    if head == "var":
        if len(e) != 2 or not isinstance(e[1], str):
            raise InputError("(var name) expects one name")
        _check_name(e[1])
        return Polynomial.var(e[1])
    if head == "poly":
        if len(e) != 2:
            raise InputError("(poly term) expects one term")
        return term_of_sexpr(e[1])
    if head == "+":
        out = Polynomial()
        for a in e[1:]:
            out = out + term_of_sexpr(a)
        return out
    if head == "*":
        out = Polynomial.const(1)
        for a in e[1:]:
            out = out * term_of_sexpr(a)
        return out
    if head == "-":
        if len(e) == 2:
            return -term_of_sexpr(e[1])
        if len(e) < 3:
            raise InputError("(- ...) expects at least one argument")
        out = term_of_sexpr(e[1])
        for a in e[2:]:
            out = out - term_of_sexpr(a)
        return out
    if head == "^":
        if len(e) != 3 or not isinstance(e[2], str) or not e[2].lstrip("-").isdigit():
            raise InputError("(^ term k) expects a term and an integer")
        k = int(e[2])
        if k < 0:
            raise InputError("negative exponent")
        return term_of_sexpr(e[1]) ** k
    if head == "mono":
        if len(e) != 2 or not isinstance(e[1], list):
            raise InputError("(mono ((x k) ...)) expects a pair list")
        exps = {}
        for pair in e[1]:
            if (not isinstance(pair, list) or len(pair) != 2
                    or not isinstance(pair[0], str) or not isinstance(pair[1], str)):
                raise InputError("(mono ...) pairs must be (name exponent)")
            _check_name(pair[0])
            exps[pair[0]] = exps.get(pair[0], 0) + int(pair[1])
        return Polynomial.from_monomial(Monomial(exps))
    raise InputError(f"unknown term head {head!r}")


def _check_name(s: str) -> None:
    if not s or s[0].isdigit() or _rational(s) is not None or s in ("(", ")"):
        raise InputError(f"bad variable name {s!r}")


def sexpr_of_term(p: Polynomial) -> SExpr:
    terms = p.sorted_terms()
    if not terms:
        return "0"
    parts: list[SExpr] = []
    for m, c in terms:
        factors: list[SExpr] = []
        if c != 1 or m.is_one():
            factors.append(str(c))
        for v, e in m.exps:
            factors.append(["var", v] if e == 1 else ["^", ["var", v], str(e)])
        if len(factors) == 1:
            parts.append(factors[0])
        else:
            parts.append(["*"] + factors)
    if len(parts) == 1:
        return parts[0]
    return ["+"] + parts


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

_QUANT_HEADS = {"exists": Exists, "forall": Forall, "existsU": ExistsU, "forallU": ForallU}


def formula_of_sexpr(e: SExpr) -> Formula:
    if isinstance(e, str):
        if e == "true":
            return TOP
        if e == "false":
            return BOT
        raise InputError(f"unknown formula symbol {e!r}")
    if not e:
        raise InputError("empty formula")
    head = e[0]
    if not isinstance(head, str):
        raise InputError("formula head must be a symbol")
    if head == "not":
        if len(e) != 2:
            raise InputError("(not F) expects one argument")
        return negate_nnf_step(formula_of_sexpr(e[1]))
    if head == "and":
        return conj(formula_of_sexpr(a) for a in e[1:])
    if head == "or":
        return disj(formula_of_sexpr(a) for a in e[1:])
    if head == "implies":
        if len(e) != 3:
            raise InputError("(implies F G) expects two arguments")
        a, b = formula_of_sexpr(e[1]), formula_of_sexpr(e[2])
        return disj([negate_nnf_step(a), b])
    if head == "iff":
        if len(e) != 3:
            raise InputError("(iff F G) expects two arguments")
        a, b = formula_of_sexpr(e[1]), formula_of_sexpr(e[2])
        return conj([disj([negate_nnf_step(a), b]), disj([negate_nnf_step(b), a])])
    if head in _QUANT_HEADS:
        if len(e) != 3:
            raise InputError(f"({head} vars F) expects two arguments")
        vs = e[1]
        if isinstance(vs, str):
            vs = [vs]
        if not vs or not all(isinstance(v, str) for v in vs):
            raise InputError("quantifier variables must be names")
        for v in vs:
            _check_name(v)
        body = formula_of_sexpr(e[2])
        cls = _QUANT_HEADS[head]
        for v in reversed(vs):
            body = cls(v, body)
        return body
    if head == "eq":
        if len(e) != 2:
            raise InputError("(eq term) expects one term")
        return AtomF(Eq.of(term_of_sexpr(e[1])))
    if head == "neq":
        if len(e) != 2:
            raise InputError("(neq term) expects one term")
        return Not(AtomF(Eq.of(term_of_sexpr(e[1]))))
    if head == "lt":
        if len(e) != 2:
            raise InputError("(lt term) expects one term")
        return AtomF(Lt.of(term_of_sexpr(e[1])))
    if head == "U":
        if len(e) != 2:
            raise InputError("(U term) expects one term")
        return AtomF(UAtom(term_of_sexpr(e[1])))
    if head == "sigma":
        if len(e) != 3 or not isinstance(e[1], list) or not isinstance(e[2], list):
            raise InputError("(sigma (k ...) (term ...)) expects two lists")
        coeffs = []
        for kk in e[1]:
            if not isinstance(kk, str) or not kk.lstrip("-").isdigit():
                raise InputError("sigma coefficients must be integers")
            coeffs.append(int(kk))
        args = [term_of_sexpr(t) for t in e[2]]
        if len(coeffs) != len(args):
            raise InputError(
                f"sigma arity mismatch: {len(coeffs)} coefficients, {len(args)} terms")
        return AtomF(SigmaAtom(tuple(coeffs), tuple(args)))
    raise InputError(f"unknown formula head {head!r}")


def sexpr_of_formula(f: Formula) -> SExpr:
    if f == TOP:
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return ["eq", ["poly", sexpr_of_term(a.poly)]]
        if isinstance(a, Lt):
            return ["lt", ["poly", sexpr_of_term(a.poly)]]
        if isinstance(a, UAtom):
            return ["U", sexpr_of_term(a.term)]
        if isinstance(a, SigmaAtom):
            return ["sigma", [str(k) for k in a.coeffs],
                    [sexpr_of_term(t) for t in a.args]]
        raise InputError(f"unknown atom {a!r}")
    if isinstance(f, Not):
        return ["not", sexpr_of_formula(f.arg)]
    if isinstance(f, And):
        return ["and"] + [sexpr_of_formula(a) for a in f.args]
    if isinstance(f, Or):
        return ["or"] + [sexpr_of_formula(a) for a in f.args]
    if isinstance(f, Quant):
        head = {Exists: "exists", Forall: "forall",
                ExistsU: "existsU", ForallU: "forallU"}[type(f)]
        vs = [f.var]
        body = f.body
        while isinstance(body, type(f)) and type(body) is type(f):
            vs.append(body.var)
            body = body.body
        return [head, vs, sexpr_of_formula(body)]
    raise InputError(f"unknown node {f!r}")


def render_sexpr(e: SExpr) -> str:
    if isinstance(e, str):
        return e
    return "(" + " ".join(render_sexpr(a) for a in e) + ")"


def parse(text: str) -> Formula:
    exprs = read_sexprs(text)
    if len(exprs) != 1:
        raise InputError(f"expected one formula, found {len(exprs)}")
    return formula_of_sexpr(exprs[0])


def parse_many(text: str) -> list[Formula]:
    return [formula_of_sexpr(e) for e in read_sexprs(text)]


# ---------------------------------------------------------------------------
# Case-split families
# ---------------------------------------------------------------------------


def sexpr_of_controlled(c: ControlledFormula) -> SExpr:
    out: list[SExpr] = ["cases", ["mode", c.mode.value]]
    for k in c.cases:
        out.append(["case", ["id", str(k.id)],
                    ["eplus", list(k.eplus_vars), sexpr_of_formula(k.eplus)],
                    ["eminus", list(k.eminus_vars), sexpr_of_formula(k.eminus)],
                    ["body", sexpr_of_formula(k.body)],
                    ["tag", k.tag.value]])
    return out


def controlled_of_sexpr(e: SExpr) -> ControlledFormula:
    if not isinstance(e, list) or not e or e[0] != "cases":
        raise InputError("expected a (cases ...) form")
    mode = TheoryMode.ACF
    cases: list[Case] = []
    for item in e[1:]:
        if not isinstance(item, list) or not item:
            raise InputError("bad cases item")
        if item[0] == "mode":
            mode = TheoryMode(item[1])
            continue
        if item[0] != "case":
            raise InputError(f"unknown cases item {item[0]!r}")
        fields = {it[0]: it for it in item[1:]}
        cid = int(fields["id"][1])
        epv, ep = fields["eplus"][1], formula_of_sexpr(fields["eplus"][2])
        emv, em = fields["eminus"][1], formula_of_sexpr(fields["eminus"][2])
        body = formula_of_sexpr(fields["body"][1])
        tag = BodyTag(fields["tag"][1]) if "tag" in fields else BodyTag.UNRESTRICTED
        cases.append(Case(cid, tuple(epv), ep, tuple(emv), em, body, tag))
    return ControlledFormula(tuple(cases), mode)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def json_of_formula(f: Formula) -> dict:
    return {"schema": SCHEMA, "formula": _json_node(f)}


def _json_node(f: Formula) -> dict:
    if isinstance(f, Bot):
        return {"op": "false"}
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return {"op": "eq", "poly": _json_poly(a.poly)}
        if isinstance(a, Lt):
            return {"op": "lt", "poly": _json_poly(a.poly)}
        if isinstance(a, UAtom):
            return {"op": "U", "term": _json_poly(a.term)}
        if isinstance(a, SigmaAtom):
            return {"op": "sigma", "coeffs": list(a.coeffs),
                    "args": [_json_poly(t) for t in a.args]}
        raise InputError(f"unknown atom {a!r}")
    if isinstance(f, Not):
        return {"op": "not", "arg": _json_node(f.arg)}
    if isinstance(f, (And, Or)):
        return {"op": "and" if isinstance(f, And) else "or",
                "args": [_json_node(a) for a in f.args]}
    if isinstance(f, Quant):
        op = {Exists: "exists", Forall: "forall",
              ExistsU: "existsU", ForallU: "forallU"}[type(f)]
        return {"op": op, "var": f.var, "body": _json_node(f.body)}
    raise InputError(f"unknown node {f!r}")


def _json_poly(p: Polynomial) -> list:
    return [[str(c), {v: e for v, e in m.exps}] for m, c in p.sorted_terms()]


def formula_of_json(doc: dict) -> Formula:
    if doc.get("schema") != SCHEMA:
        raise InputError(f"unsupported schema {doc.get('schema')!r}")
    return _node_of_json(doc["formula"])


def _node_of_json(d: dict) -> Formula:
    op = d["op"]
    if op == "false":
        return BOT
    if op == "eq":
        return AtomF(Eq.of(_poly_of_json(d["poly"])))
    if op == "lt":
        return AtomF(Lt.of(_poly_of_json(d["poly"])))
    if op == "U":
        return AtomF(UAtom(_poly_of_json(d["term"])))
    if op == "sigma":
        return AtomF(SigmaAtom(tuple(d["coeffs"]),
                               tuple(_poly_of_json(t) for t in d["args"])))
    if op == "not":
        return negate_nnf_step(_node_of_json(d["arg"]))
    if op in ("and", "or"):
        build = conj if op == "and" else disj
        return build(_node_of_json(a) for a in d["args"])
    if op in ("exists", "forall", "existsU", "forallU"):
        cls = {"exists": Exists, "forall": Forall,
               "existsU": ExistsU, "forallU": ForallU}[op]
        return cls(d["var"], _node_of_json(d["body"]))
    raise InputError(f"unknown op {op!r}")


def _poly_of_json(terms: list) -> Polynomial:
    out = Polynomial()
    for c, exps in terms:
        out = out + Polynomial.from_monomial(Monomial(dict(exps)), Fraction(c))
    return out


def json_of_controlled(c: ControlledFormula) -> dict:
    return {
        "schema": SCHEMA,
        "mode": c.mode.value,
        "cases": [{
            "id": k.id,
            "eplus_vars": list(k.eplus_vars), "eplus": _json_node(k.eplus),
            "eminus_vars": list(k.eminus_vars), "eminus": _json_node(k.eminus),
            "body": _json_node(k.body), "tag": k.tag.value,
        } for k in c.cases],
    }


# ---------------------------------------------------------------------------
# TeX (output only)
# ---------------------------------------------------------------------------


def tex_of_formula(f: Formula) -> str:
    if f == TOP:
        return r"\top"
    if isinstance(f, Bot):
        return r"\bot"
    if isinstance(f, AtomF):
        a = f.atom
        if isinstance(a, Eq):
            return f"{_tex_poly(a.poly)} = 0"
        if isinstance(a, Lt):
            return f"0 < {_tex_poly(a.poly)}"
        if isinstance(a, UAtom):
            return f"U({_tex_poly(a.term)})"
        if isinstance(a, SigmaAtom):
            ks = ",".join(str(k) for k in a.coeffs)
            args = ", ".join(_tex_poly(t) for t in a.args)
            return rf"\Sigma_{{({ks})}}({args})"
    if isinstance(f, Not):
        return rf"\neg {_tex_wrap(f.arg)}"
    if isinstance(f, And):
        return r" \wedge ".join(_tex_wrap(a) for a in f.args)
    if isinstance(f, Or):
        return r" \vee ".join(_tex_wrap(a) for a in f.args)
    if isinstance(f, Quant):
        sym = {Exists: r"\exists", Forall: r"\forall",
               ExistsU: r"\exists^{U}", ForallU: r"\forall^{U}"}[type(f)]
        return rf"{sym} {_tex_name(f.var)}\, {_tex_wrap(f.body)}"
    raise InputError(f"unknown node {f!r}")


def _tex_wrap(f: Formula) -> str:
    s = tex_of_formula(f)
    if isinstance(f, (And, Or)) or isinstance(f, Quant):
        return f"({s})"
    return s


def _tex_name(v: str) -> str:
    return v.replace("%", r"_{") + ("}" if "%" in v else "")


def _tex_poly(p: Polynomial) -> str:
    s = repr(p)
    return s.replace("%", r"\_")


def tex_of_controlled(c: ControlledFormula) -> str:
    rows = []
    for k in c.cases:
        ep = tex_of_formula(k.eplus)
        em = tex_of_formula(k.eminus)
        body = tex_of_formula(k.body)
        rows.append(rf"\eta^{{+}}_{{{k.id}}}\colon {ep};\ \eta^{{-}}_{{{k.id}}}\colon {em}"
                    rf" \rightarrow {body}")
    inner = r" \\ ".join(rows)
    return rf"\bigoplus_{{j \in J}} \left[ {inner} \right]"


# ---------------------------------------------------------------------------
# Unified printer
# ---------------------------------------------------------------------------


def print_formula(obj, fmt: str = "sexpr") -> str:
    """Render a formula or a case family in the requested format."""
    is_controlled = isinstance(obj, ControlledFormula)
    if fmt == "sexpr":
        return render_sexpr(sexpr_of_controlled(obj) if is_controlled
                            else sexpr_of_formula(obj))
    if fmt == "json":
        return json.dumps(json_of_controlled(obj) if is_controlled
                          else json_of_formula(obj), sort_keys=True)
    if fmt == "tex":
        return tex_of_controlled(obj) if is_controlled else tex_of_formula(obj)
    raise InputError(f"unknown format {fmt!r}")
