"""Exact first-order encodings of networks, and SMT-LIB 2 emission.

The encoding walks the graph once (nodes shared between subexpressions
are encoded a single time) and introduces one auxiliary real per scalar
component of every interior node:

* the input node reads the free input names, the output node writes the
  free output names;
* a constant node is inlined wherever it is referenced;
* an affine node yields one equality atom per component;
* a mux node yields the guarded pair
  ``(g <= 0) -> (v = first)`` and ``(g > 0) -> (v = second)``
  (the negated enable is kept in atom form as a strict inequality);
* an input read directly by a mux port goes through a named alias so
  every mux port resolves to a variable or a constant.

The parameter-dual encoding swaps roles: the input is fixed to a value
and every affine weight/bias becomes a free variable, which makes
weight-times-signal products polynomial atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import Affine, Input, Mux, Network, params_of
from .errors import DimError, LogicError
from .formula import (
    And,
    Exists,
    Formula,
    Implies,
    LinAtom,
    Not,
    Or,
    PolyAtom,
    RealVar,
    atom_vars,
    free_vars,
    has_poly,
    lin_atom,
    poly_atom,
    strip_exists,
    vec_names,
)
from .rationals import rat_vec, smt_term


@dataclass(frozen=True)
class EncodingResult:
    formula: Formula
    free_in: tuple[str, ...]
    free_out: tuple[str, ...]
    aux_count: int


# Scalar expressions attached to node components during the walk:
# ("var", name) or ("const", Fraction).
_Var = tuple[str, str]


def _reachable(net: Network) -> set[int]:
    seen = {net.output}
    stack = [net.output]
    while stack:
        node = net.nodes[stack.pop()]
        if isinstance(node, Affine):
            kids = node.children
        elif isinstance(node, Mux):
            kids = (node.first, node.second, node.guard)
        else:
            kids = ()
        for c in kids:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def encode_smt(net: Network, x_name: str = "x", y_name: str = "y",
               aux_prefix: str = "") -> EncodingResult:
    """Encode the graph of ``net`` as a formula over ``x_name``/``y_name``."""
    free_in = tuple(vec_names(x_name, net.input_dim))
    free_out = tuple(vec_names(y_name, net.output_dim))
    reach = _reachable(net)

    exprs: dict[int, list] = {}
    atoms: list[Formula] = []
    aux: list[RealVar] = []
    input_alias: list | None = None

    def new_aux(base: str, dim: int) -> list:
        names = vec_names(f"{aux_prefix}{base}", dim)
        for n in names:
            aux.append(RealVar(n))
        return [("var", n) for n in names]

    def alias_for_input() -> list:
        nonlocal input_alias
        if input_alias is None:
            input_alias = new_aux("u", net.input_dim)
            for (_, name), xn in zip(input_alias, free_in):
                atoms.append(lin_atom([(name, 1), (xn, -1)], "=", 0))
        return input_alias

    def port_expr(nid: int) -> list:
        if nid == net.input_id:
            return alias_for_input()
        return exprs[nid]

    def eq_atoms(lhs: list, rhs: list) -> None:
        for (lk, lv), (rk, rv) in zip(lhs, rhs):
            terms: list[tuple[str, Fraction]] = []
            const = Fraction(0)
            if lk == "var":
                terms.append((lv, Fraction(1)))
            else:
                const -= lv
            if rk == "var":
                terms.append((rv, Fraction(-1)))
            else:
                const += rv
            atoms.append(lin_atom(terms, "=", const))

    # Degenerate shapes first: the output is the input or a constant.
    out_node = net.nodes[net.output]
    if isinstance(out_node, Input):
        body: list[Formula] = [
            lin_atom([(yn, 1), (xn, -1)], "=", 0)
            for yn, xn in zip(free_out, free_in)
        ]
        return EncodingResult(And(tuple(body)), free_in, free_out, 0)

    for idx, nid in enumerate(net.topo):
        if nid not in reach:
            continue
        node = net.nodes[nid]
        if isinstance(node, Input):
            exprs[nid] = [("var", n) for n in free_in]
            continue
        if isinstance(node, Affine):
            if not node.children:
                if nid == net.output:
                    exprs[nid] = [("var", n) for n in free_out]
                    for yn, c in zip(free_out, node.b):
                        atoms.append(lin_atom([(yn, 1)], "=", c))
                else:
                    exprs[nid] = [("const", c) for c in node.b]
                continue
            if nid == net.output:
                mine = [("var", n) for n in free_out]
            else:
                mine = new_aux(f"v{idx}", node.out_dim)
            exprs[nid] = mine
            stacked = []
            for c in node.children:
                stacked.extend(exprs[c])
            for comp, (kind, val) in enumerate(mine):
                terms = [(val, Fraction(1))]
                const = node.b[comp]
                for coeff, (ck, cv) in zip(node.a[comp], stacked):
                    if ck == "var":
                        terms.append((cv, -coeff))
                    else:
                        const += coeff * cv
                atoms.append(lin_atom(terms, "=", const))
            continue
        # mux
        first = port_expr(node.first)
        second = port_expr(node.second)
        guard = port_expr(node.guard)[0]
        if nid == net.output:
            mine = [("var", n) for n in free_out]
        else:
            mine = new_aux(f"v{idx}", net.dims[nid])
        exprs[nid] = mine
        if guard[0] == "const":
            eq_atoms(mine, first if guard[1] <= 0 else second)
            continue
        gname = guard[1]
        for branch, grel in ((first, "<="), (second, ">")):
            eqs: list[Formula] = []
            for (mk, mv), (bk, bv) in zip(mine, branch):
                terms = [(mv, Fraction(1))]
                const = Fraction(0)
                if bk == "var":
                    terms.append((bv, Fraction(-1)))
                else:
                    const = bv
                eqs.append(lin_atom(terms, "=", const))
            body_f: Formula = eqs[0] if len(eqs) == 1 else And(tuple(eqs))
            atoms.append(Implies(lin_atom([(gname, 1)], grel, 0), body_f))

    matrix: Formula = And(tuple(atoms))
    if aux:
        return EncodingResult(Exists(tuple(aux), matrix), free_in, free_out, len(aux))
    return EncodingResult(matrix, free_in, free_out, 0)


def theta_names(net: Network, prefix: str = "th") -> tuple[str, ...]:
    """Free-variable names for every affine parameter, in layout order."""
    return tuple(f"{prefix}{i}" for i in range(len(params_of(net).theta)))


def encode_dual(net: Network, x_value: Sequence, y_name: str = "y",
                theta_prefix: str = "th", aux_prefix: str = "",
                delta_name: str | None = None) -> EncodingResult:
    """Encode with weights/biases free and the input fixed to ``x_value``.

    Free variables are exactly the theta components (layout order, named
    ``<theta_prefix><k>``) plus the output; weight-times-aux products
    become polynomial atoms.  With ``delta_name`` given, the input reads
    ``x_value + delta`` where delta is a free vector variable (used for
    emitting robust-consistency query text).
    """
    xv = rat_vec(x_value)
    if len(xv) != net.input_dim:
        raise DimError(f"x_value has dim {len(xv)}, network expects {net.input_dim}")
    free_out = tuple(vec_names(y_name, net.output_dim))
    reach = _reachable(net)

    # Map each affine node to the theta names of its "a" and "b" blocks.
    names = theta_names(net, theta_prefix)
    a_names: dict[int, list[list[str]]] = {}
    b_names: dict[int, list[str]] = {}
    pos = 0
    for nid, node in enumerate(net.nodes):
        if isinstance(node, Affine):
            cols = len(node.a[0]) if node.a else 0
            rows = len(node.b)
            a_names[nid] = [
                [names[pos + r * cols + c] for c in range(cols)] for r in range(rows)
            ]
            pos += rows * cols
            b_names[nid] = [names[pos + r] for r in range(rows)]
            pos += rows

    # Node component expressions: list of (coeff, monomial) term lists.
    exprs: dict[int, list] = {}
    atoms: list[Formula] = []
    aux: list[RealVar] = []

    def new_aux(base: str, dim: int) -> list:
        out = []
        for n in vec_names(f"{aux_prefix}{base}", dim):
            aux.append(RealVar(n))
            out.append([(Fraction(1), (n,))])
        return out

    def as_atom(var_term, rhs_terms) -> Formula:
        # var - rhs = 0; polynomial if any monomial has degree >= 2
        terms = [var_term] + [(-c, m) for c, m in rhs_terms]
        if any(len(m) > 1 for _, m in terms):
            return poly_atom(terms, "=", 0)
        lin = [(m[0], c) for c, m in terms if len(m) == 1]
        const = sum((-c for c, m in terms if not m), Fraction(0))
        return lin_atom(lin, "=", const)

    delta_names = vec_names(delta_name, net.input_dim) if delta_name else None

    out_node = net.nodes[net.output]
    if isinstance(out_node, Input):
        if delta_names:
            body = [
                lin_atom([(yn, 1), (dn, -1)], "=", v)
                for yn, dn, v in zip(free_out, delta_names, xv)
            ]
        else:
            body = [lin_atom([(yn, 1)], "=", v) for yn, v in zip(free_out, xv)]
        return EncodingResult(And(tuple(body)), (), free_out, 0)

    for idx, nid in enumerate(net.topo):
        if nid not in reach:
            continue
        node = net.nodes[nid]
        if isinstance(node, Input):
            if delta_names:
                exprs[nid] = [
                    [(v, ()), (Fraction(1), (dn,))]
                    for v, dn in zip(xv, delta_names)
                ]
            else:
                exprs[nid] = [[(v, ())] for v in xv]
            continue
        if isinstance(node, Affine):
            if not node.children:
                exprs[nid] = [[(Fraction(1), (bn,))] for bn in b_names[nid]]
                if nid == net.output:
                    for yn, bn in zip(free_out, b_names[nid]):
                        atoms.append(lin_atom([(yn, 1), (bn, -1)], "=", 0))
                    exprs[nid] = [[(Fraction(1), (yn,))] for yn in free_out]
                continue
            stacked = []
            for c in node.children:
                stacked.extend(exprs[c])
            rhs_rows = []
            for r in range(node.out_dim):
                terms = [(Fraction(1), (b_names[nid][r],))]
                for aname, child_terms in zip(a_names[nid][r], stacked):
                    for coeff, mono in child_terms:
                        terms.append((coeff, tuple(sorted(mono + (aname,)))))
                rhs_rows.append(terms)
            if nid == net.output:
                mine = [[(Fraction(1), (yn,))] for yn in free_out]
                for yn, rhs in zip(free_out, rhs_rows):
                    atoms.append(as_atom((Fraction(1), (yn,)), rhs))
            else:
                mine = new_aux(f"v{idx}", node.out_dim)
                for var_terms, rhs in zip(mine, rhs_rows):
                    atoms.append(as_atom(var_terms[0], rhs))
            exprs[nid] = mine
            continue
        # mux: ports are aux vars or constants or theta biases (all degree <= 1)
        first = exprs[node.first]
        second = exprs[node.second]
        guard_terms = exprs[node.guard][0]
        if nid == net.output:
            mine = [[(Fraction(1), (yn,))] for yn in free_out]
        else:
            mine = new_aux(f"v{idx}", net.dims[nid])
        exprs[nid] = mine
        if all(not m for _, m in guard_terms):
            gval = sum((c for c, _ in guard_terms), Fraction(0))
            branch = first if gval <= 0 else second
            for var_terms, rhs in zip(mine, branch):
                atoms.append(as_atom(var_terms[0], rhs))
            continue
        g_lin = [(m[0], c) for c, m in guard_terms if m]
        g_const = sum((-c for c, m in guard_terms if not m), Fraction(0))
        for branch, grel in ((first, "<="), (second, ">")):
            eqs = [
                as_atom(var_terms[0], rhs) for var_terms, rhs in zip(mine, branch)
            ]
            body_f: Formula = eqs[0] if len(eqs) == 1 else And(tuple(eqs))
            atoms.append(Implies(lin_atom(g_lin, grel, g_const), body_f))

    matrix: Formula = And(tuple(atoms))
    used_theta = tuple(n for n in names)
    if aux:
        formula: Formula = Exists(tuple(aux), matrix)
    else:
        formula = matrix
    return EncodingResult(formula, used_theta, free_out, len(aux))


def feasibility_formula(constraints, equalities=(), x_name: str = "x") -> Formula:
    """Conjunction of encodings with output relations against constants.

    ``constraints`` holds (network, relation) or (network, relation, rhs)
    entries; the relation applies to every output component against the
    rhs (default 0).  ``equalities`` holds (network, network) pairs whose
    outputs are equated componentwise.  All networks read the same input.
    """
    nets = [c[0] for c in constraints] + [n for pair in equalities for n in pair]
    if not nets:
        return And(())
    q = nets[0].input_dim
    for n in nets:
        if n.input_dim != q:
            raise DimError("all constraint networks must share the input dimension")

    exists: list[RealVar] = []
    parts: list[Formula] = []

    def absorb(res: EncodingResult) -> None:
        evars, body = strip_exists(res.formula)
        exists.extend(evars)
        if isinstance(body, And):
            parts.extend(body.children)
        else:
            parts.append(body)

    for i, entry in enumerate(constraints):
        net, rel = entry[0], entry[1]
        rhs = entry[2] if len(entry) > 2 else 0
        res = encode_smt(net, x_name=x_name, y_name=f"y{i}", aux_prefix=f"c{i}_")
        absorb(res)
        for yn in res.free_out:
            parts.append(lin_atom([(yn, 1)], rel, rhs))
        exists.extend(RealVar(n) for n in res.free_out)

    for j, (net_a, net_b) in enumerate(equalities):
        if net_a.output_dim != net_b.output_dim:
            raise DimError("equality pair with mismatched output dims")
        res_a = encode_smt(net_a, x_name=x_name, y_name=f"ea{j}", aux_prefix=f"ea{j}_")
        res_b = encode_smt(net_b, x_name=x_name, y_name=f"eb{j}", aux_prefix=f"eb{j}_")
        absorb(res_a)
        absorb(res_b)
        for na, nb in zip(res_a.free_out, res_b.free_out):
            parts.append(lin_atom([(na, 1), (nb, -1)], "=", 0))
        exists.extend(RealVar(n) for n in res_a.free_out)
        exists.extend(RealVar(n) for n in res_b.free_out)

    matrix: Formula = And(tuple(parts))
    if exists:
        return Exists(tuple(exists), matrix)
    return matrix


def _term_sexp(coeff: Fraction, names: tuple[str, ...]) -> str:
    factors = list(names)
    if coeff == 1 and factors:
        return factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")"
    parts = [smt_term(coeff)] + factors
    return "(* " + " ".join(parts) + ")" if len(parts) > 1 else parts[0]


def _sum_sexp(terms: list[str]) -> str:
    if not terms:
        return "0.0"
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


_REL_SEXP = {"<=": "<=", "<": "<", "=": "=", ">=": ">=", ">": ">"}


def formula_sexp(f: Formula) -> str:
    """SMT-LIB 2 term for a formula (quantifier-free part)."""
    if isinstance(f, LinAtom):
        lhs = _sum_sexp([_term_sexp(c, (n,)) for n, c in f.coeffs])
        rhs = smt_term(f.rhs)
        if f.rel == "!=":
            return f"(or (< {lhs} {rhs}) (> {lhs} {rhs}))"
        return f"({_REL_SEXP[f.rel]} {lhs} {rhs})"
    if isinstance(f, PolyAtom):
        lhs = _sum_sexp([_term_sexp(c, m) for c, m in f.terms])
        rhs = smt_term(f.rhs)
        if f.rel == "!=":
            return f"(or (< {lhs} {rhs}) (> {lhs} {rhs}))"
        return f"({_REL_SEXP[f.rel]} {lhs} {rhs})"
    if isinstance(f, And):
        if not f.children:
            return "true"
        if len(f.children) == 1:
            return formula_sexp(f.children[0])
        return "(and " + " ".join(formula_sexp(c) for c in f.children) + ")"
    if isinstance(f, Or):
        if not f.children:
            return "false"
        if len(f.children) == 1:
            return formula_sexp(f.children[0])
        return "(or " + " ".join(formula_sexp(c) for c in f.children) + ")"
    if isinstance(f, Not):
        return "(not " + formula_sexp(f.child) + ")"
    if isinstance(f, Implies):
        return f"(=> {formula_sexp(f.lhs)} {formula_sexp(f.rhs)})"
    if isinstance(f, Exists):
        binders = " ".join(f"({v.name} Real)" for v in f.vars)
        return f"(exists ({binders}) {formula_sexp(f.body)})"
    raise TypeError(f"unknown formula node {type(f).__name__}")


def emit_smtlib(result: EncodingResult, logic: str = "QF_LRA",
                extra_assertions: Sequence[Formula] = ()) -> str:
    """Solver-input text for an encoding plus side constraints.

    All quantifiers in our encodings are outermost existentials, so they
    lower to top-level declarations.  Every rational is printed as an
    exact integer or quotient term.  Output is deterministic.
    """
    if logic not in ("QF_LRA", "QF_NRA"):
        raise LogicError(f"unsupported logic {logic!r}")
    if logic == "QF_LRA":
        if has_poly(result.formula) or any(has_poly(e) for e in extra_assertions):
            raise LogicError("polynomial atoms require QF_NRA")

    evars, body = strip_exists(result.formula)
    declared: list[str] = []
    seen: set[str] = set()
    for name in (*result.free_in, *result.free_out, *(v.name for v in evars)):
        if name not in seen:
            declared.append(name)
            seen.add(name)
    extra_names = sorted(
        {n for e in extra_assertions for n in free_vars(e)} - seen
    )
    declared.extend(extra_names)

    lines = ["(set-option :produce-models true)", f"(set-logic {logic})"]
    lines.extend(f"(declare-fun {n} () Real)" for n in declared)
    conjuncts = body.children if isinstance(body, And) else (body,)
    lines.extend(f"(assert {formula_sexp(c)})" for c in conjuncts)
    lines.extend(f"(assert {formula_sexp(e)})" for e in extra_assertions)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
