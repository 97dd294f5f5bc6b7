"""Feasibility solving over two backends.

``enumerate``: complete, exact case-split search over mux guard
polarities (and disjunctions), each leaf decided by the rational LP
kernel.  First feasible branch wins, in deterministic depth-first
order with the enable side explored first.

``external``: serialize to SMT-LIB 2 text and run a solver binary as a
subprocess.  The binary is resolved from an explicit command, the
AMNET_SMT_SOLVER environment variable, ``z3``/``cvc5``/``cvc4`` on
PATH, or the bundled ``amnet-smtlib`` fallback, in that order.  Models
are parsed from ``define-fun`` or value-pair output and rechecked
before a Sat verdict is reported.
"""

from __future__ import annotations

import itertools
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .core import Network, evaluate
from .errors import (
    DimError,
    NonlinearUnderEnumerate,
    SolverNotFound,
    SolverParseError,
)
from .formula import (
    And,
    Exists,
    Formula,
    Implies,
    LinAtom,
    Not,
    Or,
    PolyAtom,
    all_vars,
    eval_formula,
    free_vars,
    lin_atom,
    negate,
    negate_atom,
    strip_exists,
    to_nnf,
    vec_names,
)
from .lp import Feasible, Infeasible, LinSystem, Row, feasible
from .mip import MipModel, MipRow
from .rationals import rat_vec
from .smt import EncodingResult, emit_smtlib, encode_smt, has_poly


@dataclass(frozen=True)
class Sat:
    model: dict[str, Fraction]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str


Verdict = Union[Sat, Unsat, Unknown]

DEFAULT_TIMEOUT = 60.0


@dataclass
class Query:
    formula: Union[Formula, MipModel]
    logic: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    backend: str = "auto"  # auto | enumerate | external
    solver_cmd: str | None = None
    stats: dict = field(default_factory=dict)


# ---------------------------------------------------------------- enumerate

_PAIR_CLASS = {
    "<=": ("le", True),
    ">": ("le", False),
    "<": ("lt", True),
    ">=": ("lt", False),
    "=": ("eq", True),
    "!=": ("eq", False),
}


def _atom_key(atom: LinAtom):
    cls, side = _PAIR_CLASS[atom.rel]
    return (atom.coeffs, atom.rhs, cls), side


def _to_lin_rows(atoms: Sequence[LinAtom], var_index: Mapping[str, int]) -> LinSystem:
    rows = []
    n = len(var_index)
    for a in atoms:
        coeffs = [Fraction(0)] * n
        for name, c in a.coeffs:
            coeffs[var_index[name]] += c
        if a.rel in ("<=", "<", "="):
            rows.append(Row(tuple(coeffs), a.rel, a.rhs))
        elif a.rel == ">=":
            rows.append(Row(tuple(-c for c in coeffs), "<=", -a.rhs))
        elif a.rel == ">":
            rows.append(Row(tuple(-c for c in coeffs), "<", -a.rhs))
        else:
            raise NonlinearUnderEnumerate("'!=' atom must be split before LP")
    return LinSystem(tuple(rows), n)


def _enumerate_formula(formula: Formula, stats: dict) -> Verdict:
    if has_poly(formula):
        raise NonlinearUnderEnumerate("enumeration requires a linear query")
    _, matrix = strip_exists(to_nnf(formula))
    names = sorted(all_vars(formula))
    stats.setdefault("patterns", 0)
    stats.setdefault("lp_calls", 0)

    _TRUE, _FALSE = "true", "false"

    def subst(atom: LinAtom, known: dict):
        """Fold known values into an atom; may decide or assign it."""
        if all(n not in known for n, _ in atom.coeffs):
            reduced = atom
        else:
            terms = []
            rhs = atom.rhs
            for n, c in atom.coeffs:
                if n in known:
                    rhs -= c * known[n]
                else:
                    terms.append((n, c))
            reduced = LinAtom(tuple(terms), atom.rel, rhs)
        if not reduced.coeffs:
            lhs = Fraction(0)
            ok = (
                (reduced.rel == "<=" and lhs <= reduced.rhs)
                or (reduced.rel == "<" and lhs < reduced.rhs)
                or (reduced.rel == "=" and lhs == reduced.rhs)
                or (reduced.rel == ">=" and lhs >= reduced.rhs)
                or (reduced.rel == ">" and lhs > reduced.rhs)
                or (reduced.rel == "!=" and lhs != reduced.rhs)
            )
            return _TRUE if ok else _FALSE
        if reduced.rel == "=" and len(reduced.coeffs) == 1:
            (n, c), = reduced.coeffs
            return ("assign", n, reduced.rhs / c)
        return reduced

    def settle(atom: LinAtom, pending: list, known: dict):
        """Assert an atom, propagating assignments to a fixpoint.

        Returns False when a contradiction surfaces; mutates pending
        and known in place (callers pass fresh copies per branch).
        """
        queue = [atom]
        while queue:
            got = subst(queue.pop(), known)
            if got is _FALSE:
                return False
            if got is _TRUE:
                continue
            if isinstance(got, tuple):
                _, name, value = got
                known[name] = value
                undecided = []
                for p in pending:
                    if any(n == name for n, _ in p.coeffs):
                        queue.append(p)
                    else:
                        undecided.append(p)
                pending[:] = undecided
                continue
            pending.append(got)
        return True

    def leaf(pending: list, known: dict):
        stats["patterns"] += 1
        if not pending:
            model = dict(known)
            for n in names:
                model.setdefault(n, Fraction(0))
            return model
        free = sorted({n for a in pending for n, _ in a.coeffs})
        index = {n: i for i, n in enumerate(free)}
        stats["lp_calls"] += 1
        res = feasible(_to_lin_rows(pending, index))
        if not isinstance(res, Feasible):
            return None
        model = dict(known)
        model.update(zip(free, res.point))
        for n in names:
            model.setdefault(n, Fraction(0))
        return model

    def prune(pending: list) -> bool:
        if not pending:
            return False
        free = sorted({n for a in pending for n, _ in a.coeffs})
        index = {n: i for i, n in enumerate(free)}
        stats["lp_calls"] += 1
        return isinstance(feasible(_to_lin_rows(pending, index)), Infeasible)

    def search(items: list, pending: list, known: dict, assume: dict):
        while items:
            f = items.pop()
            if isinstance(f, LinAtom):
                if f.rel == "!=":
                    lo = LinAtom(f.coeffs, "<", f.rhs)
                    hi = LinAtom(f.coeffs, ">", f.rhs)
                    found = search(items + [lo], list(pending), dict(known), dict(assume))
                    if found is not None:
                        return found
                    return search(items + [hi], pending, known, assume)
                key, side = _atom_key(f)
                if assume.get(key, side) != side:
                    return None  # contradicts an assumed polarity
                assume = {**assume, key: side}
                if not settle(f, pending, known):
                    return None
                continue
            if isinstance(f, PolyAtom):
                raise NonlinearUnderEnumerate("enumeration requires a linear query")
            if isinstance(f, And):
                items.extend(reversed(f.children))
                continue
            if isinstance(f, Exists):
                items.append(f.body)
                continue
            if isinstance(f, Not):
                items.append(negate(f.child))
                continue
            if isinstance(f, Implies):
                g = f.lhs
                if isinstance(g, LinAtom) and g.rel != "!=":
                    got = subst(g, known)
                    if got is _TRUE:
                        items.append(f.rhs)
                        continue
                    if got is _FALSE:
                        continue
                    if isinstance(got, tuple):  # an equality antecedent
                        got = LinAtom(g.coeffs, g.rel, g.rhs)
                    key, side = _atom_key(got)
                    if key in assume:
                        if assume[key] == side:
                            items.append(f.rhs)
                        continue
                    if prune(pending):
                        return None
                    taken = search(
                        items + [f.rhs, got], list(pending), dict(known), dict(assume)
                    )
                    if taken is not None:
                        return taken
                    return search(items + [negate_atom(got)], pending, known, assume)
                # non-atomic antecedent: classical split
                found = search(items + [negate(g)], list(pending), dict(known), dict(assume))
                if found is not None:
                    return found
                return search(items + [f.rhs, g], pending, known, assume)
            if isinstance(f, Or):
                if not f.children:
                    return None
                if prune(pending):
                    return None
                for child in f.children[:-1]:
                    found = search(
                        items + [child], list(pending), dict(known), dict(assume)
                    )
                    if found is not None:
                        return found
                return search(items + [f.children[-1]], pending, known, assume)
            raise TypeError(f"unknown formula node {type(f).__name__}")
        return leaf(pending, known)

    model = search([matrix], [], {}, {})
    if model is None:
        return Unsat()
    return Sat(model)


def _enumerate_mip(model: MipModel, stats: dict) -> Verdict:
    names = list(model.real_vars)
    var_index = {n: i for i, n in enumerate(names)}
    n = len(names)
    stats.setdefault("patterns", 0)
    for pattern in itertools.product((0, 1), repeat=len(model.bin_vars)):
        stats["patterns"] += 1
        assign = dict(zip(model.bin_vars, pattern))
        rows = []
        for mrow in model.rows:
            coeffs = [Fraction(0)] * n
            for name, c in mrow.real_terms:
                coeffs[var_index[name]] += c
            rhs = mrow.rhs - sum(
                (c * assign[b] for b, c in mrow.bin_terms), Fraction(0)
            )
            rows.append(Row(tuple(coeffs), mrow.rel, rhs))
        res = feasible(LinSystem(tuple(rows), n))
        if isinstance(res, Feasible):
            out = dict(zip(names, res.point))
            out.update({b: Fraction(v) for b, v in assign.items()})
            return Sat(out)
    return Unsat()


# ---------------------------------------------------------------- external

_FALLBACK_BINARIES = ("z3", "cvc5", "cvc4")


def resolve_solver(solver_cmd: str | None = None) -> list[str]:
    """Command vector for the external solver subprocess."""
    cmd = solver_cmd or os.environ.get("AMNET_SMT_SOLVER")
    if cmd:
        parts = shlex.split(cmd)
        path = shutil.which(parts[0])
        if path is None:
            raise SolverNotFound(f"solver binary {parts[0]!r} not found")
        return [path] + parts[1:]
    for name in _FALLBACK_BINARIES:
        path = shutil.which(name)
        if path is not None:
            return [path]
    # self-contained fallback: the bundled SMT-LIB front end, launched as
    # a plain script (it is stdlib-only, so this skips the package import)
    script = os.path.join(os.path.dirname(os.path.abspath(__file__)), "smtlib_solver.py")
    return [sys.executable, script]


def _sexp_tokens(text: str):
    token = []
    for ch in text:
        if ch in "()":
            if token:
                yield "".join(token)
                token = []
            yield ch
        elif ch.isspace():
            if token:
                yield "".join(token)
                token = []
        else:
            token.append(ch)
    if token:
        yield "".join(token)


def _sexp_read_all(text: str) -> list:
    stack: list[list] = [[]]
    for tok in _sexp_tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverParseError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def _value_to_rat(node) -> Fraction:
    if isinstance(node, str):
        try:
            return Fraction(node)
        except ValueError as exc:
            raise SolverParseError(f"unparseable numeral {node!r}") from exc
    if not node:
        raise SolverParseError("empty value expression")
    head = node[0]
    if head == "-" and len(node) == 2:
        return -_value_to_rat(node[1])
    if head == "-" and len(node) == 3:
        return _value_to_rat(node[1]) - _value_to_rat(node[2])
    if head == "/" and len(node) == 3:
        return _value_to_rat(node[1]) / _value_to_rat(node[2])
    if head == "+":
        return sum((_value_to_rat(v) for v in node[1:]), Fraction(0))
    if head == "*":
        out = Fraction(1)
        for v in node[1:]:
            out *= _value_to_rat(v)
        return out
    if head == "to_real" and len(node) == 2:
        return _value_to_rat(node[1])
    raise SolverParseError(f"unsupported value form {node!r}")


def parse_solver_output(text: str) -> tuple[str, dict[str, Fraction]]:
    """(status, model) from solver stdout; model only parsed after sat."""
    status = None
    rest_lines = []
    for line in text.splitlines():
        word = line.strip()
        if status is None and word in ("sat", "unsat", "unknown"):
            status = word
            continue
        if status is not None:
            rest_lines.append(line)
    if status is None:
        raise SolverParseError(f"no sat/unsat/unknown line in output: {text[:200]!r}")
    model: dict[str, Fraction] = {}
    if status != "sat":
        return status, model
    forest = _sexp_read_all("\n".join(rest_lines))

    def walk(node):
        if not isinstance(node, list):
            return
        if len(node) >= 5 and node[0] == "define-fun" and node[2] == []:
            model[node[1]] = _value_to_rat(node[4])
            return
        if (
            len(node) == 2
            and isinstance(node[0], str)
            and node[0] not in ("model",)
        ):
            try:
                model[node[0]] = _value_to_rat(node[1])
                return
            except SolverParseError:
                pass
        for child in node:
            walk(child)

    for node in forest:
        walk(node)
    return status, model


def _external_solve(q: Query) -> Verdict:
    formula = q.formula
    if isinstance(formula, MipModel):
        raise DimError("external backend takes formula queries, not MIP models")
    logic = q.logic or ("QF_NRA" if has_poly(formula) else "QF_LRA")
    evars, body = strip_exists(formula)
    result = EncodingResult(
        formula=Exists(tuple(evars), body) if evars else body,
        free_in=tuple(sorted(free_vars(formula))),
        free_out=(),
        aux_count=len(evars),
    )
    text = emit_smtlib(result, logic=logic)
    cmd = resolve_solver(q.solver_cmd)
    with tempfile.NamedTemporaryFile(
        "w", suffix=".smt2", delete=False
    ) as handle:
        handle.write(text)
        path = handle.name
    try:
        proc = subprocess.run(
            cmd + [path],
            capture_output=True,
            text=True,
            timeout=q.timeout,
        )
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except FileNotFoundError as exc:
        raise SolverNotFound(str(exc)) from exc
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass
    if not proc.stdout.strip():
        raise SolverParseError(
            f"solver produced no output (exit {proc.returncode}): {proc.stderr[:200]!r}"
        )
    try:
        status, model = parse_solver_output(proc.stdout)
    except SolverParseError:
        raise
    if status == "unknown":
        return Unknown("solver returned unknown")
    if status == "unsat":
        return Unsat()
    missing = all_vars(formula) - set(model)
    if missing:
        return Unknown(f"model omits variables {sorted(missing)[:4]}")
    verdict = Sat(model)
    if not model_recheck(q, model):
        return Unknown("model failed recheck")
    return verdict


# ---------------------------------------------------------------- interface

_AUTO_EXTERNAL_GUARDS = 15


def _count_guards(f: Formula) -> int:
    if isinstance(f, Implies):
        return 1 + _count_guards(f.rhs)
    if isinstance(f, (And, Or)):
        return sum(_count_guards(c) for c in f.children)
    if isinstance(f, (Exists, Not)):
        inner = f.body if isinstance(f, Exists) else f.child
        return _count_guards(inner)
    return 0


def solve(q: Query) -> Verdict:
    """Dispatch a query to a backend and return its verdict."""
    backend = q.backend
    if backend == "auto":
        if isinstance(q.formula, MipModel):
            backend = "enumerate"
        elif has_poly(q.formula):
            backend = "external"
        elif _count_guards(q.formula) > _AUTO_EXTERNAL_GUARDS and _has_external():
            backend = "external"
        else:
            backend = "enumerate"
    q.stats["backend"] = backend
    if backend == "enumerate":
        if isinstance(q.formula, MipModel):
            return _enumerate_mip(q.formula, q.stats)
        return _enumerate_formula(q.formula, q.stats)
    if backend == "external":
        return _external_solve(q)
    raise ValueError(f"unknown backend {q.backend!r}")


def _has_external() -> bool:
    if os.environ.get("AMNET_SMT_SOLVER"):
        return True
    return any(shutil.which(b) for b in _FALLBACK_BINARIES)


def model_recheck(q: Query, model: Mapping[str, Fraction]) -> bool:
    """Substitute a model into every atom of the query.

    Tried exactly first; external solvers may hand back floating point
    decimals, so those get a polarity-aware 1e-6 slack as a fallback.
    """
    backend = q.stats.get("backend", q.backend)
    tol = Fraction(0) if backend == "enumerate" else Fraction(1, 10**6)
    if isinstance(q.formula, MipModel):
        return _recheck_mip(q.formula, model, tol)
    needed = all_vars(q.formula)
    if needed - set(model):
        return False
    if eval_formula(q.formula, model):
        return True
    return tol != 0 and eval_formula(q.formula, model, tol)


def _recheck_mip(model_def: MipModel, model: Mapping[str, Fraction], tol: Fraction) -> bool:
    for b in model_def.bin_vars:
        if model.get(b) not in (Fraction(0), Fraction(1)):
            return False
    for mrow in model_def.rows:
        lhs = sum(
            (c * model[n] for n, c in mrow.real_terms), Fraction(0)
        ) + sum((c * model[b] for b, c in mrow.bin_terms), Fraction(0))
        if mrow.rel == "=" and abs(lhs - mrow.rhs) > tol:
            return False
        if mrow.rel == "<=" and not lhs <= mrow.rhs + tol:
            return False
        if mrow.rel == "<" and not lhs < mrow.rhs + tol:
            return False
    return True


def with_assertions(res: EncodingResult, extra: Sequence[Formula]) -> Formula:
    """Conjoin side atoms under the encoding's existential block."""
    evars, body = strip_exists(res.formula)
    parts = list(body.children) if isinstance(body, And) else [body]
    parts.extend(extra)
    matrix = And(tuple(parts))
    return Exists(tuple(evars), matrix) if evars else matrix


def check_graph_membership(
    net: Network,
    a: Sequence,
    y: Sequence,
    backend: str = "enumerate",
    timeout: float = DEFAULT_TIMEOUT,
    solver_cmd: str | None = None,
) -> Verdict:
    """Sat iff y equals the network value at a (both exact rationals)."""
    av = rat_vec(a)
    yv = rat_vec(y)
    if len(av) != net.input_dim or len(yv) != net.output_dim:
        raise DimError("point dimensions do not match the network")
    res = encode_smt(net)
    pins = [
        lin_atom([(n, 1)], "=", v)
        for n, v in zip(res.free_in, av)
    ] + [
        lin_atom([(n, 1)], "=", v)
        for n, v in zip(res.free_out, yv)
    ]
    q = Query(
        formula=with_assertions(res, pins),
        backend=backend,
        timeout=timeout,
        solver_cmd=solver_cmd,
    )
    return solve(q)
