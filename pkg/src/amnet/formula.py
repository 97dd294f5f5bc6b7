"""First-order arithmetic formula trees.

Atoms are linear (or, for parameter-dual encodings, polynomial)
constraints over named real scalars; the boolean skeleton is And/Or/
Not/Implies with a single outermost Exists for auxiliaries.  Vector
constraints are always expanded to per-component scalar atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .rationals import rat

Rel = str  # one of "<=", "<", "=", ">=", ">", "!="

_FLIP = {"<=": ">", "<": ">=", "=": "!=", ">=": "<", ">": "<=", "!=": "="}


@dataclass(frozen=True)
class RealVar:
    name: str
    dim: int = 1


@dataclass(frozen=True)
class LinAtom:
    """sum(coeff * var) REL rhs, coefficients sorted by variable name."""

    coeffs: tuple[tuple[str, Fraction], ...]
    rel: Rel
    rhs: Fraction


@dataclass(frozen=True)
class PolyAtom:
    """sum(coeff * product(vars)) REL rhs; monomials may have degree >= 2."""

    terms: tuple[tuple[Fraction, tuple[str, ...]], ...]
    rel: Rel
    rhs: Fraction


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Exists:
    vars: tuple[RealVar, ...]
    body: "Formula"


Formula = Union[LinAtom, PolyAtom, And, Or, Not, Implies, Exists]

TRUE = And(())
FALSE = Or(())


def lin_atom(terms: Mapping[str, Fraction] | Iterable[tuple[str, Fraction]],
             rel: Rel, rhs) -> LinAtom:
    """Canonical linear atom: zero coefficients dropped, names sorted."""
    if isinstance(terms, Mapping):
        items = terms.items()
    else:
        items = terms
    merged: dict[str, Fraction] = {}
    for name, c in items:
        c = rat(c)
        if c == 0:
            continue
        merged[name] = merged.get(name, Fraction(0)) + c
    coeffs = tuple(sorted((k, v) for k, v in merged.items() if v != 0))
    if rel not in _FLIP:
        raise ValueError(f"unknown relation {rel!r}")
    return LinAtom(coeffs, rel, rat(rhs))


def poly_atom(terms, rel: Rel, rhs) -> PolyAtom:
    merged: dict[tuple[str, ...], Fraction] = {}
    for coeff, names in terms:
        key = tuple(sorted(names))
        c = merged.get(key, Fraction(0)) + rat(coeff)
        merged[key] = c
    cleaned = tuple(
        (c, k) for k, c in sorted(merged.items()) if c != 0
    )
    if rel not in _FLIP:
        raise ValueError(f"unknown relation {rel!r}")
    return PolyAtom(cleaned, rel, rat(rhs))


def conj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.children)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def negate_atom(atom: LinAtom | PolyAtom) -> LinAtom | PolyAtom:
    """Logical negation, kept in atom normal form (strictness flips)."""
    if isinstance(atom, LinAtom):
        return LinAtom(atom.coeffs, _FLIP[atom.rel], atom.rhs)
    return PolyAtom(atom.terms, _FLIP[atom.rel], atom.rhs)


def negate(f: Formula) -> Formula:
    if isinstance(f, (LinAtom, PolyAtom)):
        return negate_atom(f)
    if isinstance(f, And):
        return Or(tuple(negate(c) for c in f.children))
    if isinstance(f, Or):
        return And(tuple(negate(c) for c in f.children))
    if isinstance(f, Not):
        return f.child
    if isinstance(f, Implies):
        return And((f.lhs, negate(f.rhs)))
    raise TypeError(f"cannot negate {type(f).__name__} under a quantifier")


def to_nnf(f: Formula) -> Formula:
    """Push negations to atoms; Implies stays (solvers treat it natively)."""
    if isinstance(f, (LinAtom, PolyAtom)):
        return f
    if isinstance(f, And):
        return And(tuple(to_nnf(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(to_nnf(c) for c in f.children))
    if isinstance(f, Not):
        return to_nnf(negate(f.child))
    if isinstance(f, Implies):
        return Implies(to_nnf(f.lhs), to_nnf(f.rhs))
    if isinstance(f, Exists):
        return Exists(f.vars, to_nnf(f.body))
    raise TypeError(f"unknown formula node {type(f).__name__}")


def atom_vars(atom: LinAtom | PolyAtom) -> set[str]:
    if isinstance(atom, LinAtom):
        return {name for name, _ in atom.coeffs}
    out: set[str] = set()
    for _, names in atom.terms:
        out.update(names)
    return out


def free_vars(f: Formula) -> set[str]:
    """Variables not bound by an Exists."""
    if isinstance(f, (LinAtom, PolyAtom)):
        return atom_vars(f)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for c in f.children:
            out |= free_vars(c)
        return out
    if isinstance(f, Not):
        return free_vars(f.child)
    if isinstance(f, Implies):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, Exists):
        bound = {v.name for v in f.vars}
        return free_vars(f.body) - bound
    raise TypeError(f"unknown formula node {type(f).__name__}")


def all_vars(f: Formula) -> set[str]:
    if isinstance(f, Exists):
        return {v.name for v in f.vars} | all_vars(f.body)
    if isinstance(f, (LinAtom, PolyAtom)):
        return atom_vars(f)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for c in f.children:
            out |= all_vars(c)
        return out
    if isinstance(f, Not):
        return all_vars(f.child)
    if isinstance(f, Implies):
        return all_vars(f.lhs) | all_vars(f.rhs)
    raise TypeError(f"unknown formula node {type(f).__name__}")


def has_poly(f: Formula) -> bool:
    if isinstance(f, PolyAtom):
        return True
    if isinstance(f, LinAtom):
        return False
    if isinstance(f, (And, Or)):
        return any(has_poly(c) for c in f.children)
    if isinstance(f, Not):
        return has_poly(f.child)
    if isinstance(f, Implies):
        return has_poly(f.lhs) or has_poly(f.rhs)
    if isinstance(f, Exists):
        return has_poly(f.body)
    raise TypeError(f"unknown formula node {type(f).__name__}")


def strip_exists(f: Formula) -> tuple[tuple[RealVar, ...], Formula]:
    """Split the outermost existential block from the matrix."""
    if isinstance(f, Exists):
        inner_vars, body = strip_exists(f.body)
        return f.vars + inner_vars, body
    return (), f


def _cmp(lhs: Fraction, rel: Rel, rhs: Fraction, tol: Fraction) -> bool:
    # a negative tol tightens instead of relaxing (used for atoms in
    # negative positions, where slack must never manufacture truth)
    if rel == "<=":
        return lhs <= rhs + tol
    if rel == "<":
        return lhs < rhs + tol
    if rel == "=":
        return abs(lhs - rhs) <= max(tol, Fraction(0))
    if rel == ">=":
        return lhs >= rhs - tol
    if rel == ">":
        return lhs > rhs - tol
    if rel == "!=":
        return abs(lhs - rhs) > max(-tol, Fraction(0))
    raise ValueError(f"unknown relation {rel!r}")


def eval_atom(atom: LinAtom | PolyAtom, model: Mapping[str, Fraction],
              tol: Fraction = Fraction(0)) -> bool:
    if isinstance(atom, LinAtom):
        lhs = sum((c * model[name] for name, c in atom.coeffs), Fraction(0))
    else:
        lhs = Fraction(0)
        for coeff, names in atom.terms:
            prod = coeff
            for n in names:
                prod *= model[n]
            lhs += prod
    return _cmp(lhs, atom.rel, atom.rhs, tol)


def eval_formula(f: Formula, model: Mapping[str, Fraction],
                 tol: Fraction = Fraction(0), positive: bool = True) -> bool:
    """Evaluate under a total assignment; Exists vars must be in the model.

    A nonzero tolerance relaxes atoms, but only in positive positions;
    under a negation or an implication antecedent the same tolerance
    tightens, so an exactly-true formula always stays true and slack
    can never flip a guard across its boundary.
    """
    if isinstance(f, (LinAtom, PolyAtom)):
        return eval_atom(f, model, tol if positive else -tol)
    if isinstance(f, And):
        return all(eval_formula(c, model, tol, positive) for c in f.children)
    if isinstance(f, Or):
        return any(eval_formula(c, model, tol, positive) for c in f.children)
    if isinstance(f, Not):
        return not eval_formula(f.child, model, tol, not positive)
    if isinstance(f, Implies):
        return (not eval_formula(f.lhs, model, tol, not positive)) or eval_formula(
            f.rhs, model, tol, positive
        )
    if isinstance(f, Exists):
        return eval_formula(f.body, model, tol, positive)
    raise TypeError(f"unknown formula node {type(f).__name__}")


def vec_names(base: str, dim: int) -> list[str]:
    """Scalar component names for a vector variable."""
    if dim == 1:
        return [base]
    return [f"{base}_{i}" for i in range(dim)]
