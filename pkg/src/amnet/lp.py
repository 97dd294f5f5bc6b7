"""Exact rational linear feasibility and optimization.

Dense two-phase simplex over Fraction with Bland's rule, so no
tolerances and no cycling.  Strict inequalities are decided exactly by
maximizing a shared slack: a system with strict rows is feasible iff
the slack optimum is positive, and the witness then satisfies every
strict row strictly.

Problem sizes here are tiny (tens of variables), so the implementation
favors clarity: reduced costs are recomputed from the tableau each
pivot.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .rationals import rat

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class Row:
    coeffs: tuple[Fraction, ...]
    rel: str  # "<=", "<", "="
    rhs: Fraction


@dataclass(frozen=True)
class LinSystem:
    rows: tuple[Row, ...]
    var_count: int
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        for r in self.rows:
            if len(r.coeffs) != self.var_count:
                raise ValueError("row width differs from var_count")
            if r.rel not in ("<=", "<", "="):
                raise ValueError(f"unsupported row relation {r.rel!r}")


def row(coeffs: Sequence, rel: str, rhs) -> Row:
    return Row(tuple(rat(c) for c in coeffs), rel, rat(rhs))


@dataclass(frozen=True)
class Feasible:
    point: tuple[Fraction, ...]


@dataclass(frozen=True)
class Infeasible:
    pass


@dataclass(frozen=True)
class Optimal:
    value: Fraction
    point: tuple[Fraction, ...]


@dataclass(frozen=True)
class Unbounded:
    pass


def satisfies(sys: LinSystem, point: Sequence[Fraction]) -> bool:
    """Exact row-by-row recheck, strict rows strictly."""
    for r in sys.rows:
        lhs = sum((c * x for c, x in zip(r.coeffs, point)), _ZERO)
        if r.rel == "<=" and not lhs <= r.rhs:
            return False
        if r.rel == "<" and not lhs < r.rhs:
            return False
        if r.rel == "=" and lhs != r.rhs:
            return False
    return True


def _pivot(tab: list[list[Fraction]], basis: list[int], obj: list[Fraction],
           prow: int, pcol: int) -> None:
    piv = tab[prow][pcol]
    tab[prow] = [v / piv for v in tab[prow]]
    prow_vals = tab[prow]
    for i, trow in enumerate(tab):
        if i != prow and trow[pcol] != 0:
            f = trow[pcol]
            tab[i] = [v - f * p for v, p in zip(trow, prow_vals)]
    if obj[pcol] != 0:
        f = obj[pcol]
        obj[:] = [v - f * p for v, p in zip(obj, prow_vals)]
    basis[prow] = pcol


def _reduced_costs(tab, basis, costs) -> list[Fraction]:
    """Objective row [r_0,...,r_{n-1}, -value]; homogeneous under pivots."""
    obj = list(costs) + [_ZERO]
    for i, b in enumerate(basis):
        cb = costs[b]
        if cb != 0:
            trow = tab[i]
            obj[:] = [v - cb * t for v, t in zip(obj, trow)]
    return obj


def _optimize(tab: list[list[Fraction]], basis: list[int],
              costs: list[Fraction]) -> str:
    """Maximize costs over the canonical tableau in place (Bland's rule).

    The reduced-cost row is carried through pivots, so each iteration
    is one tableau sweep.
    """
    ncols = len(tab[0]) - 1 if tab else len(costs)
    obj = _reduced_costs(tab, basis, costs)
    while True:
        entering = next((j for j in range(ncols) if obj[j] > 0), -1)
        if entering < 0:
            return "optimal"
        prow, best = -1, None
        for i, trow in enumerate(tab):
            if trow[entering] > 0:
                ratio = trow[-1] / trow[entering]
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[prow]
                ):
                    prow, best = i, ratio
        if prow < 0:
            return "unbounded"
        _pivot(tab, basis, obj, prow, entering)


def _basic_solution(tab, basis, ncols) -> list[Fraction]:
    x = [_ZERO] * ncols
    for i, b in enumerate(basis):
        x[b] = tab[i][-1]
    return x


def _gauss_presolve(sys: LinSystem, obj: list[Fraction]):
    """Substitute equality rows away before the simplex sees the system.

    Returns (inequality rows, reduced objective, substitutions) or the
    string "infeasible".  Substitutions are (pivot, coeffs, const)
    triples, to be replayed in reverse on the reduced solution; each
    expression references only variables never pivoted before it.
    """
    n = sys.var_count
    ineq: list[list] = []  # [coeffs list, rel, rhs]
    eqs: list[list] = []
    for r in sys.rows:
        entry = [list(r.coeffs), r.rel, r.rhs]
        (eqs if r.rel == "=" else ineq).append(entry)
    obj = list(obj)
    obj_shift = _ZERO
    subs: list[tuple[int, tuple[Fraction, ...], Fraction]] = []

    while eqs:
        coeffs, _, rhs = eqs.pop()
        pivot = next((j for j in range(n) if coeffs[j] != 0), None)
        if pivot is None:
            if rhs != 0:
                return "infeasible"
            continue
        pc = coeffs[pivot]
        expr = tuple(
            -coeffs[j] / pc if j != pivot else _ZERO for j in range(n)
        )
        const = rhs / pc
        for rows in (eqs, ineq):
            for entry in rows:
                c = entry[0][pivot]
                if c != 0:
                    entry[0] = [
                        v + c * e for v, e in zip(entry[0], expr)
                    ]
                    entry[0][pivot] = _ZERO
                    entry[2] = entry[2] - c * const
        c = obj[pivot]
        if c != 0:
            obj = [v + c * e for v, e in zip(obj, expr)]
            obj[pivot] = _ZERO
            obj_shift += c * const
        subs.append((pivot, expr, const))

    return ineq, obj, obj_shift, subs


def _back_substitute(point: list[Fraction], subs) -> tuple[Fraction, ...]:
    for pivot, expr, const in reversed(subs):
        point[pivot] = sum(
            (e * v for e, v in zip(expr, point) if e != 0), const
        )
    return tuple(point)


def maximize(sys: LinSystem, objective: Sequence) -> Optimal | Unbounded | Infeasible:
    """Exact maximum of a linear objective over the system.

    Strict rows are treated as their closure here (the supremum over an
    open set is attained on the boundary); use ``feasible`` when strict
    satisfaction matters.
    """
    obj0 = [rat(c) for c in objective]
    if len(obj0) != sys.var_count:
        raise ValueError("objective length differs from var_count")
    n = sys.var_count

    presolved = _gauss_presolve(sys, obj0)
    if presolved == "infeasible":
        return Infeasible()
    ineq_entries, obj, obj_shift, subs = presolved
    ineq = [Row(tuple(e[0]), e[1], e[2]) for e in ineq_entries]

    # constant rows left after substitution are plain sign checks
    kept: list[Row] = []
    for r in ineq:
        if any(c != 0 for c in r.coeffs):
            kept.append(r)
        elif r.rhs < 0:  # closure semantics: a constant "<" row acts like "<="
            return Infeasible()
    ineq = kept
    m = len(ineq)

    # columns: u/v pair per active variable (x = u - v), slacks, artificials
    active = sorted(
        {j for r in ineq for j in range(n) if r.coeffs[j] != 0}
        | {j for j in range(n) if obj[j] != 0}
    )
    na = len(active)
    col_of = {j: k for k, j in enumerate(active)}
    if m == 0:
        if any(obj[j] != 0 for j in active):
            return Unbounded()
        point = _back_substitute([_ZERO] * n, subs)
        return Optimal(sum((c * x for c, x in zip(obj0, point)), _ZERO), point)
    nslack = m
    ncols = 2 * na + nslack + m
    art0 = 2 * na + nslack
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    for i, r in enumerate(ineq):
        line = [_ZERO] * (ncols + 1)
        sign = _ONE if r.rhs >= 0 else -_ONE
        for j in range(n):
            c = r.coeffs[j]
            if c != 0:
                k = col_of[j]
                line[k] = sign * c
                line[na + k] = -sign * c
        line[2 * na + i] = sign
        line[art0 + i] = _ONE
        line[-1] = sign * r.rhs
        tab.append(line)
        basis.append(art0 + i)

    # phase 1: drive artificials to zero
    costs1 = [_ZERO] * ncols
    for j in range(art0, ncols):
        costs1[j] = -_ONE
    _optimize(tab, basis, costs1)
    total = sum((tab[i][-1] for i in range(len(tab)) if basis[i] >= art0), _ZERO)
    if total != 0:
        return Infeasible()
    # pivot leftover artificials out, dropping redundant rows
    scratch = [_ZERO] * (ncols + 1)
    i = 0
    while i < len(tab):
        if basis[i] >= art0:
            pcol = next((j for j in range(art0) if tab[i][j] != 0), None)
            if pcol is None:
                del tab[i]
                del basis[i]
                continue
            _pivot(tab, basis, scratch, i, pcol)
        i += 1
    # drop artificial columns
    for i in range(len(tab)):
        tab[i] = tab[i][:art0] + [tab[i][-1]]

    costs2 = [_ZERO] * art0
    for j in active:
        k = col_of[j]
        costs2[k] = obj[j]
        costs2[na + k] = -obj[j]
    status = _optimize(tab, basis, costs2)
    if status == "unbounded":
        return Unbounded()
    xs = _basic_solution(tab, basis, art0)
    point_list = [_ZERO] * n
    for j in active:
        k = col_of[j]
        point_list[j] = xs[k] - xs[na + k]
    point = _back_substitute(point_list, subs)
    value = sum((c * x for c, x in zip(obj0, point)), _ZERO)
    return Optimal(value, point)


def feasible(sys: LinSystem) -> Feasible | Infeasible:
    """Exact feasibility with genuine strict-inequality support."""
    strict = [r for r in sys.rows if r.rel == "<"]
    n = sys.var_count
    if not strict:
        result = maximize(sys, [_ZERO] * n)
        if isinstance(result, Infeasible):
            return Infeasible()
        assert isinstance(result, Optimal)
        point = result.point
        assert satisfies(sys, point)
        return Feasible(point)

    # shared slack t: every strict row becomes coeffs.x + t <= rhs;
    # strictly feasible iff max t > 0 (t is capped at 1 so the LP is bounded)
    aug_rows = []
    for r in sys.rows:
        if r.rel == "<":
            aug_rows.append(Row(r.coeffs + (_ONE,), "<=", r.rhs))
        else:
            aug_rows.append(Row(r.coeffs + (_ZERO,), r.rel, r.rhs))
    aug_rows.append(Row(tuple([_ZERO] * n) + (_ONE,), "<=", _ONE))
    aug = LinSystem(tuple(aug_rows), n + 1)
    result = maximize(aug, [_ZERO] * n + [_ONE])
    if isinstance(result, Infeasible):
        return Infeasible()
    assert isinstance(result, Optimal)
    if result.value <= 0:
        return Infeasible()
    point = result.point[:n]
    assert satisfies(sys, point)
    return Feasible(point)


def farkas_certificate(sys: LinSystem) -> tuple[Fraction, ...] | None:
    """Multipliers proving infeasibility of the non-strict system, if any.

    Returns y (one entry per row, nonnegative on inequality rows, any
    sign on equality rows) with y.A == 0 and y.rhs < 0, or None when the
    system is feasible or strictness is essential to its infeasibility.
    """
    m = len(sys.rows)
    n = sys.var_count
    if m == 0:
        return None
    # find y: sum_i y_i a_ij = 0 for all j; sum y_i rhs_i <= -1; y_i >= 0 on <=,<
    rows = []
    for j in range(n):
        rows.append(Row(tuple(r.coeffs[j] for r in sys.rows), "=", _ZERO))
    rows.append(Row(tuple(r.rhs for r in sys.rows), "<=", Fraction(-1)))
    for i, r in enumerate(sys.rows):
        if r.rel in ("<=", "<"):
            coeffs = [_ZERO] * m
            coeffs[i] = -_ONE
            rows.append(Row(tuple(coeffs), "<=", _ZERO))
    dual = LinSystem(tuple(rows), m)
    res = feasible(dual)
    if isinstance(res, Feasible):
        return res.point
    return None
