"""Scalar minimization by bisection over feasibility queries.

Level-set membership (is the optimum <= t?) is one feasibility query;
nesting of level sets makes bisection sound.  The bracket is verified
at both endpoints before bisection starts: an infeasible upper endpoint
means the caller's bracket excludes the optimum, which is reported
rather than silently mis-bracketed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .core import Network, evaluate
from .errors import DimError
from .rationals import rat
from .smt import feasibility_formula
from .solver import DEFAULT_TIMEOUT, Query, Sat, Unknown, Unsat, Verdict, solve


@dataclass(frozen=True)
class BisectionConfig:
    lower: Fraction
    upper: Fraction
    eps: Fraction
    backend: str = "auto"
    max_iters: int = 128
    timeout: float = DEFAULT_TIMEOUT
    solver_cmd: str | None = None

    @staticmethod
    def make(lower, upper, eps, **kw) -> "BisectionConfig":
        lo, hi, e = rat(lower), rat(upper), rat(eps)
        if lo > hi:
            raise ValueError("bracket lower bound exceeds upper bound")
        if e <= 0:
            raise ValueError("tolerance must be positive")
        return BisectionConfig(lo, hi, e, **kw)


@dataclass(frozen=True)
class Optimal:
    interval: tuple[Fraction, Fraction]
    witness: tuple[Fraction, ...]
    value: Fraction
    bisection_queries: int
    endpoint_queries: int


@dataclass(frozen=True)
class InfeasibleProblem:
    pass


@dataclass(frozen=True)
class BracketError:
    detail: str


MinimizeResult = Union[Optimal, InfeasibleProblem, BracketError, Unknown]


def _level_query(objective: Network, constraints: Sequence[Network], t: Fraction,
                 cfg: BisectionConfig) -> Query:
    entries = [(objective, "<=", t)]
    entries.extend((c, "<=", 0) for c in constraints)
    return Query(
        formula=feasibility_formula(entries),
        backend=cfg.backend,
        timeout=cfg.timeout,
        solver_cmd=cfg.solver_cmd,
    )


def _witness_point(model, dim: int) -> tuple[Fraction, ...]:
    if dim == 1:
        return (model["x"],)
    return tuple(model[f"x_{i}"] for i in range(dim))


def check_level(objective: Network, constraints: Sequence[Network], t,
                cfg: BisectionConfig | None = None) -> Verdict:
    """Single feasibility query: constraints hold and objective <= t."""
    cfg = cfg or BisectionConfig.make(0, 0, "1/100")
    return solve(_level_query(objective, constraints, rat(t), cfg))


def minimize(objective: Network, constraints: Sequence[Network],
             cfg: BisectionConfig) -> MinimizeResult:
    """Minimize a scalar objective network subject to networks <= 0.

    Queries the upper endpoint first (infeasible there means the
    bracket misses the optimum), then the lower endpoint (feasible
    there means the optimum is at or below the bracket start), then
    bisects.  The witness always comes from the last satisfiable query.
    """
    if objective.output_dim != 1:
        raise DimError("objective must be scalar")
    for c in constraints:
        if c.input_dim != objective.input_dim:
            raise DimError("constraint input dim differs from objective")
        if c.output_dim != 1:
            raise DimError("constraint networks must be scalar")

    lo, hi = cfg.lower, cfg.upper
    endpoint_queries = 0

    verdict = solve(_level_query(objective, constraints, hi, cfg))
    endpoint_queries += 1
    if isinstance(verdict, Unknown):
        return verdict
    if isinstance(verdict, Unsat):
        if constraints:
            alone = Query(
                formula=feasibility_formula([(c, "<=", 0) for c in constraints]),
                backend=cfg.backend,
                timeout=cfg.timeout,
                solver_cmd=cfg.solver_cmd,
            )
            cverd = solve(alone)
            if isinstance(cverd, Unsat):
                return InfeasibleProblem()
            if isinstance(cverd, Unknown):
                return cverd
        return BracketError(f"objective cannot reach {hi}; bracket excludes the optimum")
    witness = _witness_point(verdict.model, objective.input_dim)

    verdict_lo = solve(_level_query(objective, constraints, lo, cfg))
    endpoint_queries += 1
    if isinstance(verdict_lo, Unknown):
        return verdict_lo
    if isinstance(verdict_lo, Sat):
        point = _witness_point(verdict_lo.model, objective.input_dim)
        return Optimal(
            interval=(lo, lo),
            witness=point,
            value=evaluate(objective, point)[0],
            bisection_queries=0,
            endpoint_queries=endpoint_queries,
        )

    bisections = 0
    while hi - lo > cfg.eps and bisections < cfg.max_iters:
        mid = (lo + hi) / 2
        verdict = solve(_level_query(objective, constraints, mid, cfg))
        bisections += 1
        if isinstance(verdict, Unknown):
            return verdict
        if isinstance(verdict, Sat):
            hi = mid
            witness = _witness_point(verdict.model, objective.input_dim)
        else:
            lo = mid

    return Optimal(
        interval=(lo, hi),
        witness=witness,
        value=evaluate(objective, witness)[0],
        bisection_queries=bisections,
        endpoint_queries=endpoint_queries,
    )
