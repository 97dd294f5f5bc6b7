#!/usr/bin/env python3
"""Minimum-fuel control of a double integrator with a no-coasting floor.

Four steps of x(t+1) = A x(t) + B u(t) must move the state from rest at
the origin to rest at position 1 while every input magnitude stays in
[0.2/T, 1/T] with T = 7.5 s.  The lower bound makes the feasible input
set nonconvex, so the minimization runs as a bisection over exact
feasibility queries; a sign-pattern brute force (one rational LP per
orthant) cross-checks the optimum.

Usage: python scripts/fuel_control.py [--eps 0.001]
"""

import argparse
import itertools
from fractions import Fraction as F

from amnet import stdlib
from amnet.core import Builder
from amnet.lp import LinSystem, Optimal, Row, maximize
from amnet.optimize import BisectionConfig, Optimal as OptOptimal, minimize

DT = F(15, 8)
TTOT = F(15, 2)
UB = 1 / TTOT
LB = F(1, 5) / TTOT
HORIZON = 4
TARGET = (F(1), F(0))
AMAT = ((F(1), DT), (F(0), F(1)))
BVEC = (DT * DT / 2, DT)


def reach_columns():
    cols = []
    for t in range(HORIZON):
        v = list(BVEC)
        for _ in range(HORIZON - 1 - t):
            v = [AMAT[0][0] * v[0] + AMAT[0][1] * v[1],
                 AMAT[1][0] * v[0] + AMAT[1][1] * v[1]]
        cols.append(tuple(v))
    return cols


def constraints():
    cols = reach_columns()
    nets = []
    for comp in range(2):
        for sign in (1, -1):
            b = Builder(HORIZON)
            row = [sign * cols[t][comp] for t in range(HORIZON)]
            nets.append(b.network(b.affine([row], [-sign * TARGET[comp]], b.input)))
    for t in range(HORIZON):
        for kind in ("ub", "lb"):
            b = Builder(HORIZON)
            p = b.proj(b.input, t)
            np_ = b.scale(p, -1)
            abs_t = b.mux(np_, p, p)
            if kind == "ub":
                nets.append(b.network(b.affine([[1]], [-UB], abs_t)))
            else:
                nets.append(b.network(b.affine([[-1]], [LB], abs_t)))
    return nets


def brute_force():
    cols = reach_columns()
    best = None
    for signs in itertools.product((1, -1), repeat=HORIZON):
        rows = []
        for comp in range(2):
            coeffs = [signs[t] * cols[t][comp] for t in range(HORIZON)]
            rows.append(Row(tuple(coeffs), "=", TARGET[comp]))
        for t in range(HORIZON):
            unit = [F(0)] * HORIZON
            unit[t] = F(1)
            rows.append(Row(tuple(unit), "<=", UB))
            rows.append(Row(tuple(-v for v in unit), "<=", -LB))
        res = maximize(LinSystem(tuple(rows), HORIZON), [F(-1)] * HORIZON)
        if isinstance(res, Optimal) and (best is None or -res.value < best[0]):
            best = (-res.value, tuple(s * v for s, v in zip(signs, res.point)))
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default="0.001")
    args = ap.parse_args()

    oracle_value, oracle_u = brute_force()
    print(f"brute-force optimum: {float(oracle_value):.6f}")
    print(f"  u = {[float(v) for v in oracle_u]}")

    cfg = BisectionConfig.make(0, HORIZON * UB, args.eps)
    result = minimize(stdlib.one_norm(HORIZON), constraints(), cfg)
    if not isinstance(result, OptOptimal):
        print(f"minimization failed: {result}")
        return 2
    lo, hi = result.interval
    print(f"bisection: value in [{float(lo):.6f}, {float(hi):.6f}] "
          f"after {result.bisection_queries} feasibility queries")
    print(f"  witness u = {[float(v) for v in result.witness]}")
    gap = abs(result.value - oracle_value)
    print(f"  |bisection - brute force| = {float(gap):.2e}")
    for t, ut in enumerate(result.witness):
        assert LB <= abs(ut) <= UB, f"bound violated at step {t}"
    print("  all per-step magnitude bounds hold exactly")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
