#!/usr/bin/env python3
"""Lambda-contractiveness of a polyhedron under saturated state feedback.

The closed loop is x(t+1) = A x(t) + B sat(F x(t)) with |u| <= 7.  The
12-row polyhedron S(G, w) is symmetric (rows come in +/- pairs sharing
their levels).  The script verifies contractiveness at the tightest
rational lambda we certify, then inflates w by 1 percent and prints the
counterexample trajectory step that escapes, rechecked exactly.

Usage: python scripts/contractive_polytope.py [--lambda 0.999]
"""

import argparse
from fractions import Fraction as F

from amnet import lyapunov

A = [["0.8", "0.5"], ["-0.4", "1.2"]]
B = ["0", "1"]
FDBK = ["0.4", "-1.2"]
U = 7

POS_ROWS = [
    ("0.2888", "-1.8350"),
    ("0.9650", "-2.0576"),
    ("1.0008", "1.7891"),
    ("1.5951", "-1.9866"),
    ("-1.4970", "-2.0590"),
    ("2.0707", "-1.5864"),
]
W_HALF = ["35.4375", "48.2116", "48.1152", "62.5184", "62.3934", "76.2996"]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambda", dest="lam", default="0.999")
    args = ap.parse_args()

    g = [[F(a), F(b)] for a, b in POS_ROWS]
    g += [[-row[0], -row[1]] for row in g[:6]]
    w = [F(v) for v in W_HALF] * 2
    poly = lyapunov.Polyhedron.make(g, w)

    verdict = lyapunov.contractive_check(A, B, FDBK, U, U, poly, args.lam)
    print(f"lambda = {args.lam}, scale 1.00: {type(verdict).__name__}")

    refuted = lyapunov.contractive_check(A, B, FDBK, U, U, poly, args.lam,
                                         scale_w="1.01")
    print(f"lambda = {args.lam}, scale 1.01: {type(refuted).__name__}")
    if isinstance(refuted, lyapunov.Refuted):
        ok = lyapunov.check_refutation(A, B, FDBK, U, U, poly, args.lam,
                                       refuted, scale_w="1.01")
        print(f"  x       = ({float(refuted.x[0]):.7f}, {float(refuted.x[1]):.7f})")
        print(f"  x_plus  = ({float(refuted.x_plus[0]):.7f}, {float(refuted.x_plus[1]):.7f})")
        print(f"  epsilon = {float(refuted.epsilon):.8f}")
        print(f"  exact recheck: {ok}")

    print("sweep:")
    for lam in ("0.9", "0.95", "0.99"):
        got = lyapunov.contractive_check(A, B, FDBK, U, U, poly, lam)
        print(f"  lambda = {lam}: {type(got).__name__}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
