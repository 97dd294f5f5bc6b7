#!/usr/bin/env python3
"""Region-of-attraction search for a stable 2x2 linear system.

Runs the counterexample-guided loop on x(t+1) = A x(t) over the box
|x|_inf <= 10, prints the synthesized max-of-affine certificate, then
rechecks it three independent ways: the formula-route violation search
on both backends, and a dense grid sweep.

Usage: python scripts/roa_search.py [--pieces 8] [--log cert.log]
"""

import argparse
import sys
import time
from fractions import Fraction as F

from amnet.core import Builder
from amnet import lyapunov

A = [["0.7005", "-0.2638"], ["-0.2278", "-0.4627"]]  # spectral radius 3/4


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pieces", type=int, default=8)
    ap.add_argument("--max-iters", type=int, default=50)
    ap.add_argument("--log", help="write the certificate log here")
    args = ap.parse_args()

    b = Builder(2)
    dynamics = b.network(b.affine(A, [0, 0], b.input))
    spec = lyapunov.LyapSpec.make(dynamics, "roa", domain=[(-10, 10), (-10, 10)])

    t0 = time.time()
    result = lyapunov.cegis(
        spec, n_pieces=args.pieces, max_iters=args.max_iters, x0=[10, 10],
        progress=lambda line: print("  " + line, file=sys.stderr),
    )
    if not isinstance(result, lyapunov.Stable):
        print(f"no certificate: {result.reason}")
        return 2
    print(f"stable after {result.iterations} iterations ({time.time()-t0:.1f}s)")
    print(f"certificate with {len(result.fn.pieces)} pieces:")
    for g, h in result.fn.pieces:
        print("  V >= " + " + ".join(f"({v})*x{i+1}" for i, v in enumerate(g)))

    if args.log:
        with open(args.log, "w", encoding="utf-8") as handle:
            handle.write("\n".join(result.log) + "\n")
        print(f"log written to {args.log}")

    print("recheck (enumerate): ", end="")
    print(type(lyapunov.f_solve(spec, result.fn, backend="enumerate")).__name__)
    print("recheck (external):  ", end="")
    print(type(lyapunov.f_solve(spec, result.fn, backend="external", timeout=300)).__name__)

    worst = None
    a = [[F(v) for v in row] for row in A]
    for i in range(41):
        for j in range(41):
            x = (F(-10) + F(20 * i, 40), F(-10) + F(20 * j, 40))
            if x == (F(0), F(0)):
                continue
            ax = (a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1])
            margin = result.fn.value(x) - result.fn.value(ax)
            if worst is None or margin < worst:
                worst = margin
    print(f"41x41 grid: smallest decrease margin {float(worst):.6f} (positive is good)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
