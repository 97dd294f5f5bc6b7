#!/usr/bin/env python3
"""Adversarial-perturbation query against an imported rectifier network.

A fixed 2-4-2 dense ReLU classifier is converted to a mux network, and
the solver is asked whether any input within an inf-norm ball around a
reference point flips the argmax class.  SAT comes with an exact
witness (replayed through forward evaluation); UNSAT is a proof that
the class is locally robust at that radius.

Usage: python scripts/relu_robustness.py [--radius 1/2] [--point 1,-1]
"""

import argparse
from fractions import Fraction as F

from amnet import stdlib
from amnet.core import evaluate
from amnet.formula import lin_atom
from amnet.smt import encode_smt
from amnet.solver import Query, Sat, Unsat, solve, with_assertions

LAYERS = [
    ([["1", "0.5"], ["-0.5", "1"], ["0.25", "-1"], ["-1", "-0.25"]],
     ["0.1", "-0.2", "0", "0.3"]),
    ([["1", "-1", "0.5", "-0.5"], ["-1", "1", "-0.5", "0.5"]],
     ["0.05", "-0.05"]),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radius", default="1/2")
    ap.add_argument("--point", default="1,-1")
    args = ap.parse_args()

    net = stdlib.from_relu_nn(LAYERS)
    x0 = tuple(F(v) for v in args.point.split(","))
    radius = F(args.radius)
    logits = evaluate(net, x0)
    label = 0 if logits[0] >= logits[1] else 1
    other = 1 - label
    print(f"reference point {tuple(float(v) for v in x0)}: "
          f"logits {tuple(float(v) for v in logits)}, class {label}")

    res = encode_smt(net)
    pins = []
    for name, val in zip(res.free_in, x0):
        pins.append(lin_atom([(name, 1)], ">=", val - radius))
        pins.append(lin_atom([(name, 1)], "<=", val + radius))
    pins.append(lin_atom(
        [(res.free_out[other], 1), (res.free_out[label], -1)], ">=", 0
    ))
    verdict = solve(Query(formula=with_assertions(res, pins), backend="enumerate"))
    if isinstance(verdict, Unsat):
        print(f"UNSAT: class {label} is robust within radius {args.radius}")
        return 0
    assert isinstance(verdict, Sat)
    witness = tuple(verdict.model[n] for n in res.free_in)
    out = evaluate(net, witness)
    print(f"SAT: perturbed input {tuple(float(v) for v in witness)} "
          f"gives logits {tuple(float(v) for v in out)}")
    assert out[other] >= out[label], "witness must replay exactly"
    assert all(abs(w - v) <= radius for w, v in zip(witness, x0))
    print("witness rechecked by exact forward evaluation")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
