"""Parameter fitting: weak-gradient descent and exact consistency training.

Gradient descent runs in double precision (exactness buys nothing for
a descent loop); the mux rule sends the adjoint into whichever branch
the guard selects and never into the guard itself, so enable
parameters provably keep their initial values.  Consistency training
instead hands the parameter-dual encoding to a solver and rechecks any
returned weights by exact forward evaluation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .core import (
    Affine,
    Input,
    Mux,
    Network,
    ParameterVector,
    bind_params,
    evaluate,
    params_of,
)
from .errors import DimError, DivergenceError, LayoutError
from .formula import And, Exists, RealVar, lin_atom, strip_exists
from .rationals import rat, rat_vec
from .smt import encode_dual
from .solver import DEFAULT_TIMEOUT, Query, Sat, Unknown, Unsat, solve


@dataclass(frozen=True)
class Dataset:
    pairs: tuple[tuple[tuple[Fraction, ...], tuple[Fraction, ...]], ...]

    @staticmethod
    def make(pairs) -> "Dataset":
        out = tuple((rat_vec(x), rat_vec(y)) for x, y in pairs)
        if out:
            qs = {len(x) for x, _ in out}
            ps = {len(y) for _, y in out}
            if len(qs) != 1 or len(ps) != 1:
                raise DimError("dataset rows have mixed dimensions")
        return Dataset(out)

    def __len__(self) -> int:
        return len(self.pairs)


def load_dataset_csv(path: str, input_dim: int) -> Dataset:
    """CSV with q input columns then p output columns; header row required."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.strip() for ln in handle if ln.strip()]
    if not lines:
        raise DimError("empty dataset file")
    rows = [ln.split(",") for ln in lines[1:]]
    pairs = []
    for cells in rows:
        if len(cells) <= input_dim:
            raise DimError(
                f"dataset row has {len(cells)} columns, need more than {input_dim}"
            )
        vals = [rat(c.strip()) for c in cells]
        pairs.append((vals[:input_dim], vals[input_dim:]))
    return Dataset.make(pairs)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    schedule: str = "constant"  # "constant" or "inv_k" (alpha / k decay)
    grad_tol: float = 1e-8
    max_iters: int = 500
    seed: int = 0
    init: ParameterVector | None = None
    divergence_factor: float = 1e6


# -------------------------------------------------- float-mode machinery

def _float_params(net: Network, theta: Sequence[float] | None = None):
    """Per-node (matrix, bias) float copies, flattened in layout order."""
    out = {}
    flat = list(theta) if theta is not None else None
    pos = 0
    for nid, node in enumerate(net.nodes):
        if not isinstance(node, Affine):
            continue
        rows = len(node.b)
        cols = len(node.a[0]) if node.a else 0
        if flat is None:
            a = [[float(v) for v in row] for row in node.a]
            b = [float(v) for v in node.b]
        else:
            a = [
                [flat[pos + r * cols + c] for c in range(cols)] for r in range(rows)
            ]
            b = flat[pos + rows * cols : pos + rows * cols + rows]
        pos += rows * cols + rows
        out[nid] = (a, b)
    return out


def _theta_len(net: Network) -> int:
    total = 0
    for node in net.nodes:
        if isinstance(node, Affine):
            total += len(node.b) * (len(node.a[0]) if node.a else 0) + len(node.b)
    return total


def _forward_float(net: Network, fparams, x: Sequence[float]):
    values: dict[int, list[float]] = {}
    for nid in net.topo:
        node = net.nodes[nid]
        if isinstance(node, Input):
            values[nid] = list(x)
        elif isinstance(node, Affine):
            a, b = fparams[nid]
            stacked: list[float] = []
            for c in node.children:
                stacked.extend(values[c])
            values[nid] = [
                sum(w * v for w, v in zip(row, stacked)) + bias
                for row, bias in zip(a, b)
            ]
        else:
            guard = values[node.guard][0]
            src = node.first if guard <= 0.0 else node.second
            values[nid] = list(values[src])
    return values


def _vjp_float(net: Network, fparams, x: Sequence[float], ybar: Sequence[float]):
    """Reverse-mode accumulation; mux adjoints skip the guard port."""
    values = _forward_float(net, fparams, x)
    adj: dict[int, list[float]] = {
        nid: [0.0] * len(values[nid]) for nid in net.topo
    }
    adj[net.output] = list(ybar)
    grads = {
        nid: ([[0.0] * len(row) for row in a], [0.0] * len(b))
        for nid, (a, b) in fparams.items()
    }
    for nid in reversed(net.topo):
        node = net.nodes[nid]
        bar = adj[nid]
        if not any(bar):
            continue
        if isinstance(node, Affine):
            a, _ = fparams[nid]
            ga, gb = grads[nid]
            stacked: list[float] = []
            for c in node.children:
                stacked.extend(values[c])
            for r, br in enumerate(bar):
                if br == 0.0:
                    continue
                gb[r] += br
                row = a[r]
                grow = ga[r]
                for c, v in enumerate(stacked):
                    grow[c] += br * v
            offset = 0
            for c in node.children:
                width = len(values[c])
                target = adj[c]
                for k in range(width):
                    target[k] += sum(bar[r] * a[r][offset + k] for r in range(len(bar)))
                offset += width
        elif isinstance(node, Mux):
            guard = values[node.guard][0]
            src = node.first if guard <= 0.0 else node.second
            target = adj[src]
            for k, v in enumerate(bar):
                target[k] += v
    flat: list[float] = []
    for nid, node in enumerate(net.nodes):
        if isinstance(node, Affine):
            ga, gb = grads[nid]
            for row in ga:
                flat.extend(row)
            flat.extend(gb)
    return flat


def weak_gradient(net: Network, theta: ParameterVector, x: Sequence) -> tuple[float, ...]:
    """d(net output)/d(theta) at x for a scalar-output network.

    The mux weak-derivative rule applies: the selected branch carries
    the whole adjoint, the guard carries none.
    """
    if net.output_dim != 1:
        raise DimError("weak_gradient needs a scalar-output network")
    if len(theta.theta) != _theta_len(net):
        raise LayoutError("theta length does not match network")
    fparams = _float_params(net, [float(v) for v in theta.theta])
    return tuple(_vjp_float(net, fparams, [float(v) for v in x], [1.0]))


def default_init(net: Network, data: Dataset, seed: int = 0) -> ParameterVector:
    """Uniform [-1, 1] weights with guard biases spread over data quantiles.

    Guard affines reading the input directly get biases that scatter
    their zero crossings across the observed inputs, so muxes start
    well-dispersed instead of all switching at the same point.
    """
    rng = random.Random(seed)
    layout = params_of(net).layout
    guard_ids = {
        node.guard for node in net.nodes if isinstance(node, Mux)
    }
    xs = [pair[0] for pair in data.pairs]
    flat: list[Fraction] = []
    guard_rank = 0
    n_guards = max(1, len(guard_ids))
    for entry in layout:
        count = entry.shape[0] * entry.shape[1]
        node = net.nodes[entry.node_id]
        is_guard_bias = (
            entry.field == "b"
            and entry.node_id in guard_ids
            and isinstance(node, Affine)
            and node.children == (net.input_id,)
            and xs
        )
        if is_guard_bias:
            # place the crossing at a quantile of the projected data
            a_vals = flat[-entry.shape[0] * net.input_dim:] if net.input_dim else []
            q = Fraction(guard_rank + 1, n_guards + 1)
            proj = sorted(
                sum((a * xc for a, xc in zip(a_vals, x)), Fraction(0)) for x in xs
            )
            idx = min(len(proj) - 1, int(q * len(proj)))
            flat.append(Fraction(float(-proj[idx])))
            guard_rank += 1
        else:
            for _ in range(count):
                # dyadic, so the value survives the float round trip bitwise
                flat.append(Fraction(rng.randint(-1024, 1024), 1024))
    return ParameterVector(tuple(flat), layout)


@dataclass(frozen=True)
class TrainResult:
    theta: ParameterVector
    theta0: ParameterVector
    loss_trace: tuple[float, ...]


def gd_train(net: Network, data: Dataset, cfg: TrainConfig) -> TrainResult:
    """Least-squares gradient descent with the mux weak-derivative rule.

    Raises DivergenceError when the loss blows past
    ``divergence_factor`` times its initial value.  Enable parameters
    are bitwise unchanged from their initialization on return.
    """
    if not data.pairs:
        raise DimError("gd_train needs a nonempty dataset")
    init = cfg.init if cfg.init is not None else default_init(net, data, cfg.seed)
    theta = [float(v) for v in init.theta]
    # training runs in float space; report the start the run actually used
    init = ParameterVector(tuple(Fraction(t) for t in theta), init.layout)
    xs = [[float(v) for v in x] for x, _ in data.pairs]
    ys = [[float(v) for v in y] for _, y in data.pairs]
    n = len(xs)

    def loss_and_grad(tvec):
        fparams = _float_params(net, tvec)
        total = 0.0
        grad = [0.0] * len(tvec)
        for x, y in zip(xs, ys):
            out = _forward_float(net, fparams, x)[net.output]
            resid = [o - t for o, t in zip(out, y)]
            total += sum(r * r for r in resid)
            g = _vjp_float(net, fparams, x, [2.0 * r / n for r in resid])
            for k, v in enumerate(g):
                grad[k] += v
        return total / n, grad

    loss0, grad = loss_and_grad(theta)
    trace = [loss0]
    for k in range(1, cfg.max_iters + 1):
        gnorm = math.sqrt(sum(g * g for g in grad))
        if gnorm <= cfg.grad_tol:
            break
        alpha = cfg.learning_rate / k if cfg.schedule == "inv_k" else cfg.learning_rate
        theta = [t - alpha * g for t, g in zip(theta, grad)]
        loss, grad = loss_and_grad(theta)
        trace.append(loss)
        if loss0 > 0 and loss > cfg.divergence_factor * loss0:
            raise DivergenceError(f"loss {loss} exceeded {cfg.divergence_factor} x initial")

    final = ParameterVector(
        tuple(Fraction(t) for t in theta), init.layout
    )
    return TrainResult(theta=final, theta0=init, loss_trace=tuple(trace))


# -------------------------------------------------- consistency training

@dataclass(frozen=True)
class Params:
    theta: ParameterVector


@dataclass(frozen=True)
class Inconsistent:
    pass


ConsistencyResult = Union[Params, Inconsistent, Unknown]


def consistency_train(
    net: Network,
    data: Dataset,
    epsilon,
    backend: str = "external",
    timeout: float = DEFAULT_TIMEOUT,
    solver_cmd: str | None = None,
) -> ConsistencyResult:
    """Find weights making every pair 1-norm consistent, or prove none exist.

    Builds the conjunction over data points of parameter-dual encodings
    (weights shared across points), expands each 1-norm via split
    variables, and solves.  A returned theta is rebound and rechecked
    by exact forward evaluation before it is believed.
    """
    if not data.pairs:
        raise DimError("consistency_train needs a nonempty dataset")
    eps = rat(epsilon)
    if eps < 0:
        raise DimError("epsilon must be nonnegative")

    exists: list[RealVar] = []
    parts = []
    for i, (x, y) in enumerate(data.pairs):
        res = encode_dual(net, x, y_name=f"o{i}", aux_prefix=f"d{i}_")
        evars, body = strip_exists(res.formula)
        exists.extend(evars)
        exists.extend(RealVar(n) for n in res.free_out)
        parts.extend(body.children if isinstance(body, And) else (body,))
        slacks = []
        for c, (o_name, y_val) in enumerate(zip(res.free_out, y)):
            s_name = f"s{i}_{c}"
            slacks.append(s_name)
            exists.append(RealVar(s_name))
            parts.append(lin_atom([(o_name, 1), (s_name, -1)], "<=", y_val))
            parts.append(lin_atom([(o_name, -1), (s_name, -1)], "<=", -y_val))
        parts.append(lin_atom([(s, 1) for s in slacks], "<=", eps))

    formula = Exists(tuple(exists), And(tuple(parts)))
    q = Query(formula=formula, backend=backend, timeout=timeout, solver_cmd=solver_cmd)
    verdict = solve(q)
    if isinstance(verdict, Unknown):
        return verdict
    if isinstance(verdict, Unsat):
        return Inconsistent()

    base = params_of(net)
    names = [f"th{k}" for k in range(len(base.theta))]
    missing = [n for n in names if n not in verdict.model]
    if missing:
        return Unknown(f"solver model omitted parameters {missing[:4]}")
    theta = ParameterVector(
        tuple(verdict.model[n] for n in names), base.layout
    )
    fitted = bind_params(net, theta)
    for x, y in data.pairs:
        out = evaluate(fitted, x)
        err = sum((abs(a - b) for a, b in zip(y, out)), Fraction(0))
        if err > eps:
            return Unknown("solver model failed the exact forward recheck")
    return Params(theta)


def robust_consistency_text(
    net: Network,
    data: Dataset,
    epsilon,
    delta_lo,
    delta_hi,
) -> str:
    """Exists-forall query text for perturbation-robust consistency.

    Emitted for external exists-forall workflows only; nothing in this
    package solves it.  Weights are the free (exists) variables, the
    perturbation is universally quantified over the given box, and each
    pair's 1-norm bound is expressed with ite absolute values.
    """
    if not data.pairs:
        raise DimError("robust_consistency_text needs a nonempty dataset")
    eps = rat(epsilon)
    lo, hi = rat(delta_lo), rat(delta_hi)
    q = net.input_dim
    from .formula import vec_names  # local to avoid cycles at import time
    from .rationals import smt_term

    d_names = vec_names("d", q)
    theta_count = _theta_len(net)
    lines = ["(set-option :produce-models true)", "(set-logic NRA)"]
    lines.extend(f"(declare-fun th{k} () Real)" for k in range(theta_count))

    body_parts = []
    binders = []
    for i, (x, y) in enumerate(data.pairs):
        res = encode_dual(net, x, y_name=f"o{i}", aux_prefix=f"d{i}_", delta_name="d")
        evars, body = strip_exists(res.formula)
        binders.extend(v.name for v in evars)
        binders.extend(res.free_out)
        from .smt import formula_sexp

        conjuncts = body.children if isinstance(body, And) else (body,)
        body_parts.extend(formula_sexp(cjt) for cjt in conjuncts)
        abs_terms = [
            f"(ite (>= (- {o} {smt_term(yv)}) 0.0) (- {o} {smt_term(yv)}) (- {smt_term(yv)} {o}))"
            for o, yv in zip(res.free_out, y)
        ]
        total = abs_terms[0] if len(abs_terms) == 1 else "(+ " + " ".join(abs_terms) + ")"
        body_parts.append(f"(<= {total} {smt_term(eps)})")

    box = " ".join(
        f"(and (<= {smt_term(lo)} {d}) (<= {d} {smt_term(hi)}))" for d in d_names
    )
    box_f = box if len(d_names) == 1 else f"(and {box})"
    inner = "(and " + " ".join(body_parts) + ")"
    ex_binders = " ".join(f"({b} Real)" for b in binders)
    if ex_binders:
        inner = f"(exists ({ex_binders}) {inner})"
    d_binders = " ".join(f"({d} Real)" for d in d_names)
    lines.append(f"(assert (forall ({d_binders}) (=> {box_f} {inner})))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
