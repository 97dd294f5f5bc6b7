"""Acceptance gate: one test per top-level criterion.

Each test prints a machine-readable ``ACCEPTANCE <tag>: PASS`` line on
success so a full run doubles as the acceptance report.  Tolerances are
pinned here and nowhere else.
"""

import itertools
import math
import random
import time
from fractions import Fraction as F

import pytest

from amnet import lyapunov, stdlib
from amnet.core import Builder, ParameterVector, bind_params, evaluate, guard_only_params, params_of
from amnet.lp import Feasible, Infeasible, LinSystem, Optimal, Row, feasible, maximize, satisfies
from amnet.optimize import BisectionConfig, Optimal as OptOptimal, minimize
from amnet.smt import encode_smt
from amnet.solver import (
    Query,
    Sat,
    Unknown,
    Unsat,
    check_graph_membership,
    resolve_solver,
    solve,
    with_assertions,
)
from amnet.formula import lin_atom
from amnet.train import (
    Dataset,
    Inconsistent,
    Params,
    TrainConfig,
    consistency_train,
    default_init,
    gd_train,
    weak_gradient,
)

from conftest import STABLE_A, rand_point, random_network, stable_dynamics
from test_lp import oracle_verdict, random_system
from test_contractive import A as CT_A, B as CT_B, FDBK as CT_F, G_ROWS, W, LAMBDA


def report(tag: str, detail: str = ""):
    suffix = f" - {detail}" if detail else ""
    print(f"\nACCEPTANCE {tag}: PASS{suffix}")


# ---------------------------------------------------------------- 1

def test_01_encoding_theorem_both_backends():
    """200 random nets x 5 points: membership SAT, unit-perturbed UNSAT,
    identical verdicts from the enumeration backend and the external
    solver subprocess."""
    rng = random.Random(1234)
    external_cmd = " ".join(resolve_solver())
    t0 = time.time()
    agree = 0
    for _ in range(200):
        net = random_network(rng, max_muxes=6, max_dim=3)
        for _ in range(5):
            a = rand_point(rng, net.input_dim)
            y = evaluate(net, a)
            delta = [F(0)] * net.output_dim
            delta[rng.randrange(net.output_dim)] = F(rng.choice((-1, 1)))
            bad = tuple(u + d for u, d in zip(y, delta))
            for target, expected in ((y, Sat), (bad, Unsat)):
                enum_v = check_graph_membership(net, a, target, backend="enumerate")
                ext_v = check_graph_membership(net, a, target, backend="external")
                assert isinstance(enum_v, expected), (net, a, target)
                assert isinstance(ext_v, expected), (net, a, target)
                agree += 1
    elapsed = time.time() - t0
    assert agree == 2000
    report("1-encoding-theorem",
           f"2000/2000 verdicts agree (external: {external_cmd}) in {elapsed:.0f}s")
    assert elapsed < 300, f"runtime target exceeded: {elapsed:.0f}s"


# ---------------------------------------------------------------- 2

def test_02_stdlib_fidelity():
    rng = random.Random(77)

    def r():
        return F(rng.randint(-60, 60), rng.randint(1, 8))

    checks = 0
    scalar = [
        (stdlib.relu(), stdlib.ref_relu), (stdlib.abs1(), stdlib.ref_abs),
        (stdlib.sat(), stdlib.ref_sat), (stdlib.deadzone(), stdlib.ref_deadzone),
    ]
    for net, ref in scalar:
        for _ in range(1000):
            x = r()
            assert evaluate(net, [x]) == (ref(x),)
            checks += 1
    for net, ref in [(stdlib.max2(), stdlib.ref_max), (stdlib.min2(), stdlib.ref_min)]:
        for _ in range(1000):
            x, y = r(), r()
            assert evaluate(net, [x, y]) == (ref(x, y),)
            checks += 1
    for net, ref, arity in [
        (stdlib.gate_and(), stdlib.ref_gate_and, 4),
        (stdlib.gate_or(), stdlib.ref_gate_or, 4),
        (stdlib.gate_xor(), stdlib.ref_gate_xor, 4),
        (stdlib.gate_not(), stdlib.ref_gate_not, 3),
        (stdlib.cmp_le(), stdlib.ref_cmp_le, 3),
        (stdlib.cmp_ge(), stdlib.ref_cmp_ge, 3),
        (stdlib.cmp_lt(), stdlib.ref_cmp_lt, 3),
        (stdlib.cmp_gt(), stdlib.ref_cmp_gt, 3),
        (stdlib.cmp_eq(), stdlib.ref_cmp_eq, 3),
        (stdlib.cmp_neq(), stdlib.ref_cmp_neq, 3),
    ]:
        for _ in range(1000):
            args = [r() for _ in range(arity)]
            if rng.random() < 0.4:
                args[rng.randrange(2, arity)] = F(0)
            assert evaluate(net, args) == (ref(*args),)
            checks += 1
    for n in (1, 2, 4):
        inf_net, one_net, card_net = stdlib.inf_norm(n), stdlib.one_norm(n), stdlib.card(n)
        for _ in range(1000 // n):
            xs = [r() for _ in range(n)]
            if rng.random() < 0.3:
                xs[rng.randrange(n)] = F(0)
            assert evaluate(inf_net, xs) == (stdlib.ref_inf_norm(xs),)
            assert evaluate(one_net, xs) == (stdlib.ref_one_norm(xs),)
            assert evaluate(card_net, xs) == (stdlib.ref_card(xs),)
            checks += 3
    sat1, sat2 = stdlib.sat(), stdlib.sat_via_relu()
    for _ in range(1000):
        x = r()
        assert evaluate(sat1, [x]) == evaluate(sat2, [x])
        checks += 1
    report("2-stdlib-fidelity", f"{checks} exact comparisons")


# ---------------------------------------------------------------- 3

def test_03_bisection_bound():
    b = Builder(1)
    ge3 = b.network(b.affine([[-1]], [3], b.input))
    cfg = BisectionConfig.make(0, 8, "0.01")
    result = minimize(stdlib.abs1(), [ge3], cfg)
    assert isinstance(result, OptOptimal)
    lo, hi = result.interval
    assert lo < 3 <= hi and hi - lo <= F(1, 100)
    budget = math.ceil(math.log2(800))
    assert result.bisection_queries <= budget
    report("3-bisection-bound",
           f"interval [{float(lo):.4f}, {float(hi):.4f}] in "
           f"{result.bisection_queries} <= {budget} bisection queries")


# ---------------------------------------------------------------- 4

DT = F(15, 8)          # 7.5 s split over four steps
TTOT = F(15, 2)
UB = 1 / TTOT          # per-step magnitude cap
LB = F(1, 5) / TTOT    # no-coasting floor
AMAT = ((F(1), DT), (F(0), F(1)))
BVEC = (DT * DT / 2, DT)
HORIZON = 4
TARGET = (F(1), F(0))


def _reach_columns():
    # x(4) = sum_t A^(3-t) B u(t); columns for t = 0..3
    cols = []
    for t in range(HORIZON):
        v = list(BVEC)
        for _ in range(HORIZON - 1 - t):
            v = [AMAT[0][0] * v[0] + AMAT[0][1] * v[1],
                 AMAT[1][0] * v[0] + AMAT[1][1] * v[1]]
        cols.append(tuple(v))
    return cols


def fuel_objective():
    return stdlib.one_norm(HORIZON)


def fuel_constraints():
    cols = _reach_columns()
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


def fuel_bruteforce():
    """Exact optimum by sign-pattern enumeration with per-pattern LPs."""
    cols = _reach_columns()
    best = None
    for signs in itertools.product((1, -1), repeat=HORIZON):
        # variables v_t = |u_t| in [LB, UB]; dynamics in terms of signs
        rows = []
        for comp in range(2):
            coeffs = [signs[t] * cols[t][comp] for t in range(HORIZON)]
            rows.append(Row(tuple(coeffs), "=", TARGET[comp]))
        for t in range(HORIZON):
            e = [F(0)] * HORIZON
            e[t] = F(1)
            rows.append(Row(tuple(e), "<=", UB))
            rows.append(Row(tuple(-v for v in e), "<=", -LB))
        res = maximize(LinSystem(tuple(rows), HORIZON), [F(-1)] * HORIZON)
        if isinstance(res, Optimal):
            total = -res.value
            if best is None or total < best:
                best = total
    return best


def test_04_nonconvex_fuel_control():
    oracle = fuel_bruteforce()
    assert oracle is not None, "fixture must be feasible"
    cfg = BisectionConfig.make(0, HORIZON * UB, "0.001")
    result = minimize(fuel_objective(), fuel_constraints(), cfg)
    assert isinstance(result, OptOptimal)
    assert abs(result.value - oracle) <= F(1, 1000)
    u = result.witness
    # both magnitude bounds hold exactly at every step
    for ut in u:
        assert LB <= abs(ut) <= UB
    # the witness reaches the target exactly
    cols = _reach_columns()
    reach = tuple(
        sum((cols[t][c] * u[t] for t in range(HORIZON)), F(0)) for c in range(2)
    )
    assert reach == TARGET
    report("4-nonconvex-fuel-control",
           f"optimum {float(oracle):.6f}, bisection value {float(result.value):.6f}, "
           f"u = {[float(v) for v in u]}")


# ---------------------------------------------------------------- 5

def test_05_lyapunov_cegis():
    spec = lyapunov.LyapSpec.make(stable_dynamics(), "roa",
                                  domain=[(-10, 10), (-10, 10)])
    t0 = time.time()
    result = lyapunov.cegis(spec, n_pieces=8, max_iters=50, x0=[10, 10],
                            time_budget=600)
    elapsed = time.time() - t0
    assert isinstance(result, lyapunov.Stable)
    assert result.iterations <= 50
    assert elapsed < 600
    fn = result.fn
    # (a) the violation search is empty on both backends (formula route);
    # the external call shares the criterion's ten-minute budget
    assert isinstance(lyapunov.f_solve(spec, fn, backend="enumerate"),
                      lyapunov.Certified)
    remaining = max(60.0, 600.0 - elapsed - 30.0)
    assert isinstance(
        lyapunov.f_solve(spec, fn, backend="external", timeout=remaining),
        lyapunov.Certified,
    )
    # (b) 41 x 41 grid: positivity and strict decrease off the origin
    a = [[F(v) for v in row] for row in STABLE_A]
    for i in range(41):
        for j in range(41):
            x = (F(-10) + F(20 * i, 40), F(-10) + F(20 * j, 40))
            if x == (F(0), F(0)):
                continue
            ax = (a[0][0] * x[0] + a[0][1] * x[1],
                  a[1][0] * x[0] + a[1][1] * x[1])
            assert fn.value(x) > 0
            assert fn.value(ax) < fn.value(x)
    report("5-lyapunov-cegis",
           f"stable in {result.iterations} iterations, "
           f"{len(fn.pieces)} pieces, {elapsed:.0f}s, dual-backend certified")


def test_05b_stored_candidate_value_exact():
    from test_lyapunov import STORED_SIX_PIECE

    assert STORED_SIX_PIECE.value([10, 0]) == F("5.036")
    report("5b-stored-candidate-value", "V(10, 0) = 5.036 exactly")


@pytest.mark.xfail(
    strict=True,
    reason="the stored six-piece candidate is not a valid certificate: the "
    "decrease condition fails on part of the box (e.g. x = (-5.12, -10)); "
    "its +/- symmetrized closure does certify, see test_lyapunov",
)
def test_05c_stored_candidate_certifies():
    from test_lyapunov import STORED_SIX_PIECE

    spec = lyapunov.LyapSpec.make(stable_dynamics(), "roa",
                                  domain=[(-10, 10), (-10, 10)])
    assert isinstance(
        lyapunov.f_solve_cases(spec, STORED_SIX_PIECE), lyapunov.Certified
    )


# ---------------------------------------------------------------- 6

def test_06_lambda_contractiveness():
    poly = lyapunov.Polyhedron.make(G_ROWS, W)
    verdict = lyapunov.contractive_check(CT_A, CT_B, CT_F, 7, 7, poly, LAMBDA)
    assert isinstance(verdict, lyapunov.Verified)
    refuted = lyapunov.contractive_check(CT_A, CT_B, CT_F, 7, 7, poly, LAMBDA,
                                         scale_w="1.01")
    assert isinstance(refuted, lyapunov.Refuted)
    assert lyapunov.check_refutation(CT_A, CT_B, CT_F, 7, 7, poly, LAMBDA,
                                     refuted, scale_w="1.01")
    sweep = {}
    for lam in ("0.9", "0.95", "0.99"):
        got = lyapunov.contractive_check(CT_A, CT_B, CT_F, 7, 7, poly, lam)
        assert isinstance(got, (lyapunov.Verified, lyapunov.Refuted))
        sweep[lam] = type(got).__name__
    report("6-lambda-contractiveness",
           f"verified at lambda={LAMBDA}, refuted at scale 1.01 with exact "
           f"witness; sweep {sweep}")


# ---------------------------------------------------------------- 7

def test_07a_stuck_enable_invariant():
    rng = random.Random(55)
    runs = 0
    for _ in range(12):
        net = random_network(rng, max_muxes=3, max_dim=1)
        if net.output_dim != 1 or not net.mux_ids:
            continue
        data = Dataset.make(
            [([F(k, 4)], [F(rng.randint(-4, 4), 2)]) for k in range(-8, 9)]
        )
        init = default_init(net, data, seed=rng.randrange(1000))
        cfg = TrainConfig(learning_rate=0.05, max_iters=40, init=init)
        try:
            result = gd_train(net, data, cfg)
        except Exception:
            continue
        stuck = guard_only_params(net)
        for k in stuck:
            assert result.theta.theta[k] == result.theta0.theta[k]
        runs += 1
    assert runs >= 5
    report("7a-stuck-enable", f"bitwise equality on {runs} training runs")


def test_07b_weak_gradient_finite_differences():
    rng = random.Random(66)
    from amnet.train import _float_params, _forward_float
    from amnet.core import Mux

    def guard_magnitudes_ok(net, theta_floats, x):
        fparams = _float_params(net, theta_floats)
        values = _forward_float(net, fparams, x)
        return all(
            abs(values[node.guard][0]) >= 1e-3
            for node in net.nodes
            if isinstance(node, Mux)
        )

    done = 0
    attempts = 0
    while done < 100 and attempts < 4000:
        attempts += 1
        net = random_network(rng, max_muxes=4, max_dim=2)
        if net.output_dim != 1:
            continue
        pv = params_of(net)
        theta = [rng.uniform(-1.5, 1.5) for _ in pv.theta]
        x = [rng.uniform(-2, 2) for _ in range(net.input_dim)]
        if not guard_magnitudes_ok(net, theta, x):
            continue
        exact = ParameterVector(tuple(F(t) for t in theta), pv.layout)
        grads = weak_gradient(net, exact, x)
        h = 1e-6
        ok = True
        for k in range(len(theta)):
            up, dn = list(theta), list(theta)
            up[k] += h
            dn[k] -= h
            fp_up = _forward_float(net, _float_params(net, up), x)[net.output][0]
            fp_dn = _forward_float(net, _float_params(net, dn), x)[net.output][0]
            fd = (fp_up - fp_dn) / (2 * h)
            if abs(grads[k] - fd) > 1e-4 * max(1.0, abs(fd)):
                ok = False
                break
        assert ok, f"gradient mismatch at component {k}"
        done += 1
    assert done == 100, f"only {done} valid triples found"
    report("7b-weak-gradient", "100 random triples within 1e-4 of central differences")


def test_07c_consistency_trivial_cases():
    b = Builder(1)
    alpha = b.affine([[1]], [0], b.input)
    beta = b.affine([[2]], [1], b.input)
    gamma = b.affine([[1]], [-1], b.input)
    perceptron = b.network(b.mux(alpha, beta, gamma))

    got = consistency_train(perceptron, Dataset.make([([0], [0]), ([1], [1])]), 0)
    assert isinstance(got, Params)
    fitted = bind_params(perceptron, got.theta)
    assert evaluate(fitted, [0]) == (F(0),)
    assert evaluate(fitted, [1]) == (F(1),)

    got = consistency_train(perceptron, Dataset.make([([0], [0]), ([0], [1])]), "0.4")
    assert isinstance(got, Inconsistent)

    # a nonlinear-parameter query must come back Unknown (not crash)
    # when only the bundled linear solver is available
    tri = stdlib.triplexer(range(24))
    got = consistency_train(tri, Dataset.make([([0], [0]), ([1], [1])]), 0, timeout=30)
    assert isinstance(got, (Params, Inconsistent, Unknown))
    report("7c-consistency", f"params/inconsistent verified; nonlinear query: "
           f"{type(got).__name__}")


# ---------------------------------------------------------------- 8

def test_08_lp_kernel_oracle():
    rng = random.Random(88)
    feasible_count = 0
    infeasible_count = 0
    for _ in range(500):
        sys_ = random_system(rng, max_vars=4, max_rows=8)
        got = feasible(sys_)
        if isinstance(got, Feasible):
            assert satisfies(sys_, got.point)
            feasible_count += 1
        else:
            assert isinstance(oracle_verdict(sys_, grid_bound=3, steps=9), Infeasible)
            infeasible_count += 1
    assert feasible_count and infeasible_count
    report("8-lp-kernel",
           f"500 systems: {feasible_count} feasible (witnesses recheck), "
           f"{infeasible_count} infeasible (grid+vertex oracle agrees)")


# -------------------------------------------------- robustness stand-in

def test_09_relu_robustness_query():
    """Importer + bounded-perturbation misclassification query on a tiny
    2-4-2 rectifier network: must answer SAT or UNSAT, never crash, and
    any witness must replay through exact forward evaluation."""
    layers = [
        ([["1", "0.5"], ["-0.5", "1"], ["0.25", "-1"], ["-1", "-0.25"]],
         ["0.1", "-0.2", "0", "0.3"]),
        ([["1", "-1", "0.5", "-0.5"], ["-1", "1", "-0.5", "0.5"]], ["0.05", "-0.05"]),
    ]
    net = stdlib.from_relu_nn(layers)
    x0 = (F(1), F(-1))
    base = evaluate(net, x0)
    label = 0 if base[0] >= base[1] else 1
    other = 1 - label
    bound = F(1, 2)
    res = encode_smt(net)
    pins = []
    for name, val in zip(res.free_in, x0):
        pins.append(lin_atom([(name, 1)], ">=", val - bound))
        pins.append(lin_atom([(name, 1)], "<=", val + bound))
    # misclassification: the wrong logit reaches the top
    pins.append(lin_atom([(res.free_out[other], 1), (res.free_out[label], -1)],
                         ">=", 0))
    verdict = solve(Query(formula=with_assertions(res, pins), backend="enumerate"))
    assert isinstance(verdict, (Sat, Unsat))
    if isinstance(verdict, Sat):
        witness = tuple(verdict.model[n] for n in res.free_in)
        out = evaluate(net, witness)
        assert out[other] >= out[label]
        assert all(abs(w - v) <= bound for w, v in zip(witness, x0))
        detail = f"SAT with exact witness {[float(v) for v in witness]}"
    else:
        detail = "UNSAT: no in-box misclassification"
    report("9-robustness-standin", detail)
