import random
from fractions import Fraction as F

import pytest

from amnet import stdlib
from amnet.core import evaluate, graph_meta
from amnet.errors import DimError

from conftest import rand_point


def rand_scalar(rng):
    return F(rng.randint(-40, 40), rng.randint(1, 8))


SCALAR_TABLE = [
    (stdlib.relu, stdlib.ref_relu),
    (stdlib.abs1, stdlib.ref_abs),
    (stdlib.sat, stdlib.ref_sat),
    (stdlib.deadzone, stdlib.ref_deadzone),
]

PAIR_TABLE = [
    (stdlib.max2, stdlib.ref_max),
    (stdlib.min2, stdlib.ref_min),
]

GATE_TABLE = [
    (stdlib.gate_and, stdlib.ref_gate_and, 4),
    (stdlib.gate_or, stdlib.ref_gate_or, 4),
    (stdlib.gate_xor, stdlib.ref_gate_xor, 4),
    (stdlib.gate_not, stdlib.ref_gate_not, 3),
    (stdlib.cmp_le, stdlib.ref_cmp_le, 3),
    (stdlib.cmp_ge, stdlib.ref_cmp_ge, 3),
    (stdlib.cmp_lt, stdlib.ref_cmp_lt, 3),
    (stdlib.cmp_gt, stdlib.ref_cmp_gt, 3),
    (stdlib.cmp_eq, stdlib.ref_cmp_eq, 3),
    (stdlib.cmp_neq, stdlib.ref_cmp_neq, 3),
]

N_FIDELITY = 1000


@pytest.mark.parametrize("ctor,ref", SCALAR_TABLE, ids=lambda v: getattr(v, "__name__", ""))
def test_scalar_table_fidelity(ctor, ref):
    rng = random.Random(hash(ctor.__name__) & 0xFFFF)
    net = ctor()
    for _ in range(N_FIDELITY):
        x = rand_scalar(rng)
        assert evaluate(net, [x]) == (ref(x),)
    # exercise the kink points exactly
    for x in (F(-1), F(0), F(1)):
        assert evaluate(net, [x]) == (ref(x),)


@pytest.mark.parametrize("ctor,ref", PAIR_TABLE, ids=lambda v: getattr(v, "__name__", ""))
def test_pair_table_fidelity(ctor, ref):
    rng = random.Random(hash(ctor.__name__) & 0xFFFF)
    net = ctor()
    for _ in range(N_FIDELITY):
        x, y = rand_scalar(rng), rand_scalar(rng)
        assert evaluate(net, [x, y]) == (ref(x, y),)
    assert evaluate(net, [F(2), F(2)]) == (ref(F(2), F(2)),)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_norms_and_card_fidelity(n):
    rng = random.Random(100 + n)
    inf_net = stdlib.inf_norm(n)
    one_net = stdlib.one_norm(n)
    card_net = stdlib.card(n)
    for _ in range(N_FIDELITY // n):
        x = [rand_scalar(rng) for _ in range(n)]
        if rng.random() < 0.3:
            x[rng.randrange(n)] = F(0)
        assert evaluate(inf_net, x) == (stdlib.ref_inf_norm(x),)
        assert evaluate(one_net, x) == (stdlib.ref_one_norm(x),)
        assert evaluate(card_net, x) == (stdlib.ref_card(x),)


def test_card_example():
    assert evaluate(stdlib.card(3), [1, 0, -2]) == (F(2),)


def test_abs_example():
    assert evaluate(stdlib.abs1(), [-3]) == (F(3),)


def test_xor_exact_one_enable_selects_x():
    # expanding mu(mu(y,x,z1), mu(x,y,z1), z2) at z1=-1, z2=1 by hand:
    # z2 > 0 picks mu(x,y,z1), and z1 <= 0 picks x
    net = stdlib.gate_xor()
    assert evaluate(net, [F(7), F(9), F(-1), F(1)]) == (F(7),)
    assert evaluate(net, [F(7), F(9), F(-1), F(-1)]) == (F(9),)
    assert evaluate(net, [F(7), F(9), F(1), F(1)]) == (F(9),)


@pytest.mark.parametrize("ctor,ref,arity", GATE_TABLE, ids=lambda v: getattr(v, "__name__", ""))
def test_gate_table_fidelity(ctor, ref, arity):
    rng = random.Random(hash(ctor.__name__) & 0xFFFF)
    net = ctor()
    for _ in range(N_FIDELITY):
        args = [rand_scalar(rng) for _ in range(arity)]
        # hit the z = 0 boundary often: comparisons hinge on it
        for k in range(2, arity):
            if rng.random() < 0.4:
                args[k] = F(0)
        assert evaluate(net, args) == (ref(*args),)


def test_sat_equals_relu_composition():
    # two distinct expressions of one function agree everywhere tested
    rng = random.Random(7)
    sat1 = stdlib.sat()
    sat2 = stdlib.sat_via_relu()
    for _ in range(N_FIDELITY):
        x = rand_scalar(rng)
        assert evaluate(sat1, [x]) == evaluate(sat2, [x])
    for x in (F(-1), F(1), F(0), F(3), F(-3)):
        assert evaluate(sat1, [x]) == evaluate(sat2, [x])


def test_sat_via_relu_identity_at_3():
    assert evaluate(stdlib.sat_via_relu(), [3]) == (F(1),)


class TestFromReluNN:
    def test_single_layer_rectifies(self):
        net = stdlib.from_relu_nn([([[1, 0], [0, 1]], [0, 0])])
        assert evaluate(net, [-1, 2]) == (F(0), F(2))

    def test_two_relu_sat_identity(self):
        # r(x+1) - r(x-1) - 1
        net = stdlib.from_relu_nn([
            ([[1], [1]], [1, -1]),
            ([[1, -1]], [-1]),
        ])
        assert evaluate(net, [3]) == (F(1),)
        for x in (F(-5), F(-1), F(0), F(1, 2), F(1), F(9)):
            assert evaluate(net, [x]) == (stdlib.ref_sat(x),)

    def test_linear_feedback_via_pos_neg_split(self):
        # x = r(x) - r(-x): weights K and -K reproduce K x exactly
        rng = random.Random(11)
        k = [[F(1, 2), F(-2)], [F(3), F(1, 4)]]
        stacked = [row for row in k] + [[-v for v in row] for row in k]
        net = stdlib.from_relu_nn([
            (stacked, [0, 0, 0, 0]),
            ([[1, 0, -1, 0], [0, 1, 0, -1]], [0, 0]),
        ])
        for _ in range(10):
            x = rand_point(rng, 2)
            want = (
                k[0][0] * x[0] + k[0][1] * x[1],
                k[1][0] * x[0] + k[1][1] * x[1],
            )
            assert evaluate(net, x) == want

    def test_random_nets_match_dense_reference(self):
        rng = random.Random(23)
        for _ in range(25):
            dims = [rng.randint(1, 8) for _ in range(rng.randint(2, 4))]
            layers = []
            for din, dout in zip(dims, dims[1:]):
                a = [[rand_scalar(rng) for _ in range(din)] for _ in range(dout)]
                b = [rand_scalar(rng) for _ in range(dout)]
                layers.append((a, b))
            net = stdlib.from_relu_nn(layers)
            x = [rand_scalar(rng) for _ in range(dims[0])]
            cur = list(x)
            for li, (a, b) in enumerate(layers):
                cur = [
                    sum(w * v for w, v in zip(row, cur)) + bias
                    for row, bias in zip(a, b)
                ]
                if li < len(layers) - 1 or len(layers) == 1:
                    cur = [max(v, F(0)) for v in cur]
            assert evaluate(net, x) == tuple(cur)

    def test_one_mux_per_hidden_unit(self):
        net = stdlib.from_relu_nn([([[1, 1], [1, -1], [0, 1]], [0, 0, 0]), ([[1, 1, 1]], [0])])
        assert len(net.mux_ids) == 3

    def test_dim_mismatch(self):
        with pytest.raises(DimError):
            stdlib.from_relu_nn([([[1, 0]], [0]), ([[1, 1]], [0])])


def test_triplexer_needs_24_params():
    with pytest.raises(DimError):
        stdlib.triplexer(range(23))


def test_norms_reject_zero_width():
    with pytest.raises(DimError):
        stdlib.inf_norm(0)
