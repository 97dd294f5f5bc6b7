"""Stock networks: common piecewise-affine functions, gates, comparisons.

Each constructor returns a validated Network that computes the named
function exactly on rational inputs.  Where a function admits several
network expressions the smallest standard one is used; ``sat`` and
``sat_via_relu`` illustrate that distinct expressions of one function
coexist on purpose.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .core import Builder, Network
from .errors import DimError
from .rationals import RatLike, rat, rat_mat, rat_vec


def identity(dim: int = 1) -> Network:
    b = Builder(dim)
    return b.network(b.input)


def max2() -> Network:
    # mu(x1, x2, -x1 + x2)
    b = Builder(2)
    a1 = b.proj(b.input, 0)
    a2 = b.proj(b.input, 1)
    g = b.affine([[-1, 1]], [0], b.input)
    return b.network(b.mux(a1, a2, g))


def min2() -> Network:
    # mu(x2, x1, -x1 + x2)
    b = Builder(2)
    a1 = b.proj(b.input, 0)
    a2 = b.proj(b.input, 1)
    g = b.affine([[-1, 1]], [0], b.input)
    return b.network(b.mux(a2, a1, g))


def relu() -> Network:
    # mu(x, 0, -x)
    b = Builder(1)
    zero = b.const([0])
    neg = b.affine([[-1]], [0], b.input)
    return b.network(b.mux(b.input, zero, neg))


def abs1() -> Network:
    # mu(-x, x, x)
    b = Builder(1)
    neg = b.affine([[-1]], [0], b.input)
    return b.network(b.mux(neg, b.input, b.input))


def sat() -> Network:
    # mu(1, mu(-1, x, x+1), -x+1)
    b = Builder(1)
    one = b.const([1])
    neg_one = b.const([-1])
    xp1 = b.affine([[1]], [1], b.input)
    inner = b.mux(neg_one, b.input, xp1)
    outer_guard = b.affine([[-1]], [1], b.input)
    return b.network(b.mux(one, inner, outer_guard))


def sat_via_relu() -> Network:
    # r(x+1) - r(x-1) - 1, a distinct expression of the same function
    b = Builder(1)
    zero = b.const([0])

    def relu_of(a_row, bias):
        v = b.affine([a_row], [bias], b.input)
        ng = b.affine([[-a_row[0]]], [-bias], b.input)
        return b.mux(v, zero, ng)

    r1 = relu_of([1], 1)
    r2 = relu_of([1], -1)
    out = b.add(r1, r2, coeffs=[1, -1], bias=[-1])
    return b.network(out)


def deadzone() -> Network:
    # x+1 below -1, 0 inside (-1, 1), x-1 above 1
    b = Builder(1)
    xp1 = b.affine([[1]], [1], b.input)
    xm1 = b.affine([[1]], [-1], b.input)
    zero = b.const([0])
    high_guard = b.affine([[-1]], [1], b.input)  # 1 - x <= 0 iff x >= 1
    inner = b.mux(xm1, zero, high_guard)
    return b.network(b.mux(xp1, inner, xp1))


def inf_norm(n: int) -> Network:
    """max(|x_1|, ..., |x_n|) as a chain of pairwise maxima."""
    if n < 1:
        raise DimError("inf_norm needs n >= 1")
    b = Builder(n)
    abs_nodes = []
    for i in range(n):
        p = b.proj(b.input, i)
        np_ = b.scale(p, -1)
        abs_nodes.append(b.mux(np_, p, p))
    acc = abs_nodes[-1]
    for i in range(n - 2, -1, -1):
        g = b.affine([[-1, 1]], [0], abs_nodes[i], acc)
        acc = b.mux(abs_nodes[i], acc, g)
    return b.network(acc)


def one_norm(n: int) -> Network:
    """|x_1| + ... + |x_n|."""
    if n < 1:
        raise DimError("one_norm needs n >= 1")
    b = Builder(n)
    abs_nodes = []
    for i in range(n):
        p = b.proj(b.input, i)
        np_ = b.scale(p, -1)
        abs_nodes.append(b.mux(np_, p, p))
    if n == 1:
        return b.network(abs_nodes[0])
    return b.network(b.add(*abs_nodes))


def card(n: int) -> Network:
    """Number of nonzero coordinates.

    mu(mu(1,0,x_i), 0, -x_i) is 1 exactly when x_i == 0, so the count of
    nonzeros is n minus the sum of these zero indicators.
    """
    if n < 1:
        raise DimError("card needs n >= 1")
    b = Builder(n)
    one = b.const([1])
    zero = b.const([0])
    indicators = []
    for i in range(n):
        p = b.proj(b.input, i)
        np_ = b.scale(p, -1)
        inner = b.mux(one, zero, p)
        indicators.append(b.mux(inner, zero, np_))
    out = b.add(*indicators, coeffs=[-1] * n, bias=[n])
    return b.network(out)


def _gate4(b: Builder):
    px = b.proj(b.input, 0)
    py = b.proj(b.input, 1)
    pz1 = b.proj(b.input, 2)
    pz2 = b.proj(b.input, 3)
    return px, py, pz1, pz2


def gate_and() -> Network:
    # mu(mu(x, y, z1), y, z2) over input (x, y, z1, z2)
    b = Builder(4)
    px, py, pz1, pz2 = _gate4(b)
    return b.network(b.mux(b.mux(px, py, pz1), py, pz2))


def gate_or() -> Network:
    b = Builder(4)
    px, py, pz1, pz2 = _gate4(b)
    return b.network(b.mux(px, b.mux(px, py, pz1), pz2))


def gate_not() -> Network:
    # mu(y, x, z) over input (x, y, z)
    b = Builder(3)
    px = b.proj(b.input, 0)
    py = b.proj(b.input, 1)
    pz = b.proj(b.input, 2)
    return b.network(b.mux(py, px, pz))


def gate_xor() -> Network:
    # mu(mu(y, x, z1), mu(x, y, z1), z2): x when exactly one enable holds
    b = Builder(4)
    px, py, pz1, pz2 = _gate4(b)
    return b.network(b.mux(b.mux(py, px, pz1), b.mux(px, py, pz1), pz2))


def _cmp_builder():
    b = Builder(3)
    px = b.proj(b.input, 0)
    py = b.proj(b.input, 1)
    pz = b.proj(b.input, 2)
    nz = b.scale(pz, -1)
    return b, px, py, pz, nz


def cmp_le() -> Network:
    b, px, py, pz, _ = _cmp_builder()
    return b.network(b.mux(px, py, pz))


def cmp_ge() -> Network:
    b, px, py, _, nz = _cmp_builder()
    return b.network(b.mux(px, py, nz))


def cmp_lt() -> Network:
    b, px, py, _, nz = _cmp_builder()
    return b.network(b.mux(py, px, nz))


def cmp_gt() -> Network:
    b, px, py, pz, _ = _cmp_builder()
    return b.network(b.mux(py, px, pz))


def cmp_eq() -> Network:
    b, px, py, pz, nz = _cmp_builder()
    return b.network(b.mux(b.mux(px, py, pz), py, nz))


def cmp_neq() -> Network:
    b, px, py, pz, nz = _cmp_builder()
    return b.network(b.mux(b.mux(py, px, pz), px, nz))


def triplexer(theta: Sequence[RatLike]) -> Network:
    """Two-layer four-mux scalar network with 24 weights and biases.

    theta is ordered (a1, b1, c1, d1, e1, f1, ..., a4, b4, c4, d4, e4, f4):
    three affine triples feeding three first-layer muxes, then a fourth
    triple over the mux outputs feeding the output mux.
    """
    th = rat_vec(theta)
    if len(th) != 24:
        raise DimError(f"triplexer needs 24 parameters, got {len(th)}")
    a = th[0::6]
    bb = th[1::6]
    c = th[2::6]
    d = th[3::6]
    e = th[4::6]
    f = th[5::6]
    b = Builder(1)
    layer1 = []
    for i in range(3):
        xi = b.affine([[a[i]]], [bb[i]], b.input)
        yi = b.affine([[c[i]]], [d[i]], b.input)
        zi = b.affine([[e[i]]], [f[i]], b.input)
        layer1.append((xi, yi, zi))
    w1 = b.mux(*layer1[0])
    w2 = b.mux(*layer1[1])
    w3 = b.mux(*layer1[2])
    x4 = b.affine([[a[3]]], [bb[3]], w2)
    y4 = b.affine([[c[3]]], [d[3]], w3)
    z4 = b.affine([[e[3]]], [f[3]], w1)
    return b.network(b.mux(x4, y4, z4))


def switched(a_neg, a_pos) -> Network:
    """x+ = A_neg x when x_1 <= 0, else A_pos x."""
    am = rat_mat(a_neg)
    ap = rat_mat(a_pos)
    n = len(am)
    if len(ap) != n or any(len(r) != n for r in am) or any(len(r) != n for r in ap):
        raise DimError("switched needs two square matrices of equal size")
    b = Builder(n)
    lo = b.affine(am, [0] * n, b.input)
    hi = b.affine(ap, [0] * n, b.input)
    guard = b.proj(b.input, 0)
    return b.network(b.mux(lo, hi, guard))


def from_relu_nn(layers: Sequence[tuple]) -> Network:
    """Convert a dense feedforward rectifier network to a mux network.

    ``layers`` is a list of (A, b) pairs.  Rectifiers sit between
    consecutive layers and the last layer reads out linearly; a single
    layer is taken as a hidden layer, so its rectifier is applied.
    Each rectified unit becomes one mux, mu(v, 0, -v).
    """
    if not layers:
        raise DimError("at least one layer required")
    mats = [(rat_mat(a), rat_vec(bias)) for a, bias in layers]
    in_dim = len(mats[0][0][0]) if mats[0][0] else 0
    for (a, bias) in mats:
        if len(a) != len(bias):
            raise DimError("layer matrix rows != bias length")
    b = Builder(in_dim)
    zero = b.const([0])
    cur = b.input
    cur_dim = in_dim
    n_layers = len(mats)
    for li, (a, bias) in enumerate(mats):
        if a and len(a[0]) != cur_dim:
            raise DimError(
                f"layer {li}: matrix width {len(a[0])} != incoming dim {cur_dim}"
            )
        rectify = li < n_layers - 1 or n_layers == 1
        if not rectify:
            cur = b.affine(a, bias, cur)
            cur_dim = len(bias)
            continue
        units = []
        for j in range(len(bias)):
            v = b.affine([a[j]], [bias[j]], cur)
            ng = b.affine([[-w for w in a[j]]], [-bias[j]], cur)
            units.append(b.mux(v, zero, ng))
        cur = units[0] if len(units) == 1 else b.stack(*units)
        cur_dim = len(bias)
    return b.network(cur)


# Direct reference implementations used by fidelity tests and oracles.

def ref_max(x, y):
    return x if x >= y else y


def ref_min(x, y):
    return x if x <= y else y


def ref_relu(x):
    return x if x > 0 else Fraction(0)


def ref_abs(x):
    return -x if x < 0 else x


def ref_sat(x):
    if x <= -1:
        return Fraction(-1)
    if x >= 1:
        return Fraction(1)
    return x


def ref_deadzone(x):
    if x <= -1:
        return x + 1
    if x >= 1:
        return x - 1
    return Fraction(0)


def ref_inf_norm(xs):
    return max(ref_abs(v) for v in xs)


def ref_one_norm(xs):
    return sum((ref_abs(v) for v in xs), Fraction(0))


def ref_card(xs):
    return Fraction(sum(1 for v in xs if v != 0))


def ref_gate_and(x, y, z1, z2):
    return x if (z1 <= 0 and z2 <= 0) else y


def ref_gate_or(x, y, z1, z2):
    return x if (z1 <= 0 or z2 <= 0) else y


def ref_gate_not(x, y, z):
    return y if z <= 0 else x


def ref_gate_xor(x, y, z1, z2):
    return x if ((z1 <= 0) != (z2 <= 0)) else y


def ref_cmp_le(x, y, z):
    return x if z <= 0 else y


def ref_cmp_ge(x, y, z):
    return x if z >= 0 else y


def ref_cmp_lt(x, y, z):
    return x if z < 0 else y


def ref_cmp_gt(x, y, z):
    return x if z > 0 else y


def ref_cmp_eq(x, y, z):
    return x if z == 0 else y


def ref_cmp_neq(x, y, z):
    return x if z != 0 else y
