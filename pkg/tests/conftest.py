import random
from fractions import Fraction

import pytest

from amnet.core import Builder, Network


def rand_rat(rng: random.Random, lo=-2, hi=2, denom=4) -> Fraction:
    return Fraction(rng.randint(lo * denom, hi * denom), denom)


def random_network(rng: random.Random, max_muxes: int = 6, max_dim: int = 3) -> Network:
    """Random well-defined network: rational weights in [-2, 2], dims <= 3.

    Mux operands are adapted to a common dimension through fresh affine
    nodes, so every draw is dimension-consistent by construction.
    """
    q = rng.randint(1, max_dim)
    b = Builder(q)
    pool = [b.input]

    def adapt(nid: int, dim: int) -> int:
        src_dim = b.dim(nid)
        a = [[rand_rat(rng) for _ in range(src_dim)] for _ in range(dim)]
        bias = [rand_rat(rng) for _ in range(dim)]
        return b.affine(a, bias, nid)

    n_muxes = rng.randint(0, max_muxes)
    n_ops = n_muxes + rng.randint(0, 3)
    ops = ["mux"] * n_muxes + ["affine"] * (n_ops - n_muxes)
    rng.shuffle(ops)
    for op in ops:
        if op == "affine":
            child = rng.choice(pool)
            dim = rng.randint(1, max_dim)
            pool.append(adapt(child, dim))
        else:
            dim = rng.randint(1, max_dim)
            first = adapt(rng.choice(pool), dim)
            second = adapt(rng.choice(pool), dim)
            guard = adapt(rng.choice(pool), 1)
            pool.append(b.mux(first, second, guard))
    out = pool[-1]
    if b.dim(out) > max_dim:
        out = adapt(out, rng.randint(1, max_dim))
    return b.network(out)


def rand_point(rng: random.Random, dim: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(rng.randint(-12, 12), 4) for _ in range(dim))


@pytest.fixture
def rng():
    return random.Random(20240817)


# x(t+1) = A x(t), spectral radius 3/4; the running stability example
STABLE_A = [
    ["0.7005", "-0.2638"],
    ["-0.2278", "-0.4627"],
]


def stable_dynamics() -> Network:
    b = Builder(2)
    return b.network(b.affine(STABLE_A, [0, 0], b.input))
