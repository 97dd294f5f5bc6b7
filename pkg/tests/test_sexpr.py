import random
from fractions import Fraction as F

import pytest

from amnet import stdlib
from amnet.core import evaluate
from amnet.errors import AmnSyntaxError, SemanticError
from amnet.sexpr import parse_amn, parse_vector, serialize_amn

RELU_DOC = "(input x 1)(mux y x (const 0) (affine z [[-1]] [0] x))(output y)"


class TestParse:
    def test_relu_document(self):
        net = parse_amn(RELU_DOC)
        assert evaluate(net, [-2]) == (F(0),)
        assert evaluate(net, [3]) == (F(3),)

    def test_decimals_parse_exactly(self):
        net = parse_amn(
            "(input x 1)(affine y [[0.7005]] [0] x)(output y)"
        )
        assert evaluate(net, [1]) == (F(7005, 10000),)

    def test_quotients_and_negatives(self):
        net = parse_amn("(input x 1)(affine y [[-1/3]] [1/2] x)(output y)")
        assert evaluate(net, [3]) == (F(-1, 2),)

    def test_multi_child_affine(self):
        doc = (
            "(input x 2)"
            "(affine p [[1,0]] [0] x)"
            "(affine q [[0,1]] [0] x)"
            "(affine s [[1,1]] [0] p q)"
            "(output s)"
        )
        net = parse_amn(doc)
        assert evaluate(net, [2, 3]) == (F(5),)

    def test_anonymous_mux_with_named_args(self):
        doc = (
            "(input x 1)"
            "(affine a [[1]] [0] x)"
            "(affine b [[2]] [0] x)"
            "(affine g [[1]] [-1] x)"
            "(mux out a b g)"
            "(output out)"
        )
        net = parse_amn(doc)
        assert evaluate(net, [0]) == (F(0),)
        assert evaluate(net, [2]) == (F(4),)

    def test_forward_reference_rejected(self):
        with pytest.raises(SemanticError):
            parse_amn("(input x 1)(mux y x later (affine z [[-1]] [0] x))"
                      "(affine later [[1]] [0] x)(output y)")

    def test_duplicate_name_rejected(self):
        with pytest.raises(SemanticError):
            parse_amn("(input x 1)(affine x [[1]] [0] x)(output x)")

    def test_missing_output_rejected(self):
        with pytest.raises(SemanticError):
            parse_amn("(input x 1)")

    def test_syntax_error_carries_position(self):
        with pytest.raises(AmnSyntaxError) as err:
            parse_amn("(input x 1)\n(affine y [[oops]] [0] x)(output y)")
        assert err.value.line == 2

    def test_mux_arity_enforced(self):
        with pytest.raises(SemanticError):
            parse_amn("(input x 1)(mux y x x)(output y)")


class TestRoundTrip:
    CORPUS = [
        stdlib.relu,
        stdlib.abs1,
        stdlib.sat,
        stdlib.sat_via_relu,
        stdlib.deadzone,
        stdlib.max2,
        stdlib.min2,
        stdlib.gate_and,
        stdlib.gate_xor,
        stdlib.cmp_eq,
        lambda: stdlib.inf_norm(3),
        lambda: stdlib.one_norm(2),
        lambda: stdlib.card(2),
        lambda: stdlib.triplexer([F(k, 7) for k in range(24)]),
        lambda: stdlib.from_relu_nn([([[1, 2], [3, -1]], [0, "0.5"]), ([[1, -1]], [0])]),
    ]

    @pytest.mark.parametrize("ctor", CORPUS)
    def test_serialize_parse_identity(self, ctor):
        net = ctor()
        text = serialize_amn(net)
        reparsed = parse_amn(text)
        assert serialize_amn(reparsed) == text
        rng = random.Random(5)
        for _ in range(10):
            x = [F(rng.randint(-8, 8), 2) for _ in range(net.input_dim)]
            assert evaluate(reparsed, x) == evaluate(net, x)

    def test_canonicalization_idempotent(self):
        canon = serialize_amn(parse_amn(RELU_DOC))
        assert serialize_amn(parse_amn(canon)) == canon


class TestFuzz:
    def test_single_token_mutations_never_crash(self):
        text = serialize_amn(stdlib.sat())
        rng = random.Random(99)
        mutations = 0
        for _ in range(300):
            pos = rng.randrange(len(text))
            replacement = rng.choice(")(][,xz9 ")
            mutated = text[:pos] + replacement + text[pos + 1:]
            if mutated == text:
                continue
            mutations += 1
            try:
                net = parse_amn(mutated)
            except (AmnSyntaxError, SemanticError):
                continue
            # accepted mutants must still be valid networks
            evaluate(net, [F(1, 2)])
        assert mutations > 200


def test_parse_vector():
    assert parse_vector("1, 0.5, -2/3") == (F(1), F(1, 2), F(-2, 3))
