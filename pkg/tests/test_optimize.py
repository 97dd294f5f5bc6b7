import math
from fractions import Fraction as F

import pytest

from amnet import stdlib
from amnet.core import Builder, evaluate
from amnet.errors import DimError
from amnet.optimize import (
    BisectionConfig,
    BracketError,
    InfeasibleProblem,
    Optimal,
    check_level,
    minimize,
)
from amnet.solver import Sat, Unsat


def ge3_constraint():
    # x >= 3 written as 3 - x <= 0
    b = Builder(1)
    return b.network(b.affine([[-1]], [3], b.input))


class TestCheckLevel:
    def test_level_below_optimum_unsat(self):
        assert isinstance(check_level(stdlib.abs1(), [ge3_constraint()], 2), Unsat)

    def test_level_at_optimum_sat(self):
        assert isinstance(check_level(stdlib.abs1(), [ge3_constraint()], 3), Sat)

    def test_unconstrained_relu_at_zero(self):
        assert isinstance(check_level(stdlib.relu(), [], 0), Sat)

    def test_monotone_levels(self):
        verdicts = [
            isinstance(check_level(stdlib.abs1(), [ge3_constraint()], t), Sat)
            for t in (F(5, 2), F(29, 10), 3, F(7, 2), 5, 8)
        ]
        assert verdicts == sorted(verdicts)  # once Sat, always Sat


class TestMinimize:
    def test_abs_with_lower_bound(self):
        cfg = BisectionConfig.make(0, 8, "0.01")
        result = minimize(stdlib.abs1(), [ge3_constraint()], cfg)
        assert isinstance(result, Optimal)
        lo, hi = result.interval
        assert lo < 3 <= hi
        assert hi - lo <= F(1, 100)
        assert result.bisection_queries <= math.ceil(math.log2(800))
        assert result.witness[0] >= 3
        assert lo < result.value <= hi

    def test_unconstrained_relu(self):
        cfg = BisectionConfig.make(0, 1, "0.1")
        result = minimize(stdlib.relu(), [], cfg)
        assert isinstance(result, Optimal)
        # the lower endpoint is already feasible: minimum is exactly 0
        assert result.interval == (F(0), F(0))
        assert result.value == 0
        assert result.bisection_queries == 0

    def test_bracket_excluding_optimum(self):
        cfg = BisectionConfig.make(0, 2, "0.01")
        result = minimize(stdlib.abs1(), [ge3_constraint()], cfg)
        assert isinstance(result, BracketError)

    def test_infeasible_constraints(self):
        # x >= 3 and x <= -3 cannot hold together
        b = Builder(1)
        le_minus3 = b.network(b.affine([[1]], [3], b.input))  # x + 3 <= 0
        cfg = BisectionConfig.make(0, 10, "0.1")
        result = minimize(stdlib.abs1(), [ge3_constraint(), le_minus3], cfg)
        assert isinstance(result, InfeasibleProblem)

    def test_epsilon_suboptimality_against_sweep(self):
        # minimize sat(x) subject to x >= -5: optimum is -1
        b = Builder(1)
        ge = b.network(b.affine([[-1]], [-5], b.input))
        cfg = BisectionConfig.make(-3, 4, "1/64")
        result = minimize(stdlib.sat(), [ge], cfg)
        assert isinstance(result, Optimal)
        brute = min(
            evaluate(stdlib.sat(), [F(t, 4)])[0] for t in range(-20, 21)
        )
        assert abs(result.value - brute) <= F(1, 64)
        assert result.interval[0] < brute <= result.interval[1]

    def test_vector_objective_rejected(self):
        b = Builder(2)
        net = b.network(b.input)
        with pytest.raises(DimError):
            minimize(net, [], BisectionConfig.make(0, 1, "0.1"))

    def test_call_budget_formula(self):
        # width 8, eps 2**-7: exactly ceil(log2(1024)) = 10 splits needed
        cfg = BisectionConfig.make(0, 8, F(1, 2) ** 7)
        result = minimize(stdlib.abs1(), [ge3_constraint()], cfg)
        assert isinstance(result, Optimal)
        assert result.bisection_queries <= 10
